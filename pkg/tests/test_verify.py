import numpy as np
import pytest

from magbloch.fiber import FiberError, FiberPoint, PlaneWaveBasis, g_factors
from magbloch.lattice import TWO_PI
from magbloch.potential import TrigPolynomial, directional_norm, weak_norm
from magbloch.spectrum import free_thomas_closed_form, thomas_probe
from magbloch.verify import (
    MIN_BATTERY,
    annulus_cutoff,
    annulus_mask,
    battery_vectors,
    probe_bernstein,
    probe_lemma11,
    probe_relative_bound,
    probe_thm11,
    probe_thm12,
)

from conftest import frame


def test_battery_layout():
    mask = np.array([True, False, True, True, True, True])
    weight = np.array([5.0, 0.0, 3.0, 1.0, 4.0, 2.0])
    vecs = battery_vectors(mask, weight, 32, np.random.default_rng(0))
    assert vecs.shape == (32, 6)
    assert [int(np.flatnonzero(v)[0]) for v in vecs[:4]] == [3, 5, 2, 4]
    assert np.all(vecs[:, 1] == 0)
    with pytest.raises(ValueError):
        battery_vectors(mask, weight, MIN_BATTERY - 1, np.random.default_rng(0))
    with pytest.raises(FiberError):
        battery_vectors(np.zeros(6, bool), weight, 32, np.random.default_rng(0))


def test_thm12_constant_field(z3):
    W = TrigPolynomial.constant(z3, 1.5)
    fr = frame(z3, 1, 0, 0)
    basis = PlaneWaveBasis(z3, TWO_PI * 2)
    rep = probe_thm12(W.sample((8, 8, 8)), W, fr, basis, [5.0, 10.0])
    wn = weak_norm(W.sample((8, 8, 8)), 3)
    for row, kappa in zip(rep.curve, [5.0, 10.0]):
        gp, gm = g_factors(basis, FiberPoint.thomas(fr, kappa))
        assert row["max_ratio"] == pytest.approx(1.5 / (wn * np.sqrt(np.min(gp * gm))), rel=1e-12)
        assert row["max_ratio"] <= row["gamma_bound"]
    assert rep.passed


def test_thm12_zero_field(z3):
    W = TrigPolynomial.zero(z3)
    rep = probe_thm12(W.sample((4, 4, 4)), W, frame(z3, 1, 0, 0), PlaneWaveBasis(z3, TWO_PI), [5.0, 10.0])
    assert rep.max_ratio == 0.0 and rep.checks["finite"]


def test_thm12_cosine_decreases(z3):
    W = TrigPolynomial.cosine(z3, (1, 0, 0), 2.0)
    rep = probe_thm12(W.sample((16, 16, 16)), W, frame(z3, 1, 0, 0), PlaneWaveBasis(z3, TWO_PI * 2), [10.0, 20.0, 40.0])
    assert rep.checks["non_increasing"] and rep.checks["gamma_bound"]
    assert rep.to_dict()["passed"]


def test_lemma11_constant_potential(z3):
    V = TrigPolynomial.constant(z3, 2.0)
    fr = frame(z3, 0, 1, 0)
    rep = probe_lemma11(V, fr, PlaneWaveBasis(z3, TWO_PI * 1.5), [[0, 0, 0], [np.pi, 0, 0]], [0.0, 0.5, 1.0])
    assert directional_norm(V, fr, 2) == pytest.approx(2.0)
    assert rep.curve[0]["C"] == pytest.approx(1.0, abs=1e-12)
    assert rep.checks["non_increasing"]


def test_lemma11_monotone_in_epsilon(z3):
    V = TrigPolynomial.cosine(z3, (0, 1, 0), 1.0) + TrigPolynomial.cosine(z3, (1, 1, 0), 0.5)
    rep = probe_lemma11(V, frame(z3, 0, 1, 0), PlaneWaveBasis(z3, TWO_PI * 2), [[0, 0, 0], [0.3, 1.0, 0]], [2.0, 0.0, 0.1, 0.5])
    cs = {row["epsilon"]: row["C"] for row in rep.curve}
    assert cs[0.0] >= cs[0.1] >= cs[0.5] >= cs[2.0] >= 0
    assert rep.passed


def bernstein_fiber(z3, kappa):
    fr = frame(z3, 1, 0, 0)
    return FiberPoint.thomas(fr, kappa)


def test_bernstein_single_mode(z3):
    fiber = bernstein_fiber(z3, 24.0)
    a = 6.0
    basis = PlaneWaveBasis(z3, annulus_cutoff(fiber, a))
    rep = probe_bernstein(basis, fiber, a, battery=32)
    scale = a ** (0.5 + 1 / 3) * 24.0 ** (0.5 - 1 / 3)
    # unit modes lead the battery; the cell has volume one
    assert rep.curve[0] == pytest.approx(1.0 / scale, rel=1e-12)
    assert rep.params["q"] == pytest.approx(6.0)
    assert rep.passed


def test_bernstein_scaling(z3):
    def worst(kappa, a):
        fiber = bernstein_fiber(z3, kappa)
        return probe_bernstein(PlaneWaveBasis(z3, annulus_cutoff(fiber, a)), fiber, a, battery=32).max_ratio

    base = worst(24.0, 6.0)
    assert worst(24.0, 12.0) <= base * 2 ** (0.5 + 1 / 3) * 1.25
    assert worst(48.0, 12.0) <= worst(24.0, 12.0) * 1.10


def test_bernstein_preconditions(z2, z3):
    fiber = bernstein_fiber(z3, 24.0)
    basis = PlaneWaveBasis(z3, annulus_cutoff(fiber, 6.0))
    with pytest.raises(FiberError):
        probe_bernstein(basis, fiber, 1.0)
    with pytest.raises(FiberError):
        probe_bernstein(basis, fiber, 13.0)
    with pytest.raises(FiberError):
        probe_bernstein(PlaneWaveBasis(z3, TWO_PI), fiber, 6.0)
    low = bernstein_fiber(z3, 10.0)
    with pytest.raises(FiberError):
        probe_bernstein(basis, low, 4.0)
    flat = FiberPoint([np.pi, 0.0], 24.0, frame(z2, 1, 0))
    with pytest.raises(ValueError):
        probe_bernstein(PlaneWaveBasis(z2, 40.0), flat, 6.0)


def test_annulus_mask_geometry(z3):
    fiber = bernstein_fiber(z3, 24.0)
    basis = PlaneWaveBasis(z3, annulus_cutoff(fiber, 6.0))
    mask = annulus_mask(basis, fiber, 6.0)
    y = fiber.k + TWO_PI * basis.cart
    perp = np.linalg.norm(y[:, 1:], axis=1)
    assert np.array_equal(mask, (np.abs(24.0 - perp) <= 6.0) & (np.abs(y[:, 0]) <= 6.0))
    assert mask.any()


def test_relative_bound(z3):
    basis = PlaneWaveBasis(z3, TWO_PI * 1.5)
    zero = probe_relative_bound(TrigPolynomial.zero(z3, 3), basis, [0.0, 1.0])
    assert zero.max_ratio == 0.0
    a0 = np.array([0.3, -0.4, 1.2])
    const = probe_relative_bound(TrigPolynomial.constant(z3, a0), basis, [0.0, 0.5, 2.0])
    assert all(row["C"] == pytest.approx(np.linalg.norm(a0), rel=1e-12) for row in const.curve)


def test_thm11_constant_shift(z3):
    A = TrigPolynomial.cosine(z3, (0, 1, 0), [0.3, 0.0, 0.0])
    V1 = TrigPolynomial.cosine(z3, (1, 0, 0), 2.0)
    c = 0.75
    fr = frame(z3, 1, 0, 0)
    basis = PlaneWaveBasis(z3, TWO_PI * 2)
    kappas = [5.0, 10.0, 20.0]
    rep = probe_thm11(A, V1, TrigPolynomial.constant(z3, c), 3.0, fr, basis, kappas, battery=32)
    ref = thomas_probe(A, V1, 3.0 - c, fr, basis, kappas)
    assert np.max(np.abs(np.array([r["s_min"] for r in rep.curve]) - ref.s_min)) < 1e-10
    assert rep.checks["sup_form_identity"] and rep.params["sup_form_residual"] < 1e-10


def test_thm11_free_negative_lambda(z3):
    zero = TrigPolynomial.zero(z3)
    fr = frame(z3, 0, 0, 1)
    basis = PlaneWaveBasis(z3, TWO_PI * 2)
    rep = probe_thm11(TrigPolynomial.zero(z3, 3), zero, zero, -2.0, fr, basis, [5.0, 10.0, 20.0], battery=32)
    for row in rep.curve:
        assert row["s_min"] == pytest.approx(free_thomas_closed_form(-2.0, fr, basis, row["kappa"]), abs=1e-10)
    assert rep.passed


def test_report_json_round_trip(z3):
    import json

    rep = probe_relative_bound(TrigPolynomial.zero(z3, 3), PlaneWaveBasis(z3, TWO_PI), [0.0])
    back = json.loads(rep.to_json())
    assert back["probe"] == "relative_bound" and back["passed"] is True
