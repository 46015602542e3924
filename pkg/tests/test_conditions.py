import json

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given
from hypothesis import strategies as st

from magbloch.conditions import (
    AveragingMeasure,
    MeasureError,
    check_conditions,
    fourier_criterion,
    primitive_vectors,
    search_gamma,
    sphere_grid,
    theta,
    validate_measure,
)
from magbloch.lattice import DirectionFrame, build_lattice
from magbloch.potential import FieldError, TrigPolynomial, random_trig_polynomial

from conftest import frame
from oracles import l1_candidates, theta_quadrature

DIRAC = AveragingMeasure.dirac()


def example_A(lat, a):
    return TrigPolynomial.cosine(lat, (0, 1, 0), [a, 0.0, 0.0])


# theta ----------------------------------------------------------------------------


def test_theta_zero_field(z3):
    assert theta(TrigPolynomial.zero(z3, 3), frame(z3, 1, 0, 0), DIRAC) == 0.0


def test_theta_gamma_dependent_modes_only(z3):
    A = TrigPolynomial.cosine(z3, (1, 0, 0), [0.3, 0.2, 0.0]) + TrigPolynomial.cosine(z3, (2, 0, 0), [0, 0, 1.0])
    assert theta(A, frame(z3, 1, 0, 0), DIRAC) == 0.0


@pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
def test_theta_closed_form(z3, a):
    A = example_A(z3, a)
    assert theta(A, frame(z3, 1, 0, 0), DIRAC) == pytest.approx(a / np.pi, abs=1e-8)
    assert theta(A, frame(z3, 0, 1, 0), DIRAC) == pytest.approx(0.0, abs=1e-8)
    assert theta(A, frame(z3, 1, 0, 0), DIRAC) == pytest.approx(theta_quadrature(A, frame(z3, 1, 0, 0), (16, 16, 16)))


def test_theta_matches_quadrature_on_random_fields(z3):
    cand = l1_candidates(3, 3)
    for seed in range(3):
        A = random_trig_polynomial(z3, 3, np.random.default_rng(seed), n_modes=4, candidates=cand, mean=True)
        fr = frame(z3, *[(1, 0, 0), (0, 1, 1), (1, -1, 0)][seed])
        shape = (12, 12, 12)
        assert theta(A, fr, DIRAC, x_grid=shape) == pytest.approx(theta_quadrature(A, fr, shape), abs=1e-6)


def test_theta_windowed_matches_quadrature(z3):
    A = TrigPolynomial.cosine(z3, (0, 1, 0), [0.4, 0.0, 0.0]) + TrigPolynomial.cosine(z3, (0, 0, 1), [0.0, 0.3, 0.0])
    fr = frame(z3, 1, 0, 0)
    mu = AveragingMeasure("windowed", 4.0, 9.0)
    spheres = sphere_grid(fr, 6)
    shape = (4, 8, 8)
    got = theta(A, fr, mu, x_grid=shape, spheres=spheres)
    assert got == pytest.approx(theta_quadrature(A, fr, shape, spheres, mu, n_xi=8, t_max=40.0, n_t=1601), abs=2e-3)
    # a window flat beyond every surviving frequency acts like the Dirac measure
    wide = AveragingMeasure("windowed", 100.0, 120.0)
    assert theta(A, fr, wide, x_grid=shape, spheres=spheres) == pytest.approx(theta(A, fr, DIRAC, x_grid=shape))


def test_theta_needs_three_dimensions(z2):
    A = TrigPolynomial.cosine(z2, (0, 1), [1.0, 0.0])
    with pytest.raises(MeasureError):
        theta(A, frame(z2, 1, 0), DIRAC)


def test_theta_rejects_complex_field(z3):
    A = TrigPolynomial(z3, [[0, 1, 0]], [[1.0, 0, 0]])
    with pytest.raises(FieldError):
        theta(A, frame(z3, 1, 0, 0), DIRAC)


def test_theta_empty_sphere_grid(z3):
    with pytest.raises(MeasureError):
        theta(example_A(z3, 1.0), frame(z3, 1, 0, 0), DIRAC, spheres=np.zeros((0, 3)))


def test_sphere_grid_is_orthogonal_unit(z3):
    lat4 = build_lattice(np.eye(4))
    for fr, count in ((frame(z3, 1, 1, 0), 32), (DirectionFrame.from_coords(lat4, (1, 0, 1, 0)), 40)):
        pts = sphere_grid(fr, count)
        assert len(pts) == count
        assert np.allclose(pts @ fr.e, 0, atol=1e-14)
        assert np.allclose(np.linalg.norm(pts, axis=1), 1)


@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_theta_homogeneous(seed, c):
    lat = build_lattice(np.eye(3))
    fr = DirectionFrame.from_coords(lat, (0, 0, 1))
    A = random_trig_polynomial(lat, 3, np.random.default_rng(seed), n_modes=3, max_coord=1)
    shape = (8, 8, 8)
    assert theta(A * c, fr, DIRAC, shape) == pytest.approx(abs(c) * theta(A, fr, DIRAC, shape), rel=1e-10, abs=1e-12)


@given(st.integers(0, 10_000))
def test_theta_refinement_monotone(seed):
    lat = build_lattice(np.eye(3))
    fr = DirectionFrame.from_coords(lat, (1, 0, 0))
    A = random_trig_polynomial(lat, 3, np.random.default_rng(seed), n_modes=3, max_coord=1)
    mu = AveragingMeasure("windowed", 3.0, 8.0)
    coarse = theta(A, fr, mu, (6, 6, 6), sphere_grid(fr, 8))
    fine = theta(A, fr, mu, (12, 12, 12), sphere_grid(fr, 16))
    assert fine >= coarse - 1e-12


@given(st.integers(0, 10_000), st.sampled_from([(1, 0, 0), (0, 1, 0), (1, 1, 0), (1, -1, 1)]))
def test_fourier_sum_dominates_theta(seed, g):
    lat = build_lattice(np.eye(3))
    fr = DirectionFrame.from_coords(lat, g)
    A = random_trig_polynomial(lat, 3, np.random.default_rng(seed), n_modes=4, max_coord=1)
    total, _ = fourier_criterion(A, fr)
    assert theta(A, fr, DIRAC) <= fr.gamma_norm / np.pi * total + 1e-12


# Fourier criterion --------------------------------------------------------------------


def test_fourier_criterion_example(z3):
    a = 0.75
    total, bound = fourier_criterion(example_A(z3, a), frame(z3, 1, 0, 0))
    assert total == a
    assert bound == np.pi
    total, _ = fourier_criterion(example_A(z3, a), frame(z3, 0, 1, 0))
    assert total == 0.0


def test_fourier_criterion_scaling(z3):
    A = random_trig_polynomial(z3, 3, np.random.default_rng(3), n_modes=4, max_coord=1)
    fr = frame(z3, 1, 1, 0)
    s1, b1 = fourier_criterion(A, fr)
    s2, b2 = fourier_criterion(A * -2.5, fr)
    assert s2 == pytest.approx(2.5 * s1) and b1 == b2 == pytest.approx(np.pi / np.sqrt(2))


# gamma search -----------------------------------------------------------------------


def test_primitive_vectors(z2):
    vecs = list(primitive_vectors(2, 2))
    assert (2, 2) not in vecs and (0, 2) not in vecs and (1, 2) in vecs and (0, 0) not in vecs
    assert len(vecs) == 16


def test_search_zero_field(z3):
    reports = search_gamma(TrigPolynomial.zero(z3, 3), z3, 1, DIRAC)
    assert len(reports) == 13 * 2
    assert reports[0].theta == 0.0 and reports[0].gamma_coords == (1, 0, 0)


def test_search_ranks_transverse_direction_first(z3):
    reports = search_gamma(example_A(z3, 1.0), z3, 1, DIRAC)
    order = [r.gamma_coords for r in reports]
    assert reports[0].gamma_coords == (0, 1, 0)
    assert order.index((0, 1, 0)) < order.index((1, 0, 0))
    e1 = reports[order.index((1, 0, 0))]
    assert e1.theta == pytest.approx(1 / np.pi)


def test_search_finds_passing_direction(z3):
    A = random_trig_polynomial(z3, 3, np.random.default_rng(11), n_modes=3, max_coord=1)
    total = sum(np.linalg.norm(v) for c, v in zip(A.coords, A.values) if np.any(c))
    A = A * (0.9 * np.pi / (np.sqrt(3) * np.sqrt(3) * total))
    reports = search_gamma(A, z3, 1, DIRAC)
    assert any(r.fourier_ok for r in reports)
    assert all(r.theta < 1 for r in reports if r.fourier_ok)


def test_search_rejects_bad_box(z3):
    with pytest.raises(ValueError):
        search_gamma(TrigPolynomial.zero(z3, 3), z3, 0, DIRAC)


def test_report_flags_and_json(z3):
    rep = check_conditions(example_A(z3, 4.0), frame(z3, 1, 0, 0), DIRAC)
    assert rep.theta == pytest.approx(4 / np.pi) and not rep.theta_ok
    assert rep.fourier_sum == 4.0 and not rep.fourier_ok
    data = json.loads(rep.to_json())
    assert data["gamma_coords"] == [1, 0, 0] and data["grids"]["sphere_points"] == 64


# measures --------------------------------------------------------------------------


def test_dirac_measure():
    rep = validate_measure(DIRAC)
    assert rep["valid"] and rep["total_variation"] == 1.0
    assert np.all(DIRAC.transform([0.0, 5.0, -1e6]) == 1.0)
    with pytest.raises(MeasureError):
        DIRAC.density(0.0)


def test_sharp_cutoff_rejected():
    with pytest.raises(MeasureError, match="not in M_h"):
        validate_measure(AveragingMeasure("windowed", 1.0, 1.0))


def test_raised_cosine_valid():
    mu = AveragingMeasure("windowed", 1.0, 2.0)
    rep = validate_measure(mu)
    assert rep["valid"]
    assert 1.0 <= rep["total_variation"] < 5.0
    assert rep["tail_residual"] < 1e-3


def test_transform_flat_and_even():
    mu = AveragingMeasure("windowed", 1.0, 2.0)
    p = np.linspace(-3, 3, 601)
    assert np.array_equal(mu.transform(p), mu.transform(-p))
    assert np.all(mu.transform(p[np.abs(p) <= 1.0]) == 1.0)
    assert np.all(mu.transform(p[np.abs(p) >= 2.0]) == 0.0)


@pytest.mark.parametrize("t", [0.0, 0.3, np.pi, 5.0, 40.0])
def test_density_matches_inverse_transform_quadrature(t):
    mu = AveragingMeasure("windowed", 1.0, 2.0)
    oracle = integrate.quad(lambda p: float(mu.transform(p)) * np.cos(p * t), 0, 2, limit=200)[0] / np.pi
    assert mu.density(t)[0] == pytest.approx(oracle, abs=1e-12)


def test_density_has_unit_mass_and_reproduces_transform():
    mu = AveragingMeasure("windowed", 1.0, 2.0)
    t = np.linspace(-400, 400, 400001)
    dens = mu.density(t)
    dt = t[1] - t[0]
    assert np.sum(dens) * dt == pytest.approx(1.0, abs=1e-4)
    for p in (0.5, 1.5):
        assert np.sum(dens * np.cos(p * t)) * dt == pytest.approx(float(mu.transform(p)), abs=1e-4)


@pytest.mark.parametrize("kind,h,H", [("gauss", 1.0, 2.0), ("windowed", -1.0, 2.0), ("windowed", 2.0, 1.0), ("windowed", 1.0, None)])
def test_bad_measures(kind, h, H):
    with pytest.raises(MeasureError):
        AveragingMeasure(kind, h, H)
