import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magbloch.lattice import (
    TWO_PI,
    DirectionFrame,
    LatticeError,
    build_lattice,
    decompose,
    enumerate_indices,
    integer_ball,
)


def brute_force_ball(lat, cutoff, box=6):
    out = []
    for c in itertools.product(range(-box, box + 1), repeat=lat.n):
        if np.linalg.norm(TWO_PI * lat.cartesian(c)) <= cutoff * (1 + 1e-12):
            out.append(c)
    return sorted(out)


def test_cubic_lattice_is_self_dual(z3):
    assert np.allclose(z3.reciprocal_basis, np.eye(3))
    assert z3.cell_volume == pytest.approx(1.0)
    assert z3.reciprocal_cell_volume == pytest.approx(1.0)


def test_stretched_lattice():
    lat = build_lattice(np.diag([2.0, 1.0, 1.0]))
    assert np.allclose(lat.reciprocal_basis, np.diag([0.5, 1.0, 1.0]))
    assert lat.cell_volume == pytest.approx(2.0)
    assert lat.reciprocal_cell_volume == pytest.approx(0.5)


def test_skew_reciprocal_matches_inverse_transpose(skew3):
    oracle = np.linalg.inv(skew3.basis).T
    assert np.allclose(skew3.reciprocal_basis, oracle, atol=1e-14)
    assert skew3.biorthogonality_residual() < 1e-12


@pytest.mark.parametrize("basis", [np.ones((3, 3)), np.zeros((2, 2)), np.eye(3)[:2], [[1.0]]])
def test_bad_bases_rejected(basis):
    with pytest.raises(LatticeError):
        build_lattice(basis)


def test_degenerate_message():
    with pytest.raises(LatticeError, match="degenerate lattice"):
        build_lattice([[1, 2], [2, 4]])


def test_reciprocal_diameter_cubic(z3):
    assert z3.reciprocal_diameter == pytest.approx(np.sqrt(3))


def test_index_counts(z3, z2):
    # radius 1.5 already admits the twelve (+-1, +-1, 0)-type modes of norm sqrt(2)
    assert len(enumerate_indices(z3, TWO_PI * 1.5)) == len(brute_force_ball(z3, TWO_PI * 1.5)) == 19
    assert len(enumerate_indices(z3, TWO_PI * 1.2)) == 7
    assert len(enumerate_indices(z2, TWO_PI * 1.0)) == 5
    only = enumerate_indices(z3, TWO_PI * 0.9)
    assert len(only) == 1 and only[0].coords == (0, 0, 0)


@pytest.mark.parametrize("cutoff", [1.0, 2.0, 2.5, 3.2])
def test_ball_matches_brute_force(skew3, cutoff):
    got = [tuple(r) for r in integer_ball(skew3, TWO_PI * cutoff).tolist()]
    assert got == brute_force_ball(skew3, TWO_PI * cutoff)


def test_basis_too_large(z3):
    with pytest.raises(LatticeError, match="basis too large"):
        integer_ball(z3, TWO_PI * 10, max_count=100)


def test_decompose_examples(z3):
    fr = DirectionFrame.from_coords(z3, (1, 0, 0))
    par, perp = decompose([3, 4, 0], fr)
    assert par == 3 and np.allclose(perp, [0, 4, 0])
    par, perp = decompose(fr.e, fr)
    assert par == pytest.approx(1) and np.allclose(perp, 0)
    par, perp = decompose([0, 2, 5], fr)
    assert par == 0 and np.allclose(perp, [0, 2, 5])


def test_frame_rejects_zero(z3):
    with pytest.raises(LatticeError):
        DirectionFrame.from_coords(z3, (0, 0, 0))


@given(st.lists(st.floats(-1, 1), min_size=9, max_size=9), st.floats(0.5, 2.5))
def test_ball_negation_closed_and_sorted(entries, cutoff):
    basis = np.eye(3) + 0.3 * np.reshape(entries, (3, 3))
    if abs(np.linalg.det(basis)) < 0.2:
        return
    lat = build_lattice(basis)
    assert lat.biorthogonality_residual() < 1e-12
    coords = integer_ball(lat, TWO_PI * cutoff)
    keys = {tuple(r) for r in coords.tolist()}
    assert all(tuple(-c for c in k) in keys for k in keys)
    assert [tuple(r) for r in coords.tolist()] == sorted(keys)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_decompose_idempotent(x):
    lat = build_lattice(np.eye(3))
    fr = DirectionFrame.from_coords(lat, (1, 1, 0))
    par, perp = decompose(x, fr)
    assert np.allclose(par * fr.e + perp, x)
    par2, perp2 = decompose(perp, fr)
    assert abs(par2) < 1e-9 and np.allclose(perp2, perp)
