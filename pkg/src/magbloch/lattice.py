"""Period and reciprocal lattices, truncated reciprocal index sets, and the
parallel/transverse split relative to a lattice direction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

#: Upper bound on the number of reciprocal indices a cutoff may produce.
MAX_INDICES = 200_000


class LatticeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Lattice:
    """A Bravais lattice in R^n.

    ``basis`` holds the period vectors as rows, ``reciprocal_basis`` the dual
    vectors E*_j with (E*_j, E_l) = delta_jl (no 2*pi factor).
    """

    basis: np.ndarray
    reciprocal_basis: np.ndarray
    cell_volume: float
    reciprocal_cell_volume: float
    reciprocal_diameter: float

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def cartesian(self, coords) -> np.ndarray:
        """Cartesian position of reciprocal vectors with integer ``coords``."""
        return np.asarray(coords, dtype=float) @ self.reciprocal_basis

    def lattice_vector(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self.basis

    def to_fractional(self, x) -> np.ndarray:
        """Coordinates of ``x`` in the period basis, s with x = s @ basis."""
        return np.asarray(x, dtype=float) @ self.reciprocal_basis.T

    def biorthogonality_residual(self) -> float:
        gram = self.reciprocal_basis @ self.basis.T
        return float(np.max(np.abs(gram - np.eye(self.n))))


@dataclass(frozen=True)
class ReciprocalIndex:
    coords: tuple[int, ...]
    cartesian: np.ndarray = field(compare=False, repr=False)

    def __neg__(self) -> "ReciprocalIndex":
        return ReciprocalIndex(tuple(-c for c in self.coords), -self.cartesian)


@dataclass(frozen=True, eq=False)
class DirectionFrame:
    """Lattice direction gamma with unit vector e = gamma/|gamma|."""

    coords: tuple[int, ...]
    gamma: np.ndarray
    e: np.ndarray
    gamma_norm: float

    @classmethod
    def from_coords(cls, lat: Lattice, coords) -> "DirectionFrame":
        coords = tuple(int(c) for c in coords)
        if len(coords) != lat.n:
            raise LatticeError(f"gamma needs {lat.n} coordinates, got {len(coords)}")
        if not any(coords):
            raise LatticeError("gamma must be a nonzero lattice vector")
        gamma = lat.lattice_vector(coords)
        norm = float(np.linalg.norm(gamma))
        return cls(coords, gamma, gamma / norm, norm)

    def par(self, x) -> np.ndarray:
        """Component along e (last axis of ``x``)."""
        return np.asarray(x, dtype=float) @ self.e

    def perp(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x - np.multiply.outer(x @ self.e, self.e)


def build_lattice(basis) -> Lattice:
    basis = np.array(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise LatticeError(f"basis must be n x n, got shape {basis.shape}")
    if basis.shape[0] < 2:
        raise LatticeError("dimension must be at least 2")
    scale = np.prod(np.linalg.norm(basis, axis=1))
    det = np.linalg.det(basis)
    if scale == 0 or abs(det) < 1e-12 * scale:
        raise LatticeError("degenerate lattice: basis vectors are linearly dependent")
    # (E*_j, E_l) = delta_jl  <=>  E* = inv(E)^T with vectors stored as rows
    recip = np.linalg.inv(basis).T
    vol = abs(det)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=basis.shape[0])))
    # vertex differences of the cell spanned by E*_j are sum_j s_j E*_j, s_j in {-1,0,1};
    # the norm is convex in s so the maximum sits at s in {-1,1}^n
    diam = float(np.max(np.linalg.norm(signs @ recip, axis=1)))
    return Lattice(basis, recip, float(vol), float(1.0 / vol), diam)


def decompose(x, frame: DirectionFrame) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    par = float(x @ frame.e)
    return par, x - par * frame.e


def integer_ball(lat: Lattice, cutoff: float, max_count: int = MAX_INDICES) -> np.ndarray:
    """Integer coordinate rows m with |2 pi sum_j m_j E*_j| <= cutoff, sorted
    lexicographically."""
    if cutoff <= 0:
        raise LatticeError("cutoff must be positive")
    # |m_j| = |(x, E_j)| <= |x| |E_j|
    bounds = np.floor(cutoff / TWO_PI * np.linalg.norm(lat.basis, axis=1) + 1e-9).astype(int)
    box = int(np.prod(2 * bounds + 1))
    if box > 50 * max_count:
        raise LatticeError(f"basis too large: search box has {box} points")
    axes = [np.arange(-b, b + 1) for b in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lat.n)
    norms = TWO_PI * np.linalg.norm(grid @ lat.reciprocal_basis, axis=1)
    keep = grid[norms <= cutoff * (1 + 1e-12)]
    if len(keep) > max_count:
        raise LatticeError(f"basis too large: {len(keep)} indices exceed cap {max_count}")
    # meshgrid with indexing="ij" over ascending axes is already lexicographic
    return keep


def enumerate_indices(lat: Lattice, cutoff: float, max_count: int = MAX_INDICES) -> list[ReciprocalIndex]:
    coords = integer_ball(lat, cutoff, max_count)
    cart = lat.cartesian(coords)
    return [ReciprocalIndex(tuple(int(c) for c in row), cart[i]) for i, row in enumerate(coords)]
