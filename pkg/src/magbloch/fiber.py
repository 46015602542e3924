"""Plane-wave matrices of the Bloch fibers at complex quasimomentum.

The basis functions exp(2 pi i (N, x)) / sqrt(v(K)) are orthonormal, so
coefficient l2 norms are L2(K) norms and multiplication by a periodic field
f is the Toeplitz-like matrix ``f_{N - N'}``.

At quasimomentum k + i kappa e the magnetic fiber is
``sum_j (-i d_j - A_j + k_j + i kappa e_j)^2`` whose matrix is

    M[N, N'] = delta_{N N'} z_N . z_N - A_{N-N'} . (z_N + z_N') + (A.A)_{N-N'} + V_{N-N'}

with ``z_N = k + 2 pi N + i kappa e`` and the dot products bilinear (no
conjugation).
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import TWO_PI, DirectionFrame, Lattice, integer_ball
from .potential import FieldError, TrigPolynomial

THOMAS_TOL = 1e-12


class FiberError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FiberPoint:
    """Complex quasimomentum k + i kappa e with e the unit vector of ``frame``."""

    k: np.ndarray
    kappa: float
    frame: DirectionFrame

    def __post_init__(self):
        object.__setattr__(self, "k", np.asarray(self.k, dtype=float))
        if self.kappa < 0:
            raise FiberError("kappa must be nonnegative")

    @classmethod
    def thomas(cls, frame: DirectionFrame, kappa: float, k=None) -> "FiberPoint":
        """Fiber on the face |(k, gamma)| = pi; defaults to k = pi gamma / |gamma|^2."""
        if k is None:
            k = np.pi * frame.gamma / frame.gamma_norm**2
        pt = cls(np.asarray(k, dtype=float), float(kappa), frame)
        pt.require_thomas()
        return pt

    @property
    def z(self) -> np.ndarray:
        return self.k + 1j * self.kappa * self.frame.e

    @property
    def on_thomas_face(self) -> bool:
        return abs(abs(float(self.k @ self.frame.gamma)) - np.pi) <= THOMAS_TOL * max(1.0, np.pi)

    def require_thomas(self) -> None:
        if not self.on_thomas_face:
            raise FiberError(
                f"quasimomentum violates |(k, gamma)| = pi: got {abs(float(self.k @ self.frame.gamma)):.15g}"
            )

    def with_kappa(self, kappa: float) -> "FiberPoint":
        return FiberPoint(self.k, float(kappa), self.frame)


class PlaneWaveBasis:
    """Reciprocal indices with |2 pi N| <= cutoff in lexicographic order."""

    def __init__(self, lattice: Lattice, cutoff: float, coords=None):
        self.lattice = lattice
        self.cutoff = float(cutoff)
        if coords is None:
            coords = integer_ball(lattice, cutoff)
        self.coords = np.asarray(coords, dtype=np.int64)
        self.coords.setflags(write=False)
        self.cart = lattice.cartesian(self.coords)
        self._offset = int(np.max(np.abs(self.coords))) if len(self.coords) else 0
        self._keys = self._encode(self.coords)
        self._order = np.argsort(self._keys)
        self.index_of = {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def n(self) -> int:
        return self.lattice.n

    def _encode(self, coords: np.ndarray) -> np.ndarray:
        base = 4 * self._offset + 3
        shifted = coords + 2 * self._offset + 1
        out = np.zeros(len(coords), dtype=np.int64)
        for j in range(coords.shape[1]):
            out = out * base + shifted[:, j]
        return out

    def lookup(self, coords) -> np.ndarray:
        """Basis positions of ``coords`` rows, -1 where absent."""
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        inside = np.all(np.abs(coords) <= 2 * self._offset + 1, axis=1)
        keys = self._encode(np.where(inside[:, None], coords, 0))
        pos = np.searchsorted(self._keys[self._order], keys)
        pos = np.clip(pos, 0, len(self._keys) - 1)
        found = self._order[pos]
        ok = inside & (self._keys[found] == keys)
        return np.where(ok, found, -1)

    def shift(self, t) -> np.ndarray:
        """For every basis index N, the position of N + t (or -1)."""
        return self.lookup(self.coords + np.asarray(t, dtype=np.int64))

    def inner_mask(self, *fields: TrigPolynomial, reach: int = 2) -> np.ndarray:
        """Indices N with N + t_1 + ... + t_reach inside the basis for all
        modes t_i of the fields (and t_i = 0).

        Products of ``reach`` truncated multiplication operators agree with
        the untruncated product on vectors supported there.
        """
        steps = [np.zeros((1, self.n), dtype=np.int64)] + [f.coords for f in fields if len(f)]
        support = np.unique(np.concatenate(steps), axis=0)
        reachable = np.zeros((1, self.n), dtype=np.int64)
        for _ in range(reach):
            reachable = np.unique((reachable[:, None, :] + support[None, :, :]).reshape(-1, self.n), axis=0)
        ok = np.ones(len(self), dtype=bool)
        for t in reachable:
            ok &= self.shift(t) >= 0
        return ok

    def ket(self, mapping) -> np.ndarray:
        """Coefficient vector from {coords: value}."""
        vec = np.zeros(len(self), dtype=complex)
        for key, val in mapping.items():
            vec[self.index_of[tuple(key)]] = val
        return vec


@dataclass(eq=False)
class FiberMatrix:
    basis: PlaneWaveBasis
    entries: np.ndarray
    hermitian: bool
    block: int = 1
    notes: list = field(default_factory=list)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) if self.entries.size else 0.0

    def __matmul__(self, other):
        if isinstance(other, FiberMatrix):
            return FiberMatrix(self.basis, self.entries @ other.entries, False, self.block)
        return self.entries @ other

    # binary dump: magic, version, rows, cols, block, hermitian flag, then
    # row-major (re, im) float64 pairs, all little-endian
    _HEADER = struct.Struct("<8sIQQII")

    def dump(self, path) -> None:
        rows, cols = self.entries.shape
        head = self._HEADER.pack(b"FIBERMAT", 1, rows, cols, self.block, int(self.hermitian))
        body = np.ascontiguousarray(self.entries, dtype="<c16").tobytes()
        Path(path).write_bytes(head + body)

    @staticmethod
    def load_entries(path) -> tuple[np.ndarray, dict]:
        raw = Path(path).read_bytes()
        magic, version, rows, cols, block, herm = FiberMatrix._HEADER.unpack_from(raw)
        if magic != b"FIBERMAT":
            raise FiberError(f"{path}: not a fiber matrix dump")
        data = np.frombuffer(raw, dtype="<c16", offset=FiberMatrix._HEADER.size).reshape(rows, cols)
        return data.copy(), {"version": version, "block": block, "hermitian": bool(herm)}


def momenta(basis: PlaneWaveBasis, fiber: FiberPoint) -> np.ndarray:
    """Real parts k + 2 pi N for every basis index."""
    return fiber.k[None, :] + TWO_PI * basis.cart


def g_factors(basis: PlaneWaveBasis, fiber: FiberPoint) -> tuple[np.ndarray, np.ndarray]:
    """G^+-_N = (|k_par + 2 pi N_par|^2 + (kappa +- |k_perp + 2 pi N_perp|)^2)^(1/2)."""
    y = momenta(basis, fiber)
    par = y @ fiber.frame.e
    perp = np.linalg.norm(y - np.outer(par, fiber.frame.e), axis=1)
    kap = fiber.kappa
    gplus = np.sqrt(par**2 + (kap + perp) ** 2)
    gminus = np.sqrt(par**2 + (kap - perp) ** 2)
    if fiber.on_thomas_face:
        floor = np.pi / fiber.frame.gamma_norm
        if np.any(gminus < floor - 1e-12 * max(1.0, floor)):
            raise FiberError("G^- fell below pi/|gamma| on the Thomas face")
        prod = gplus * gminus
        bound = 2 * np.pi * kap / fiber.frame.gamma_norm
        if np.any(prod < bound * (1 - 1e-12) - 1e-12):
            raise FiberError("G^+ G^- fell below 2 pi kappa/|gamma| on the Thomas face")
    return gplus, gminus


def complex_square(basis: PlaneWaveBasis, fiber: FiberPoint) -> np.ndarray:
    """(k + 2 pi N + i kappa e)^2 = |y|^2 - kappa^2 + 2 i kappa (y, e)."""
    y = momenta(basis, fiber)
    return np.sum(y * y, axis=1) - fiber.kappa**2 + 2j * fiber.kappa * (y @ fiber.frame.e)


def multiplication_matrix(basis: PlaneWaveBasis, f: TrigPolynomial, component: int = 0) -> np.ndarray:
    """Galerkin matrix of multiplication by one component of ``f``."""
    out = np.zeros((len(basis), len(basis)), dtype=complex)
    cols = np.arange(len(basis))
    for t, val in zip(f.coords, f.values[:, component]):
        rows = basis.shift(t)
        ok = rows >= 0
        out[rows[ok], cols[ok]] += val
    return out


def _truncation_notes(basis: PlaneWaveBasis, *fields: TrigPolynomial) -> list[str]:
    notes = []
    for f in fields:
        if f.degree > basis.cutoff:
            notes.append(f"field degree {f.degree:.6g} exceeds basis cutoff {basis.cutoff:.6g}")
    return notes


def assemble_hamiltonian(A: TrigPolynomial, V: TrigPolynomial, fiber: FiberPoint, basis: PlaneWaveBasis) -> FiberMatrix:
    """Galerkin matrix of the magnetic fiber plus V (see module doc)."""
    A.require_real("magnetic potential")
    V.require_real("electric potential")
    if A.d != basis.n or V.d != 1:
        raise FieldError(f"A needs {basis.n} components and V one, got {A.d} and {V.d}")
    AA = A.dot(A)
    notes = _truncation_notes(basis, A, AA, V)
    for note in notes:
        warnings.warn(note, stacklevel=2)
    z = fiber.k[None, :] + TWO_PI * basis.cart + 1j * fiber.kappa * fiber.frame.e[None, :]
    M = np.diag(complex_square(basis, fiber)).astype(complex)
    cols = np.arange(len(basis))
    for t, a in zip(A.coords, A.values):
        rows = basis.shift(t)
        ok = rows >= 0
        r, c = rows[ok], cols[ok]
        M[r, c] -= (z[r] + z[c]) @ a
    M += multiplication_matrix(basis, AA) + multiplication_matrix(basis, V)
    return FiberMatrix(basis, M, hermitian=fiber.kappa == 0, notes=notes)


def form_eval(A, V, fiber: FiberPoint, psi, phi, basis: PlaneWaveBasis) -> complex:
    """Sesquilinear form psi^dagger M phi (antilinear in psi)."""
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if psi.shape != (len(basis),) or phi.shape != (len(basis),):
        raise FiberError(f"coefficient vectors must have length {len(basis)}")
    M = assemble_hamiltonian(A, V, fiber, basis).entries
    return complex(np.vdot(psi, M @ phi))


def diagonal_power(basis: PlaneWaveBasis, fiber: FiberPoint, sign: str, zeta: complex = 1.0) -> FiberMatrix:
    """Diagonal multiplier (G^sign_N)^zeta; ``sign='L'`` gives (G^+ G^-)^zeta."""
    gplus, gminus = g_factors(basis, fiber)
    base = {"+": gplus, "-": gminus, "L": gplus * gminus}.get(sign)
    if base is None:
        raise FiberError(f"sign must be '+', '-' or 'L', got {sign!r}")
    if np.any(base == 0):
        raise FiberError("G vanishes at some index; complex powers undefined")
    vals = base.astype(complex) ** zeta if np.iscomplexobj(zeta) or isinstance(zeta, complex) else base**zeta
    return FiberMatrix(basis, np.diag(vals), hermitian=np.isrealobj(vals))


@dataclass
class ShellPartition:
    h: float
    l: int
    m: int
    shells: dict[int, np.ndarray]
    complement: np.ndarray

    def labels(self, size: int) -> np.ndarray:
        """Shell number per basis index, -1 for the complement."""
        out = np.full(size, -2, dtype=np.int64)
        for j, idx in self.shells.items():
            out[idx] = j
        out[self.complement] = -1
        return out


def shell_parameters(kappa: float, reciprocal_diameter: float) -> tuple[float, int, int]:
    """h in [2, 4) and integer l >= 2 with h^l = kappa/2, and the smallest m
    with h^m >= pi diam K*.  l is the largest admissible exponent, which
    makes h the smallest admissible base."""
    threshold = max(8.0, 4 * np.pi * reciprocal_diameter)
    if kappa < threshold:
        raise FiberError(f"kappa = {kappa} is below the shell threshold {threshold:.6g}")
    half = kappa / 2
    l = int(math.floor(math.log2(half) + 1e-12))
    h = half ** (1.0 / l)
    if h < 2:  # log2 rounding
        l -= 1
        h = half ** (1.0 / l)
    target = np.pi * reciprocal_diameter
    m = max(1, int(math.ceil(math.log(target) / math.log(h) - 1e-12)))
    while h**m < target:
        m += 1
    return h, l, m


def shell_partition(basis: PlaneWaveBasis, fiber: FiberPoint, kappa: float | None = None) -> ShellPartition:
    if kappa is not None and kappa != fiber.kappa:
        fiber = fiber.with_kappa(kappa)
    h, l, m = shell_parameters(fiber.kappa, basis.lattice.reciprocal_diameter)
    _, gminus = g_factors(basis, fiber)
    shells = {m: np.flatnonzero(gminus <= h**m)}
    for j in range(m + 1, l + 1):
        shells[j] = np.flatnonzero((gminus > h ** (j - 1)) & (gminus <= h**j))
    complement = np.flatnonzero(gminus > h**l)
    return ShellPartition(h, l, m, shells, complement)
