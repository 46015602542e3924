"""Clifford generators and the fibered magnetic Dirac operator.

The Dirac fiber is ``D = sum_j alpha_j (-i d_j - A_j + k_j + i kappa e_j)`` on
C^M-valued periodic functions.  Its square is the magnetic fiber tensored
with the identity plus the curvature term
``(i/2) sum_{j != l} (d_j A_l - d_l A_j) alpha_j alpha_l``.

Spinor matrices use basis-major layout: row ``a * M + s`` is plane wave
``a``, spinor component ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .fiber import FiberError, FiberPoint, PlaneWaveBasis, assemble_hamiltonian, g_factors, momenta, multiplication_matrix
from .potential import TrigPolynomial

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

PERP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CliffordRep:
    n: int
    M: int
    alphas: np.ndarray  # (n, M, M)

    def anticommutation_residual(self) -> float:
        eye = np.eye(self.M)
        worst = 0.0
        for j in range(self.n):
            for l in range(self.n):
                anti = self.alphas[j] @ self.alphas[l] + self.alphas[l] @ self.alphas[j]
                worst = max(worst, float(np.max(np.abs(anti - 2.0 * (j == l) * eye))))
        return worst

    def hermiticity_residual(self) -> float:
        return float(max(np.max(np.abs(a - a.conj().T)) for a in self.alphas))

    def contract(self, v) -> np.ndarray:
        """sum_j v_j alpha_j for a (possibly complex) n-vector."""
        return np.tensordot(np.asarray(v), self.alphas, axes=(0, 0))


def _kron(*ms):
    return reduce(np.kron, ms, np.eye(1, dtype=complex))


def clifford_rep(n: int) -> CliffordRep:
    """Hermitian generators of size 2^floor(n/2) from Pauli strings.

    Pair p contributes Z..Z X I..I and Z..Z Y I..I; for odd n the last
    generator is Z..Z.
    """
    if n < 2:
        raise ValueError("Clifford generators need n >= 2")
    q = n // 2
    alphas = []
    for p in range(q):
        head = [SIGMA_Z] * p
        tail = [I2] * (q - p - 1)
        alphas.append(_kron(*head, SIGMA_X, *tail))
        alphas.append(_kron(*head, SIGMA_Y, *tail))
    if n % 2:
        alphas.append(_kron(*([SIGMA_Z] * q)))
    rep = CliffordRep(n, 2**q, np.array(alphas))
    if rep.anticommutation_residual() > 1e-12 or rep.hermiticity_residual() > 1e-12:
        raise RuntimeError("Clifford construction failed its own check")
    return rep


def dirac_symbol(N_cart, fiber: FiberPoint, rep: CliffordRep) -> np.ndarray:
    """sum_j (k_j + 2 pi N_j + i kappa e_j) alpha_j for a Cartesian reciprocal vector N."""
    z = fiber.k + 2 * np.pi * np.asarray(N_cart, dtype=float) + 1j * fiber.kappa * fiber.frame.e
    return rep.contract(z)


def symbol_singular_values(N_cart, fiber: FiberPoint, rep: CliffordRep) -> np.ndarray:
    return np.linalg.svd(dirac_symbol(N_cart, fiber, rep), compute_uv=False)


@dataclass(eq=False)
class SpinorFiberMatrix:
    basis: PlaneWaveBasis
    M: int
    entries: np.ndarray

    def block(self, a: int, b: int) -> np.ndarray:
        M = self.M
        return self.entries[a * M : (a + 1) * M, b * M : (b + 1) * M]

    def __matmul__(self, other):
        if isinstance(other, SpinorFiberMatrix):
            return SpinorFiberMatrix(self.basis, self.M, self.entries @ other.entries)
        return self.entries @ other


def _symbols(basis: PlaneWaveBasis, fiber: FiberPoint, rep: CliffordRep) -> np.ndarray:
    z = momenta(basis, fiber) + 1j * fiber.kappa * fiber.frame.e[None, :]
    return np.einsum("aj,jst->ast", z, rep.alphas)


def _block_diag(blocks: np.ndarray) -> np.ndarray:
    K, M, _ = blocks.shape
    out = np.zeros((K * M, K * M), dtype=complex)
    for a in range(K):
        out[a * M : (a + 1) * M, a * M : (a + 1) * M] = blocks[a]
    return out


def assemble_dirac(A: TrigPolynomial, fiber: FiberPoint, basis: PlaneWaveBasis, rep: CliffordRep) -> SpinorFiberMatrix:
    A.require_real("magnetic potential")
    D = _block_diag(_symbols(basis, fiber, rep))
    for j in range(rep.n):
        D -= np.kron(multiplication_matrix(basis, A, j), rep.alphas[j])
    return SpinorFiberMatrix(basis, rep.M, D)


def curvature_term(A: TrigPolynomial, rep: CliffordRep, basis: PlaneWaveBasis) -> SpinorFiberMatrix:
    """Multiplication by (i/2) sum_{j != l} (d_j A_l - d_l A_j) alpha_j alpha_l."""
    size = len(basis) * rep.M
    out = np.zeros((size, size), dtype=complex)
    for j in range(rep.n):
        for l in range(rep.n):
            if j == l:
                continue
            curl = A.component(l).derivative(j) - A.component(j).derivative(l)
            if len(curl) == 0:
                continue
            out += np.kron(multiplication_matrix(basis, curl), 0.5j * rep.alphas[j] @ rep.alphas[l])
    return SpinorFiberMatrix(basis, rep.M, out)


def _battery(rng: np.random.Generator, mask: np.ndarray, M: int, count: int) -> np.ndarray:
    """Complex Gaussian spinor vectors supported on ``mask``; shape (count, K*M)."""
    K = len(mask)
    vecs = rng.standard_normal((count, K, M)) + 1j * rng.standard_normal((count, K, M))
    vecs[:, ~mask, :] = 0
    return vecs.reshape(count, K * M)


def verify_dirac_square(
    A: TrigPolynomial, fiber: FiberPoint, basis: PlaneWaveBasis, rep: CliffordRep, count: int = 8, seed: int = 0
) -> float:
    """max ||D(D phi) - (H (x) I + B) phi|| / ||phi|| over test vectors on
    modes far enough from the cutoff for both products to be exact."""
    mask = basis.inner_mask(A, reach=2)
    if not mask.any():
        raise FiberError("cutoff too small: no inner modes for the square identity")
    D = assemble_dirac(A, fiber, basis, rep).entries
    zero = TrigPolynomial.zero(basis.lattice)
    H = assemble_hamiltonian(A, zero, fiber, basis).entries
    rhs = np.kron(H, np.eye(rep.M)) + curvature_term(A, rep, basis).entries
    phis = _battery(np.random.default_rng(seed), mask, rep.M, count)
    worst = 0.0
    for phi in phis:
        res = D @ (D @ phi) - rhs @ phi
        worst = max(worst, float(np.linalg.norm(res) / np.linalg.norm(phi)))
    return worst


def transverse_units(basis: PlaneWaveBasis, fiber: FiberPoint) -> np.ndarray:
    """e~(k + 2 pi N) = (k_perp + 2 pi N_perp)/|.|; raises off the set where
    no transverse part vanishes."""
    y = momenta(basis, fiber)
    e = fiber.frame.e
    perp = y - np.outer(y @ e, e)
    norms = np.linalg.norm(perp, axis=1)
    if np.any(norms < PERP_TOL):
        bad = basis.coords[np.argmin(norms)].tolist()
        raise FiberError(f"k not in the admissible set: k_perp + 2 pi N_perp vanishes at N = {bad}")
    return perp / norms[:, None]


def admissible_thomas_k(frame, shift: float = 0.5) -> np.ndarray:
    """k = pi gamma/|gamma|^2 plus a transverse offset with irrational
    coordinates, so that (k, gamma) = pi and no k_perp + 2 pi N_perp vanishes."""
    n = len(frame.e)
    generic = shift * np.sqrt(2.0 + np.arange(n) * (1 + np.sqrt(5.0)) / 2)
    return np.pi * frame.gamma / frame.gamma_norm**2 + frame.perp(generic)


def projection_blocks(basis: PlaneWaveBasis, fiber: FiberPoint, rep: CliffordRep) -> tuple[np.ndarray, np.ndarray]:
    """Per-index M x M projections P^+-, each of shape (K, M, M)."""
    units = transverse_units(basis, fiber)
    ea = rep.contract(fiber.frame.e)
    prod = np.einsum("st,atu->asu", ea, np.einsum("aj,jtu->atu", units, rep.alphas))
    eye = np.eye(rep.M)[None, :, :]
    return 0.5 * (eye - 1j * prod), 0.5 * (eye + 1j * prod)


def projections(fiber: FiberPoint, basis: PlaneWaveBasis, rep: CliffordRep) -> tuple[SpinorFiberMatrix, SpinorFiberMatrix]:
    plus, minus = projection_blocks(basis, fiber, rep)
    return (
        SpinorFiberMatrix(basis, rep.M, _block_diag(plus)),
        SpinorFiberMatrix(basis, rep.M, _block_diag(minus)),
    )


def check_projection_identities(
    fiber: FiberPoint, basis: PlaneWaveBasis, rep: CliffordRep, count: int = 100, seed: int = 0
) -> dict:
    """Residuals of the block identities over ``count`` random (N, u) draws:
    P D_N P = 0 for both signs, ||D_N P u|| = G_N ||P u||, and the algebra
    of P^+- (idempotent, Hermitian, complementary, orthogonal)."""
    plus, minus = projection_blocks(basis, fiber, rep)
    symbols = _symbols(basis, fiber, rep)
    gplus, gminus = g_factors(basis, fiber)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(basis), size=count)
    sandwich = norm_law = algebra = 0.0
    for a in picks:
        u = rng.standard_normal(rep.M) + 1j * rng.standard_normal(rep.M)
        Pp, Pm, S = plus[a], minus[a], symbols[a]
        sandwich = max(sandwich, float(np.max(np.abs(Pp @ S @ Pp))), float(np.max(np.abs(Pm @ S @ Pm))))
        for P, g in ((Pp, gplus[a]), (Pm, gminus[a])):
            pu = P @ u
            norm_law = max(norm_law, abs(np.linalg.norm(S @ pu) - g * np.linalg.norm(pu)) / max(1.0, g * np.linalg.norm(u)))
        algebra = max(
            algebra,
            float(np.max(np.abs(Pp @ Pp - Pp))),
            float(np.max(np.abs(Pp - Pp.conj().T))),
            float(np.max(np.abs(Pp @ Pm))),
            float(np.max(np.abs(Pp + Pm - np.eye(rep.M)))),
        )
    return {"sandwich": sandwich, "norm_law": norm_law, "algebra": algebra, "count": count}


def theorem31_probe(
    A: TrigPolynomial,
    fiber_list,
    basis: PlaneWaveBasis,
    rep: CliffordRep,
    a: float,
    delta: float,
    battery: int = 64,
    seed: int = 0,
) -> dict:
    """Largest c in [0, 1] with

        ||(P^+ + a P^-) D phi||^2 >= (1 - delta) ||(c G_- P^- + a G_+ P^+) phi||^2

    over a seeded battery, per fiber.  The two terms on the right are
    orthogonal, so the bound on c is explicit for each phi.  Rows also carry
    the unclipped bound ``c_raw``; values above one mean the inequality holds
    with room to spare.
    """
    if not 0 < a <= 1 or not 0 < delta < 1:
        raise ValueError("need 0 < a <= 1 and 0 < delta < 1")
    mask = basis.inner_mask(A, reach=1)
    rows = []
    for fiber in fiber_list:
        fiber.require_thomas()
        Pp, Pm = projections(fiber, basis, rep)
        D = assemble_dirac(A, fiber, basis, rep).entries
        gplus, gminus = g_factors(basis, fiber)
        Gp = np.repeat(gplus, rep.M)
        Gm = np.repeat(gminus, rep.M)
        phis = _battery(np.random.default_rng(seed), mask, rep.M, battery)
        raw = []
        for phi in phis:
            Dphi = D @ phi
            lhs = np.linalg.norm(Pp.entries @ Dphi + a * (Pm.entries @ Dphi)) ** 2
            u = np.linalg.norm(Gm * (Pm.entries @ phi)) ** 2
            v = a**2 * np.linalg.norm(Gp * (Pp.entries @ phi)) ** 2
            room = lhs / (1 - delta) - v
            raw.append(np.inf if u == 0 else float(np.sqrt(max(room, 0.0) / u)))
        c_raw = min(raw)
        rows.append({"kappa": fiber.kappa, "k": fiber.k.tolist(), "c": float(min(c_raw, 1.0)),
                     "c_raw": c_raw if np.isfinite(c_raw) else None})
    return {"a": a, "delta": delta, "battery": battery, "seed": seed, "rows": rows,
            "c_envelope": float(min(r["c"] for r in rows))}
