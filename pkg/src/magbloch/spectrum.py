"""Band functions along Brillouin-zone paths and the complex-quasimomentum
invertibility probe."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .fiber import FiberError, FiberPoint, PlaneWaveBasis, assemble_hamiltonian, complex_square, g_factors
from .lattice import TWO_PI, DirectionFrame, Lattice
from .potential import TrigPolynomial


def pmap(fn, items, workers: int = 1) -> list:
    """Ordered map, threaded when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def path_from_fractional(lat: Lattice, fractions) -> np.ndarray:
    """Quasimomenta 2 pi sum_j f_j E*_j for fractional coordinates f."""
    return TWO_PI * np.atleast_2d(np.asarray(fractions, dtype=float)) @ lat.reciprocal_basis


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass
class BandStructure:
    path: np.ndarray
    bands: np.ndarray  # (len(path), basis size), ascending per row
    cutoff: float
    basis_size: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k_index,j,lambda\n")
        for i, row in enumerate(self.bands):
            for j, lam in enumerate(row, 1):
                buf.write(f"{i},{j},{fmt(lam)}\n")
        return buf.getvalue()


def _default_frame(lat: Lattice) -> DirectionFrame:
    return DirectionFrame.from_coords(lat, (1,) + (0,) * (lat.n - 1))


def band_structure(A: TrigPolynomial, V: TrigPolynomial, basis: PlaneWaveBasis, path, workers: int = 1) -> BandStructure:
    """Sorted eigenvalues of the Hermitian fiber matrix at each real k."""
    path = np.atleast_2d(np.asarray(path, dtype=float))
    frame = _default_frame(basis.lattice)

    def one(k):
        M = assemble_hamiltonian(A, V, FiberPoint(k, 0.0, frame), basis).entries
        M = 0.5 * (M + M.conj().T)
        try:
            return linalg.eigvalsh(M)
        except linalg.LinAlgError as exc:
            raise FiberError(f"eigensolver failed at k = {k.tolist()}: {exc}") from exc

    bands = np.array(pmap(one, path, workers))
    return BandStructure(path, bands, basis.cutoff, len(basis))


def flat_band_scan(bs: BandStructure, tol: float) -> dict:
    """Oscillation max_k lambda_j - min_k lambda_j of every band; bands below
    ``tol`` are flagged."""
    if len(bs.path) < 2:
        raise ValueError("flat-band scan needs at least two path points")
    osc = bs.bands.max(axis=0) - bs.bands.min(axis=0)
    spread = float(np.max(np.ptp(bs.path, axis=0)))
    return {
        "tol": tol,
        "oscillation": osc.tolist(),
        "flagged": [int(j) + 1 for j in np.flatnonzero(osc < tol)],
        "degenerate_path": spread == 0.0,
    }


@dataclass
class ThomasProbeReport:
    lam: float
    gamma: tuple[int, ...]
    k: list[float]
    kappas: list[float]
    s_min: list[float]
    notes: list[str] = field(default_factory=list)

    @property
    def tail_min(self) -> float:
        half = len(self.s_min) // 2
        return float(min(self.s_min[half:]))

    def to_csv(self) -> str:
        lines = ["kappa,s_min"] + [f"{fmt(k)},{fmt(s)}" for k, s in zip(self.kappas, self.s_min)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "gamma": list(self.gamma),
            "k": self.k,
            "kappa": self.kappas,
            "s_min": self.s_min,
            "tail_min": self.tail_min,
        }


def weighted_operator(M: np.ndarray, basis: PlaneWaveBasis, fiber: FiberPoint) -> np.ndarray:
    """L^{-1/2} M L^{-1/2} with L = G^+ G^- diagonal."""
    gplus, gminus = g_factors(basis, fiber)
    w = (gplus * gminus) ** -0.5
    return w[:, None] * M * w[None, :]


def smallest_singular_value(M: np.ndarray) -> float:
    return float(linalg.svdvals(M)[-1])


def thomas_probe(
    A: TrigPolynomial,
    V: TrigPolynomial,
    lam: float,
    frame: DirectionFrame,
    basis: PlaneWaveBasis,
    kappa_list,
    k_choice=None,
    workers: int = 1,
) -> ThomasProbeReport:
    """s_min(kappa) of L^{-1/2} (H(A; k + i kappa e) + V - lam) L^{-1/2}."""
    kappas = [float(k) for k in kappa_list]
    if any(k <= 0 for k in kappas) or kappas != sorted(kappas):
        raise FiberError("kappa_list must be positive and ascending")
    base = FiberPoint.thomas(frame, kappas[0], k_choice)

    def one(kappa):
        fiber = base.with_kappa(kappa)
        M = assemble_hamiltonian(A, V, fiber, basis).entries - lam * np.eye(len(basis))
        return smallest_singular_value(weighted_operator(M, basis, fiber))

    s = pmap(one, kappas, workers)
    return ThomasProbeReport(float(lam), frame.coords, base.k.tolist(), kappas, [float(v) for v in s])


def free_thomas_closed_form(lam: float, frame: DirectionFrame, basis: PlaneWaveBasis, kappa: float, k_choice=None) -> float:
    """min_N |z_N^2 - lam| / (G^+_N G^-_N): the free operator is diagonal."""
    fiber = FiberPoint.thomas(frame, kappa, k_choice)
    gplus, gminus = g_factors(basis, fiber)
    return float(np.min(np.abs(complex_square(basis, fiber) - lam) / (gplus * gminus)))
