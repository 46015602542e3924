"""Empirical ratio probes for the operator inequalities behind the
complex-quasimomentum argument.

Every probe draws a seeded battery of coefficient vectors, evaluates both
sides of an inequality on the truncated space and reports the extreme ratio
(the empirical constant).  Vectors are restricted to modes where the
multiplication operators involved are untruncated.  A few unit vectors at
the most dangerous modes (smallest weight) lead the battery so that
extremal cases are not left to chance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fiber import FiberError, FiberPoint, PlaneWaveBasis, assemble_hamiltonian, g_factors, momenta, multiplication_matrix
from .lattice import TWO_PI, DirectionFrame, Lattice
from .potential import SampledField, TrigPolynomial, directional_norm, weak_norm
from .spectrum import smallest_singular_value, weighted_operator

MIN_BATTERY = 32
UNIT_MODES = 4


@dataclass
class RatioReport:
    probe: str
    params: dict
    curve: list = field(default_factory=list)
    max_ratio: float = 0.0
    min_ratio: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "probe": self.probe,
            "params": self.params,
            "curve": self.curve,
            "max_ratio": self.max_ratio,
            "min_ratio": self.min_ratio,
            "checks": self.checks,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def battery_vectors(mask: np.ndarray, weight: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` vectors on ``mask``: unit vectors at the smallest weights,
    then complex Gaussians."""
    if count < MIN_BATTERY:
        raise ValueError(f"battery size must be at least {MIN_BATTERY}")
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise FiberError("no admissible modes for the battery")
    units = idx[np.argsort(weight[idx], kind="stable")[: min(UNIT_MODES, len(idx))]]
    out = np.zeros((count, len(mask)), dtype=complex)
    for i, a in enumerate(units):
        out[i, a] = 1.0
    rest = count - len(units)
    noise = rng.standard_normal((rest, len(idx))) + 1j * rng.standard_normal((rest, len(idx)))
    out[len(units) :, idx] = noise
    return out


def _monotone(values, increasing: bool, slack: float = 0.0) -> bool:
    for a, b in zip(values, values[1:]):
        if increasing and b < a * (1 - slack) - 1e-14:
            return False
        if not increasing and b > a * (1 + slack) + 1e-14:
            return False
    return True


# weighted multiplier bound ------------------------------------------------------


def probe_thm12(
    W_samples: SampledField,
    W_poly: TrigPolynomial,
    frame: DirectionFrame,
    basis: PlaneWaveBasis,
    kappa_list,
    battery: int = 64,
    seed: int = 0,
    k_choice=None,
    slack: float = 0.10,
) -> RatioReport:
    """max ||W phi|| / (||W||_{n,w} ||L^{1/2} phi||) per kappa.

    Also checks the bounded-W estimate ||W phi|| <= (|gamma|/(2 pi kappa))^{1/2}
    ||W||_inf ||L^{1/2} phi|| which holds exactly on the truncation.
    """
    n = basis.n
    wnorm = weak_norm(W_samples, n)
    winf = float(np.max(np.abs(W_samples.samples)))
    mask = basis.inner_mask(W_poly, reach=1)
    Wm = multiplication_matrix(basis, W_poly)
    curve, ok_gamma = [], True
    for kappa in kappa_list:
        fiber = FiberPoint.thomas(frame, kappa, k_choice)
        gplus, gminus = g_factors(basis, fiber)
        lhalf = np.sqrt(gplus * gminus)
        phis = battery_vectors(mask, lhalf, battery, np.random.default_rng(seed))
        num = np.linalg.norm(phis @ Wm.T, axis=1)
        den = np.linalg.norm(phis * lhalf, axis=1)
        plain = num / den
        ratio = plain / wnorm if wnorm > 0 else np.zeros_like(plain)
        bound = np.sqrt(frame.gamma_norm / (TWO_PI * kappa)) * winf
        ok_gamma &= bool(np.all(plain <= bound * (1 + 1e-12) + 1e-15))
        curve.append({"kappa": float(kappa), "max_ratio": float(ratio.max()), "gamma_bound": float(bound / wnorm) if wnorm else 0.0})
    maxes = [c["max_ratio"] for c in curve]
    return RatioReport(
        "thm12",
        {"kappa": [float(k) for k in kappa_list], "battery": battery, "seed": seed, "cutoff": basis.cutoff,
         "weak_norm": wnorm, "gamma": list(frame.coords)},
        curve,
        max(maxes),
        min(maxes),
        {"finite": bool(np.all(np.isfinite(maxes))), "gamma_bound": ok_gamma,
         "non_increasing": _monotone(maxes, increasing=False, slack=slack)},
    )


# directional relative bound -----------------------------------------------------


def probe_lemma11(
    V: TrigPolynomial,
    frame: DirectionFrame,
    basis: PlaneWaveBasis,
    k_list,
    epsilon_list,
    battery: int = 64,
    seed: int = 0,
) -> RatioReport:
    """Smallest C_eps with
    ||V phi|| <= ||V||_{2,gamma} (eps v(K)^{1/2} ||(k_par + 2 pi N_par) phi|| + C_eps ||phi||)."""
    vnorm = directional_norm(V, frame, 2)
    mask = basis.inner_mask(V, reach=1)
    Vm = multiplication_matrix(basis, V)
    eps = [float(e) for e in epsilon_list]
    best = np.zeros(len(eps))
    for k in np.atleast_2d(np.asarray(k_list, dtype=float)):
        par = np.abs(momenta(basis, FiberPoint(k, 0.0, frame)) @ frame.e)
        phis = battery_vectors(mask, par, battery, np.random.default_rng(seed))
        size = np.linalg.norm(phis, axis=1)
        lhs = np.linalg.norm(phis @ Vm.T, axis=1) / vnorm if vnorm > 0 else np.zeros(len(phis))
        grad = np.sqrt(basis.lattice.cell_volume) * np.linalg.norm(phis * par, axis=1)
        for i, e in enumerate(eps):
            best[i] = max(best[i], float(np.max(np.clip(lhs - e * grad, 0.0, None) / size)))
    curve = [{"epsilon": e, "C": float(c)} for e, c in zip(eps, best)]
    order = np.argsort(eps, kind="stable")
    return RatioReport(
        "lemma11",
        {"epsilon": eps, "battery": battery, "seed": seed, "cutoff": basis.cutoff,
         "directional_norm": vnorm, "gamma": list(frame.coords)},
        curve,
        float(best.max()),
        float(best.min()),
        {"finite": bool(np.all(np.isfinite(best))), "non_increasing": _monotone(list(best[order]), increasing=False)},
    )


# annulus Bernstein estimate -----------------------------------------------------


def annulus_mask(basis: PlaneWaveBasis, fiber: FiberPoint, a: float) -> np.ndarray:
    """N with |kappa - |k_perp + 2 pi N_perp|| <= a and |k_par + 2 pi N_par| <= a."""
    y = momenta(basis, fiber)
    par = y @ fiber.frame.e
    perp = np.linalg.norm(y - np.outer(par, fiber.frame.e), axis=1)
    return (np.abs(fiber.kappa - perp) <= a) & (np.abs(par) <= a)


def annulus_cutoff(fiber: FiberPoint, a: float) -> float:
    """A basis cutoff that contains the whole annulus set."""
    return float(np.linalg.norm(fiber.k) + np.hypot(a, fiber.kappa + a)) + 1e-9


def _lq_norms(lat: Lattice, coords: np.ndarray, coeffs: np.ndarray, q: float) -> np.ndarray:
    """(int_K |F|^q)^(1/q) for F = sum_N F_N exp(2 pi i (N, x)), one per row of ``coeffs``.

    The grid holds ceil(q) * max|coord| + 1 points per axis (at least four
    times the Nyquist count), exact for even integer q.
    """
    top = np.max(np.abs(coords), axis=0)
    shape = tuple(int(max(int(np.ceil(q)) * t + 1, 4 * (2 * t + 1))) for t in top)
    idx = tuple(coords[:, i] % shape[i] for i in range(lat.n))
    out = []
    for row in coeffs:
        spec = np.zeros(shape, dtype=complex)
        np.add.at(spec, idx, row)
        vals = np.fft.ifftn(spec) * np.prod(shape)
        out.append((lat.cell_volume * np.mean(np.abs(vals) ** q)) ** (1.0 / q))
    return np.array(out)


def probe_bernstein(basis: PlaneWaveBasis, fiber: FiberPoint, a: float, battery: int = 64, seed: int = 0) -> RatioReport:
    """max ||F||_{L^q(K)} / (a^{1/2+1/n} kappa^{1/2-1/n} ||F||_{L^2(K)}) over F
    supported on the annulus set, q = 2n/(n-2)."""
    lat = basis.lattice
    n = lat.n
    if n < 3:
        raise ValueError("the annulus estimate needs n >= 3")
    diam = lat.reciprocal_diameter
    kappa = fiber.kappa
    if kappa < 4 * np.pi * diam:
        raise FiberError(f"kappa must be at least 4 pi diam K* = {4 * np.pi * diam:.6g}")
    if not np.pi * diam <= a <= kappa / 2:
        raise FiberError(f"a must lie in [pi diam K*, kappa/2] = [{np.pi * diam:.6g}, {kappa / 2:.6g}]")
    if basis.cutoff < annulus_cutoff(fiber, a):
        raise FiberError("basis does not cover the annulus set; use annulus_cutoff()")
    q = 2 * n / (n - 2)
    mask = annulus_mask(basis, fiber, a)
    params = {"kappa": kappa, "a": a, "q": q, "battery": battery, "seed": seed, "modes": int(mask.sum())}
    if not mask.any():
        return RatioReport("bernstein", params, [], 0.0, 0.0, {"nonempty": False})
    coords = basis.coords[mask]
    rng = np.random.default_rng(seed)
    vecs = battery_vectors(np.ones(len(coords), dtype=bool), np.zeros(len(coords)), battery, rng)
    lq = _lq_norms(lat, coords, vecs, q)
    l2 = np.sqrt(lat.cell_volume) * np.linalg.norm(vecs, axis=1)
    scale = a ** (0.5 + 1.0 / n) * kappa ** (0.5 - 1.0 / n)
    ratio = lq / (scale * l2)
    return RatioReport(
        "bernstein", params, [float(r) for r in ratio], float(ratio.max()), float(ratio.min()),
        {"nonempty": True, "finite": bool(np.all(np.isfinite(ratio)))},
    )


# relative form bound ------------------------------------------------------------


def probe_relative_bound(A: TrigPolynomial, basis: PlaneWaveBasis, epsilon_list, battery: int = 64, seed: int = 0) -> RatioReport:
    """Smallest C_eps with || |A| phi || <= eps (sum_j ||d_j phi||^2)^{1/2} + C_eps ||phi|| at k = 0."""
    mask = basis.inner_mask(A, reach=1)
    mats = [multiplication_matrix(basis, A, j) for j in range(A.d)]
    freq = TWO_PI * np.linalg.norm(basis.cart, axis=1)
    phis = battery_vectors(mask, freq, battery, np.random.default_rng(seed))
    size = np.linalg.norm(phis, axis=1)
    lhs = np.sqrt(sum(np.linalg.norm(phis @ m.T, axis=1) ** 2 for m in mats))
    grad = np.linalg.norm(phis * freq, axis=1)
    eps = [float(e) for e in epsilon_list]
    best = np.array([float(np.max(np.clip(lhs - e * grad, 0.0, None) / size)) for e in eps])
    order = np.argsort(eps, kind="stable")
    return RatioReport(
        "relative_bound",
        {"epsilon": eps, "battery": battery, "seed": seed, "cutoff": basis.cutoff},
        [{"epsilon": e, "C": float(c)} for e, c in zip(eps, best)],
        float(best.max()),
        float(best.min()),
        {"finite": bool(np.all(np.isfinite(best))), "non_increasing": _monotone(list(best[order]), increasing=False)},
    )


# weighted inf-sup -----------------------------------------------------------------


def probe_thm11(
    A: TrigPolynomial,
    V1: TrigPolynomial,
    V2: TrigPolynomial,
    lam: float,
    frame: DirectionFrame,
    basis: PlaneWaveBasis,
    kappa_list,
    battery: int = 64,
    seed: int = 0,
    k_choice=None,
) -> RatioReport:
    """inf_phi sup_psi |W(psi, phi)| / ||L^{1/2} phi|| over ||L^{1/2} psi|| <= 1,
    which on the truncation is s_min(L^{-1/2} (M - lam) L^{-1/2}).

    The sup over psi is attained at psi = L^{-1/2} w/|w| with w = L^{-1/2} M phi;
    the probe evaluates the form there and compares it with |w|.
    """
    V = V1 + V2
    rng_seed = seed
    curve, sup_residual = [], 0.0
    for kappa in kappa_list:
        fiber = FiberPoint.thomas(frame, kappa, k_choice)
        M = assemble_hamiltonian(A, V, fiber, basis).entries - lam * np.eye(len(basis))
        gplus, gminus = g_factors(basis, fiber)
        lmh = (gplus * gminus) ** -0.5
        S = weighted_operator(M, basis, fiber)
        curve.append({"kappa": float(kappa), "s_min": smallest_singular_value(S)})
        phis = battery_vectors(np.ones(len(basis), dtype=bool), 1 / lmh, battery, np.random.default_rng(rng_seed))
        for phi in phis:
            w = lmh * (M @ phi)
            psi = lmh * w / np.linalg.norm(w)
            form = abs(np.vdot(psi, M @ phi))
            sup_residual = max(sup_residual, abs(form - np.linalg.norm(w)) / np.linalg.norm(w))
    s = [c["s_min"] for c in curve]
    tail = min(s[len(s) // 2 :])
    return RatioReport(
        "thm11",
        {"sup_form_residual": float(sup_residual), "lambda": float(lam), "kappa": [float(k) for k in kappa_list], "battery": battery, "seed": seed,
         "cutoff": basis.cutoff, "gamma": list(frame.coords)},
        curve,
        float(max(s)),
        float(min(s)),
        {"sup_form_identity": bool(sup_residual < 1e-10), "tail_positive": bool(tail > 1e-3)},
    )
