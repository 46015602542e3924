"""Transversal-averaging hypothesis on the magnetic potential.

For a lattice direction gamma and an even measure mu whose Fourier transform
equals one on (-h, h), the functional

    theta = |gamma|/pi * max_x max_{e~ _|_ gamma} | A_0 - int dmu(t) int_0^1 A(x - xi gamma - t e~) dxi |

must stay below one.  On a trigonometric polynomial the double average acts
diagonally: the xi-integral keeps the modes with (N, gamma) = 0 and the
t-integral multiplies them by mu^(2 pi (N, e~)).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .lattice import DirectionFrame, Lattice
from .potential import TrigPolynomial, default_grid, line_average


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class AveragingMeasure:
    """Even measure given through its transform.

    ``dirac``: the point mass at 0, transform identically one.
    ``windowed``: transform one on |p| <= h, raised-cosine taper to zero on
    [h, H], zero beyond; it has an integrable density whenever H > h.
    """

    kind: str = "dirac"
    h: float = 1.0
    H: float | None = None

    def __post_init__(self):
        if self.kind not in ("dirac", "windowed"):
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        if self.h <= 0:
            raise MeasureError("h must be positive")
        if self.kind == "windowed":
            if self.H is None or self.H < self.h:
                raise MeasureError("windowed measure needs H >= h")

    @classmethod
    def dirac(cls) -> "AveragingMeasure":
        return cls("dirac", math.inf, None)

    def transform(self, p) -> np.ndarray:
        p = np.abs(np.asarray(p, dtype=float))
        if self.kind == "dirac":
            return np.ones_like(p)
        out = np.where(p <= self.h, 1.0, 0.0)
        if self.H > self.h:
            taper = 0.5 * (1.0 + np.cos(np.pi * (p - self.h) / (self.H - self.h)))
            out = np.where((p > self.h) & (p < self.H), taper, out)
        return out

    def density(self, t) -> np.ndarray:
        """(1/2 pi) int mu^(p) exp(-i p t) dp for the windowed kind, in closed form.

        With W = H - h and w = pi/W the taper integrates to
        sin((H+h)t/2)/(pi t) * w^2 (W/2) sinc(W(|t| - w)/2) / (|t| + w),
        which decays like |t|^-3; W = 0 leaves the sharp kernel sin(ht)/(pi t).
        """
        if self.kind == "dirac":
            raise MeasureError("the Dirac measure has no density")
        t = np.abs(np.atleast_1d(np.asarray(t, dtype=float)))
        safe = np.where(t == 0, 1.0, t)
        if self.H == self.h:
            return np.where(t == 0, self.h / np.pi, np.sin(self.h * t) / (np.pi * safe))
        W = self.H - self.h
        w = np.pi / W
        head = np.where(t == 0, (self.H + self.h) / (2 * np.pi), np.sin((self.H + self.h) * t / 2) / (np.pi * safe))
        return head * w**2 * (W / 2) * np.sinc(W * (t - w) / (2 * np.pi)) / (t + w)

    def describe(self) -> dict:
        return {"kind": self.kind, "h": None if self.kind == "dirac" else self.h, "H": self.H}


def validate_measure(mu: AveragingMeasure, samples: int = 257) -> dict:
    """Check membership in the flat-transform class and estimate the total
    variation.  Raises MeasureError when the checks fail."""
    if samples < 2:
        raise MeasureError("need at least two samples")
    if mu.kind == "dirac":
        return {"valid": True, "total_variation": 1.0, "tail_residual": 0.0, "kind": "dirac"}
    p = np.linspace(-mu.h, mu.h, samples + 2)[1:-1]
    if not np.all(mu.transform(p) == 1.0):
        raise MeasureError("not in M_h: transform differs from 1 inside (-h, h)")
    if not np.array_equal(mu.transform(p), mu.transform(-p)):
        raise MeasureError("not in M_h: transform is not even")
    # int |m(t)| over [-T, T] against the shell T < |t| < 2T; a sharp cutoff
    # leaves a shell mass near (4/pi^2) ln 2 at every T
    width = mu.H - mu.h if mu.H > mu.h else mu.h
    T = 200.0 / width
    n_pts = int(40 * 2 * T * mu.H / (2 * np.pi)) + 2001
    t = np.linspace(0.0, 2 * T, n_pts)
    dens = np.abs(mu.density(t))
    inner = 2 * integrate.trapezoid(dens[t <= T], t[t <= T])
    shell = 2 * integrate.trapezoid(dens[t >= T], t[t >= T])
    report = {
        "valid": bool(shell < 1e-3 * max(inner, 1.0)),
        "total_variation": float(inner + shell),
        "tail_residual": float(shell),
        "kind": mu.kind,
        "h": mu.h,
        "H": mu.H,
    }
    if not report["valid"]:
        raise MeasureError(
            f"not in M_h: transform is not that of a finite measure (tail mass {shell:.3g} does not decay)"
        )
    return report


def sphere_grid(frame: DirectionFrame, count: int = 64, seed: int = 0) -> np.ndarray:
    """Unit vectors orthogonal to gamma.

    n = 3: ``count`` equally spaced angles on the circle.  n > 3: the +-
    coordinate vectors of an orthonormal frame of gamma-perp plus
    seeded random points.
    """
    n = len(frame.e)
    if n < 3:
        raise MeasureError("the transversal sphere needs n >= 3")
    # orthonormal basis of the complement of e
    q, _ = np.linalg.qr(np.column_stack([frame.e, np.eye(n)]))
    perp = q[:, 1:n].T
    if n == 3:
        ang = 2 * np.pi * np.arange(count) / count
        pts = np.outer(np.cos(ang), perp[0]) + np.outer(np.sin(ang), perp[1])
    else:
        rng = np.random.default_rng(seed)
        extra = max(0, count - 2 * (n - 1))
        coeff = rng.standard_normal((extra, n - 1))
        coeff /= np.linalg.norm(coeff, axis=1, keepdims=True)
        pts = np.concatenate([perp, -perp, coeff @ perp])
    return pts


def _transverse_field(A: TrigPolynomial, frame: DirectionFrame, mu: AveragingMeasure, shape, spheres) -> np.ndarray:
    """|A_0 - double average| on the x-grid for every e~; shape (len(spheres),) + grid."""
    surv = line_average(A, frame)
    zero = np.all(surv.coords == 0, axis=1) if len(surv) else np.zeros(0, dtype=bool)
    surv = surv.filter(~zero)
    if len(surv) == 0:
        return np.zeros((len(spheres),) + tuple(shape))
    if mu.kind == "dirac":
        vals = np.linalg.norm(surv.on_grid(shape), axis=-1)
        return np.broadcast_to(vals, (len(spheres),) + vals.shape)
    cart = surv.cartesian
    out = []
    for et in spheres:
        weighted = surv.multiply_coeffs(mu.transform(2 * np.pi * cart @ et))
        out.append(np.linalg.norm(weighted.on_grid(shape), axis=-1))
    return np.stack(out)


def theta(A: TrigPolynomial, frame: DirectionFrame, mu: AveragingMeasure, x_grid=None, spheres=None) -> float:
    """Grid maximum of the transversal-averaging functional (see module doc)."""
    A.require_real("magnetic potential")
    shape = tuple(x_grid) if x_grid is not None else default_grid(A.lattice, A)
    spheres = sphere_grid(frame) if spheres is None else np.asarray(spheres, dtype=float)
    if len(spheres) == 0:
        raise MeasureError("empty sphere grid")
    vals = _transverse_field(A, frame, mu, shape, spheres)
    return float(frame.gamma_norm / np.pi * np.max(vals))


def fourier_criterion(A: TrigPolynomial, frame: DirectionFrame) -> tuple[float, float]:
    """(sum over N != 0 with (N, gamma) = 0 of |A_N|, pi/|gamma|)."""
    surv = line_average(A, frame)
    total = 0.0
    for row, val in zip(surv.coords, surv.values):
        if np.any(row != 0):
            total += float(np.linalg.norm(val))
    return total, float(np.pi / frame.gamma_norm)


@dataclass
class ConditionReport:
    gamma_coords: tuple[int, ...]
    gamma_norm: float
    theta: float
    theta_ok: bool
    fourier_sum: float
    fourier_bound: float
    fourier_ok: bool
    measure: dict
    grids: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gamma_coords"] = list(self.gamma_coords)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_conditions(
    A: TrigPolynomial, frame: DirectionFrame, mu: AveragingMeasure, x_grid=None, sphere_count: int = 64
) -> ConditionReport:
    shape = tuple(x_grid) if x_grid is not None else default_grid(A.lattice, A)
    spheres = sphere_grid(frame, sphere_count)
    th = theta(A, frame, mu, shape, spheres)
    fsum, fbound = fourier_criterion(A, frame)
    return ConditionReport(
        gamma_coords=frame.coords,
        gamma_norm=frame.gamma_norm,
        theta=th,
        theta_ok=th < 1.0,
        fourier_sum=fsum,
        fourier_bound=fbound,
        fourier_ok=fsum < fbound,
        measure=mu.describe(),
        grids={"x_grid": list(shape), "sphere_points": int(len(spheres))},
    )


def primitive_vectors(n: int, max_coord: int):
    for coords in itertools.product(range(-max_coord, max_coord + 1), repeat=n):
        if any(coords) and math.gcd(*coords) == 1:
            yield coords


def search_gamma(
    A: TrigPolynomial, lat: Lattice, max_coord: int, mu: AveragingMeasure, x_grid=None, sphere_count: int = 64
) -> list[ConditionReport]:
    """Reports for every primitive gamma in the coordinate box, best theta first.

    Ties break on |gamma|, then on the coordinates in descending order so
    that positive directions precede their negatives.
    """
    if max_coord < 1:
        raise ValueError("max_coord must be at least 1")
    reports = [
        check_conditions(A, DirectionFrame.from_coords(lat, c), mu, x_grid, sphere_count)
        for c in primitive_vectors(lat.n, max_coord)
    ]
    reports.sort(key=lambda r: (r.theta, r.gamma_norm, tuple(-c for c in r.gamma_coords)))
    return reports
