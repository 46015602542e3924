"""Periodic scalar and vector fields.

Fields are held either as trigonometric polynomials (finite maps from
reciprocal-lattice indices to complex coefficient vectors) or as samples on a
uniform grid of the period cell.  Conventions:

* ``f(x) = sum_N f_N exp(2 pi i (N, x))`` with N running over the reciprocal
  lattice, so ``f_N`` is the cell average of ``f(x) exp(-2 pi i (N, x))``.
* Grid point ``j`` (a multi-index) sits at ``x = sum_i (j_i / m_i) E_i``.
* Indices are integer coordinates in the reciprocal basis, so (N, gamma) for
  a lattice vector gamma with integer coordinates c is the integer ``m . c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import TWO_PI, DirectionFrame, Lattice, integer_ball

REAL_TOL = 1e-10
ROUNDOFF = 1e-14


class FieldError(ValueError):
    pass


def _merge(coords: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum duplicate indices, drop exact zeros, sort lexicographically."""
    if len(coords) == 0:
        return coords.reshape(0, coords.shape[1] if coords.ndim == 2 else 0), values
    uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    merged = np.zeros((len(uniq), values.shape[1]), dtype=complex)
    np.add.at(merged, inverse, values)
    keep = np.any(merged != 0, axis=1)
    return uniq[keep], merged[keep]


class TrigPolynomial:
    """Finite Fourier series of a Lambda-periodic field with ``d`` components."""

    def __init__(self, lattice: Lattice, coords, values, d: int | None = None):
        coords = np.asarray(coords, dtype=np.int64)
        values = np.asarray(values, dtype=complex)
        if d is None:
            d = values.shape[1] if values.ndim == 2 else 1
        coords = coords.reshape(-1, lattice.n)
        values = values.reshape(len(coords), d)
        self.lattice = lattice
        self.d = d
        self.coords, self.values = _merge(coords, values)
        self.coords.setflags(write=False)
        self.values.setflags(write=False)

    # construction ---------------------------------------------------------

    @classmethod
    def zero(cls, lattice: Lattice, d: int = 1) -> "TrigPolynomial":
        return cls(lattice, np.zeros((0, lattice.n), dtype=np.int64), np.zeros((0, d)), d=d)

    @classmethod
    def constant(cls, lattice: Lattice, value) -> "TrigPolynomial":
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls(lattice, np.zeros((1, lattice.n), dtype=np.int64), value[None, :], d=len(value))

    @classmethod
    def from_dict(cls, lattice: Lattice, mapping: dict, d: int | None = None) -> "TrigPolynomial":
        if not mapping:
            return cls.zero(lattice, d or 1)
        coords = np.array([tuple(k) for k in mapping], dtype=np.int64)
        values = np.array([np.atleast_1d(np.asarray(v, dtype=complex)) for v in mapping.values()])
        return cls(lattice, coords, values, d=d)

    @classmethod
    def cosine(cls, lattice: Lattice, coords, amplitude) -> "TrigPolynomial":
        """``amplitude * cos(2 pi (N, x))`` for the index N with ``coords``."""
        amplitude = np.atleast_1d(np.asarray(amplitude, dtype=float))
        c = np.asarray(coords, dtype=np.int64)
        return cls(lattice, np.stack([c, -c]), np.stack([amplitude / 2, amplitude / 2]), d=len(amplitude))

    # access ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.coords)

    def as_dict(self) -> dict[tuple[int, ...], np.ndarray]:
        return {tuple(int(c) for c in row): self.values[i] for i, row in enumerate(self.coords)}

    def coeff(self, coords) -> np.ndarray:
        target = np.asarray(coords, dtype=np.int64)
        hit = np.flatnonzero(np.all(self.coords == target, axis=1))
        if len(hit) == 0:
            return np.zeros(self.d, dtype=complex)
        return self.values[hit[0]].copy()

    @property
    def mean(self) -> np.ndarray:
        return self.coeff(np.zeros(self.lattice.n, dtype=np.int64))

    @property
    def cartesian(self) -> np.ndarray:
        return self.lattice.cartesian(self.coords)

    @property
    def degree(self) -> float:
        """max |2 pi N| over the support (0 for constants and the zero field)."""
        if len(self) == 0:
            return 0.0
        return float(TWO_PI * np.max(np.linalg.norm(self.cartesian, axis=1)))

    @property
    def max_coord(self) -> np.ndarray:
        """Largest |integer coordinate| per reciprocal direction."""
        if len(self) == 0:
            return np.zeros(self.lattice.n, dtype=np.int64)
        return np.max(np.abs(self.coords), axis=0)

    def component(self, j: int) -> "TrigPolynomial":
        return TrigPolynomial(self.lattice, self.coords, self.values[:, j : j + 1], d=1)

    def symmetry_defect(self) -> float:
        """max |f_{-N} - conj(f_N)|; zero for real-valued fields."""
        if len(self) == 0:
            return 0.0
        lookup = self.as_dict()
        worst = 0.0
        for key, val in lookup.items():
            mirror = lookup.get(tuple(-c for c in key), np.zeros(self.d))
            worst = max(worst, float(np.max(np.abs(mirror - np.conj(val)))))
        return worst

    def is_real(self, tol: float = REAL_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values)))) if len(self) else 1.0
        return self.symmetry_defect() <= tol * scale

    def require_real(self, what: str = "field") -> None:
        if not self.is_real():
            raise FieldError(f"{what} is not real-valued (conjugate symmetry violated)")

    def symmetrized(self) -> "TrigPolynomial":
        neg = TrigPolynomial(self.lattice, -self.coords, np.conj(self.values), d=self.d)
        return (self + neg) * 0.5

    # algebra --------------------------------------------------------------

    def _check(self, other: "TrigPolynomial") -> None:
        if other.lattice is not self.lattice and not np.allclose(other.lattice.basis, self.lattice.basis):
            raise FieldError("fields live on different lattices")

    def __add__(self, other):
        if not isinstance(other, TrigPolynomial):
            other = TrigPolynomial.constant(self.lattice, np.broadcast_to(np.asarray(other, dtype=complex), (self.d,)))
        self._check(other)
        if other.d != self.d:
            raise FieldError(f"component mismatch {self.d} vs {other.d}")
        return TrigPolynomial(
            self.lattice,
            np.concatenate([self.coords, other.coords]),
            np.concatenate([self.values, other.values]),
            d=self.d,
        )

    __radd__ = __add__

    def __neg__(self):
        return TrigPolynomial(self.lattice, self.coords, -self.values, d=self.d)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return TrigPolynomial(self.lattice, self.coords, self.values * scalar, d=self.d)

    __rmul__ = __mul__

    def filter(self, keep: np.ndarray) -> "TrigPolynomial":
        return TrigPolynomial(self.lattice, self.coords[keep], self.values[keep], d=self.d)

    def multiply_coeffs(self, weights) -> "TrigPolynomial":
        weights = np.asarray(weights)
        if weights.ndim == 1:
            weights = weights[:, None]
        return TrigPolynomial(self.lattice, self.coords, self.values * weights, d=self.d)

    def product(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Pointwise product, componentwise when both have ``d`` components or
        broadcast when one of them is scalar."""
        self._check(other)
        d = max(self.d, other.d)
        if min(self.d, other.d) != 1 and self.d != other.d:
            raise FieldError(f"cannot multiply fields with {self.d} and {other.d} components")
        if len(self) == 0 or len(other) == 0:
            return TrigPolynomial.zero(self.lattice, d)
        coords = (self.coords[:, None, :] + other.coords[None, :, :]).reshape(-1, self.lattice.n)
        values = (self.values[:, None, :] * other.values[None, :, :]).reshape(-1, d)
        return TrigPolynomial(self.lattice, coords, values, d=d)

    def dot(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """sum_j f_j g_j as a scalar field."""
        prod = self.product(other)
        return TrigPolynomial(self.lattice, prod.coords, prod.values.sum(axis=1, keepdims=True), d=1)

    def abs_squared(self) -> "TrigPolynomial":
        """|f|^2 = sum_j f_j conj(f_j), exact in coefficient space."""
        conj = TrigPolynomial(self.lattice, -self.coords, np.conj(self.values), d=self.d)
        return self.dot(conj)

    def derivative(self, j: int) -> "TrigPolynomial":
        """Partial derivative along the Cartesian axis ``j``."""
        factor = 2j * np.pi * self.cartesian[:, j] if len(self) else np.zeros(0)
        return self.multiply_coeffs(factor)

    # evaluation -----------------------------------------------------------

    def evaluate_complex(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.lattice.n)
        if len(self) == 0:
            return np.zeros(x.shape[:-1] + (self.d,), dtype=complex)
        phase = np.exp(2j * np.pi * (flat @ self.cartesian.T))
        return (phase @ self.values).reshape(x.shape[:-1] + (self.d,))

    def evaluate(self, x) -> np.ndarray:
        """Real values at Cartesian points ``x`` (shape ``(..., n)``)."""
        out = self.evaluate_complex(x)
        scale = max(1.0, float(np.sum(np.abs(self.values))))
        if out.size and np.max(np.abs(out.imag)) > REAL_TOL * scale:
            raise FieldError("non-real field: imaginary part exceeds tolerance")
        return out.real

    def on_grid(self, shape) -> np.ndarray:
        """Complex values on the uniform cell grid, shape ``shape + (d,)``.

        Exact for any grid: modes are folded modulo the grid before the
        inverse FFT, which is what sampling does anyway.
        """
        shape = tuple(int(m) for m in shape)
        spec = np.zeros(shape + (self.d,), dtype=complex)
        if len(self):
            idx = tuple((self.coords[:, i] % shape[i]) for i in range(self.lattice.n))
            np.add.at(spec, idx, self.values)
        axes = tuple(range(self.lattice.n))
        return np.fft.ifftn(spec, axes=axes) * np.prod(shape)

    def sample(self, shape) -> "SampledField":
        vals = self.on_grid(shape)
        scale = max(1.0, float(np.sum(np.abs(self.values))))
        if vals.size and np.max(np.abs(vals.imag)) > REAL_TOL * scale:
            raise FieldError("non-real field: imaginary part exceeds tolerance")
        return SampledField(self.lattice, vals.real)

    def __repr__(self) -> str:
        return f"TrigPolynomial(n={self.lattice.n}, d={self.d}, modes={len(self)})"


@dataclass(frozen=True, eq=False)
class SampledField:
    """Real ``d``-vector samples on the uniform grid of the period cell;
    ``samples`` has shape ``(m_1, ..., m_n, d)``."""

    lattice: Lattice
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == self.lattice.n:
            s = s[..., None]
        if s.ndim != self.lattice.n + 1:
            raise FieldError(f"samples must have {self.lattice.n} grid axes plus a component axis")
        if any(m <= 0 for m in s.shape[:-1]):
            raise FieldError("grid shape must be strictly positive")
        object.__setattr__(self, "samples", s)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples.shape[:-1]

    @property
    def d(self) -> int:
        return self.samples.shape[-1]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        return grid_points(self.lattice, self.shape)

    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.samples, axis=-1)

    def max_cutoff(self) -> float:
        """Largest ball cutoff whose indices this grid resolves."""
        half = np.array([(m - 1) // 2 for m in self.shape], dtype=float)
        return float(TWO_PI * np.min(half / np.linalg.norm(self.lattice.basis, axis=1)))


def grid_points(lat: Lattice, shape) -> np.ndarray:
    axes = [np.arange(m) / m for m in shape]
    frac = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return frac @ lat.basis


def default_grid(lat: Lattice, *fields: TrigPolynomial, minimum: int = 16, oversample: int = 4) -> tuple[int, ...]:
    """Uniform grid resolving every field with room to spare."""
    top = np.zeros(lat.n, dtype=np.int64)
    for f in fields:
        top = np.maximum(top, f.max_coord)
    return tuple(int(max(minimum, oversample * t + 1)) for t in top)


# Fourier analysis -----------------------------------------------------------


def fourier_coefficients(f: SampledField, cutoff: float) -> TrigPolynomial:
    lat = f.lattice
    coords = integer_ball(lat, cutoff)
    top = np.max(np.abs(coords), axis=0)
    for i, m in enumerate(f.shape):
        if m < 2 * top[i] + 1:
            raise FieldError(
                f"aliasing risk: grid axis {i} has {m} points, cutoff needs at least {2 * top[i] + 1}"
            )
    axes = tuple(range(lat.n))
    spec = np.fft.fftn(f.samples, axes=axes) / f.size
    idx = tuple(coords[:, i] % f.shape[i] for i in range(lat.n))
    vals = spec[idx]
    # FFT round-off on modes the field does not contain
    scale = max(1.0, float(np.max(np.abs(f.samples)))) if f.size else 1.0
    vals = np.where(np.abs(vals) < ROUNDOFF * scale, 0.0, vals)
    poly = TrigPolynomial(lat, coords, vals, d=f.d)
    return poly.symmetrized()


def evaluate(p: TrigPolynomial, x) -> np.ndarray:
    return p.evaluate(x)


def random_trig_polynomial(
    lat: Lattice,
    d: int,
    rng: np.random.Generator,
    n_modes: int = 3,
    max_coord: int = 1,
    amplitude: float = 1.0,
    mean: bool = False,
    candidates=None,
) -> TrigPolynomial:
    """Real random field built from ``n_modes`` conjugate pairs."""
    if candidates is None:
        axes = [np.arange(-max_coord, max_coord + 1)] * lat.n
        box = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lat.n)
        # one representative per +-N pair
        first = np.array([next((c for c in row if c != 0), 0) for row in box])
        candidates = box[first > 0]
    candidates = np.asarray(candidates, dtype=np.int64)
    pick = candidates[rng.choice(len(candidates), size=min(n_modes, len(candidates)), replace=False)]
    vals = amplitude * (rng.standard_normal((len(pick), d)) + 1j * rng.standard_normal((len(pick), d))) / 2
    coords = np.concatenate([pick, -pick])
    values = np.concatenate([vals, np.conj(vals)])
    if mean:
        coords = np.concatenate([coords, np.zeros((1, lat.n), dtype=np.int64)])
        values = np.concatenate([values, amplitude * rng.standard_normal((1, d)).astype(complex)])
    return TrigPolynomial(lat, coords, values, d=d)


# mollification ----------------------------------------------------------------


def fejer_window(cart: np.ndarray, r: float) -> np.ndarray:
    """Tensor-product triangular window prod_j max(0, 1 - |2 pi N_j| / r).

    It is the Fourier transform of a product of squared sinc kernels, so the
    corresponding convolution kernel is nonnegative with unit mass.
    """
    return np.prod(np.clip(1.0 - TWO_PI * np.abs(cart) / r, 0.0, None), axis=-1)


def mollify(A, r: float) -> tuple[TrigPolynomial, TrigPolynomial]:
    """Split ``A = A0 + A1`` with ``A0 = A * F_r`` smooth; returns ``(A0, A1)``."""
    if r <= 0:
        raise FieldError("mollifier radius must be positive")
    if isinstance(A, SampledField):
        A = fourier_coefficients(A, A.max_cutoff())
    w = fejer_window(A.cartesian, r) if len(A) else np.zeros(0)
    smooth = A.multiply_coeffs(w)
    return smooth, A - smooth


# norms ------------------------------------------------------------------------


def _sorted_levels(f: SampledField) -> np.ndarray:
    if f.size == 0:
        raise FieldError("empty grid")
    return np.sort(f.magnitude().ravel())[::-1]


def weak_norm(f: SampledField, p: float) -> float:
    """sup_t t * |{|f| > t}|^(1/p) for the grid measure (each point carries
    volume v(K)/m)."""
    if p < 1:
        raise FieldError("weak norms need p >= 1")
    w = _sorted_levels(f)
    i = np.arange(1, len(w) + 1)
    return float(np.max(w * (i * f.lattice.cell_volume / len(w)) ** (1.0 / p)))


def weak_norm_tail(f: SampledField, p: float, tail_fraction: float) -> float:
    """The weak-norm supremum restricted to superlevel sets of measure at most
    ``tail_fraction * v(K)``, a finite-grid stand-in for the large-t lim-sup.

    Returns 0 once the tail holds no grid point.
    """
    if not 0 < tail_fraction <= 1:
        raise FieldError("tail_fraction must lie in (0, 1]")
    w = _sorted_levels(f)
    top = int(np.floor(tail_fraction * len(w) + 1e-9))
    if top == 0:
        return 0.0
    i = np.arange(1, top + 1)
    return float(np.max(w[:top] * (i * f.lattice.cell_volume / len(w)) ** (1.0 / p)))


def lp_norm(f: SampledField, p: float) -> float:
    """Grid quadrature of (int_K |f|^p)^(1/p)."""
    mag = f.magnitude()
    return float((f.lattice.cell_volume * np.mean(mag**p)) ** (1.0 / p))


def line_average(f: TrigPolynomial, frame: DirectionFrame) -> TrigPolynomial:
    """x -> int_0^1 f(x - xi gamma) d xi: keeps exactly the modes with (N, gamma) = 0."""
    if len(f) == 0:
        return f
    dots = f.coords @ np.asarray(frame.coords, dtype=np.int64)
    return f.filter(dots == 0)


def _line_values(f: TrigPolynomial, frame: DirectionFrame, shape, n_xi: int) -> np.ndarray:
    """|f(x - xi gamma)| on grid x and xi = q / n_xi; shape ``grid + (n_xi,)``."""
    dots = f.coords @ np.asarray(frame.coords, dtype=np.int64)
    xi = np.arange(n_xi) / n_xi
    total = None
    for t in np.unique(dots):
        part = f.filter(dots == t).on_grid(shape)  # grid + (d,)
        phase = np.exp(-2j * np.pi * t * xi)  # (n_xi,)
        term = part[..., None, :] * phase[:, None]
        total = term if total is None else total + term
    if total is None:
        return np.zeros(tuple(shape) + (n_xi,))
    return np.linalg.norm(total, axis=-1)


def directional_norm(f: TrigPolynomial, frame: DirectionFrame, p: int, shape=None, n_xi: int | None = None) -> float:
    """ess-sup over the x-grid of (int_0^1 |f(x - xi gamma)|^p d xi)^(1/p).

    For p = 2 the xi-integral is exact (line average of |f|^2); for p = 1 it
    uses the periodic trapezoid rule with ``n_xi`` nodes.
    """
    if p not in (1, 2):
        raise FieldError("directional norms are defined for p = 1 or 2")
    if len(f) == 0:
        return 0.0
    shape = shape or default_grid(f.lattice, f)
    if p == 2:
        avg = line_average(f.abs_squared(), frame)
        vals = avg.on_grid(shape)[..., 0].real
        return float(np.sqrt(max(0.0, np.max(vals))))
    if n_xi is None:
        span = int(np.max(np.abs(f.coords @ np.asarray(frame.coords, dtype=np.int64))))
        n_xi = max(256, 64 * span)
    vals = _line_values(f, frame, shape, n_xi)
    return float(np.max(vals.mean(axis=-1)))


# file formats -----------------------------------------------------------------


def read_coefficients(path, lattice: Lattice, d: int) -> TrigPolynomial:
    """One record per line: n integer coordinates then re/im pairs for each
    of the ``d`` components.  ``#`` starts a comment."""
    coords, values = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != lattice.n + 2 * d:
            raise FieldError(f"{path}:{lineno}: expected {lattice.n + 2 * d} fields, got {len(parts)}")
        try:
            coords.append([int(t) for t in parts[: lattice.n]])
            nums = [float(t) for t in parts[lattice.n :]]
        except ValueError as exc:
            raise FieldError(f"{path}:{lineno}: {exc}") from None
        values.append([complex(nums[2 * j], nums[2 * j + 1]) for j in range(d)])
    if not coords:
        return TrigPolynomial.zero(lattice, d)
    return TrigPolynomial(lattice, np.array(coords), np.array(values), d=d)


def write_coefficients(path, p: TrigPolynomial) -> None:
    lines = [f"# {p.lattice.n} index coordinates, then re im for {p.d} component(s)"]
    for row, val in zip(p.coords, p.values):
        nums = " ".join(f"{v.real:.17g} {v.imag:.17g}" for v in val)
        lines.append(" ".join(str(int(c)) for c in row) + " " + nums)
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid(path, lattice: Lattice) -> SampledField:
    """Header ``m_1 ... m_n d`` then prod(m) lines of d values, first axis fastest."""
    rows = [ln.split("#", 1)[0].split() for ln in Path(path).read_text().splitlines()]
    rows = [r for r in rows if r]
    if not rows:
        raise FieldError(f"{path}: empty grid file")
    header = [int(t) for t in rows[0]]
    if len(header) != lattice.n + 1:
        raise FieldError(f"{path}: header must hold {lattice.n} grid sizes and d")
    shape, d = tuple(header[:-1]), header[-1]
    data = np.array([[float(t) for t in r] for r in rows[1:]])
    if data.shape != (int(np.prod(shape)), d):
        raise FieldError(f"{path}: expected {int(np.prod(shape))} rows of {d} values, got {data.shape}")
    samples = data.reshape(tuple(reversed(shape)) + (d,))
    samples = np.transpose(samples, tuple(reversed(range(lattice.n))) + (lattice.n,))
    return SampledField(lattice, samples)


def write_grid(path, f: SampledField) -> None:
    n = f.lattice.n
    data = np.transpose(f.samples, tuple(reversed(range(n))) + (n,)).reshape(-1, f.d)
    lines = [" ".join(str(m) for m in f.shape) + f" {f.d}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in data]
    Path(path).write_text("\n".join(lines) + "\n")
