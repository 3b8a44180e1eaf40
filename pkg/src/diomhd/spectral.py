"""Fourier representation of real fields on the unit 3-torus.

Fields are stored as the full array of complex Fourier coefficients in numpy
FFT ordering, normalised so that

    f(x) = sum_k f_k exp(2 pi i k.x),    x in [0, 1)^3,

i.e. ``coeffs = fftn(samples) / n**3``.  With this convention the gradient is
the multiplier ``2 pi i k`` and the grid mean-square equals ``sum |f_k|^2``.

Odd-order multipliers (gradient, divergence, curl, ``w.grad``, ...) drop the
Nyquist wave number so that they map real fields to real fields; even
multipliers (``Lambda^s``, Laplacians) use the true wave vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi

OPERATOR_KINDS = (
    "lambda",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "w_dot_grad",
    "w_cross_grad",
    "laplacian_w",
    "div_w",
)


class GridMismatchError(ValueError):
    """Raised when fields defined on different grids are combined."""


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with ``n`` points (and modes) per axis.

    Args:
        n: Modes per axis, even and at least 4.
        dealias_fraction: Fraction of the resolvable band kept by
            :func:`dealias`; a mode survives when every ``|k_i|`` is strictly
            below ``dealias_fraction * n / 2``.
    """

    n: int
    dealias_fraction: Fraction = Fraction(2, 3)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise TypeError(f"n must be an integer, got {self.n!r}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        frac = Fraction(self.dealias_fraction)
        if not 0 < frac <= 1:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {frac}")
        object.__setattr__(self, "dealias_fraction", frac)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @cached_property
    def k1d(self) -> np.ndarray:
        """Integer wave numbers in FFT order, spanning ``[-n/2, n/2)``."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable integer wave-vector components."""
        k = self.k1d
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k_odd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wave-vector components with the Nyquist entry zeroed."""
        k = self.k1d.astype(float)
        k[self.n // 2] = 0.0
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.k
        return (kx**2 + ky**2 + kz**2).astype(float)

    @cached_property
    def dealias_cut(self) -> Fraction:
        return self.dealias_fraction * self.n / 2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.abs(self.k1d) < self.dealias_cut
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical coordinates ``x_j = j / n`` as broadcastable arrays."""
        x = np.arange(self.n) / self.n
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def shifted_index(self) -> np.ndarray:
        """FFT-order indices listing ``k = -n/2, ..., n/2 - 1`` in ascending order."""
        return np.argsort(self.k1d, kind="stable")


def _check_grid(*fields) -> Grid3:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar field."""

    grid: Grid3
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"expected coefficient shape {self.grid.shape}, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid3) -> SpectralField:
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_samples(cls, grid: Grid3, samples) -> SpectralField:
        return cls(grid, forward(grid, samples))

    def to_samples(self) -> np.ndarray:
        return inverse(self.coeffs)

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True, eq=False)
class VectorSpectralField:
    """Three scalar fields sharing one grid, stored as a ``(3, n, n, n)`` array."""

    grid: Grid3
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (3,) + self.grid.shape:
            raise ValueError(f"expected coefficient shape {(3,) + self.grid.shape}, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid3) -> VectorSpectralField:
        return cls(grid, np.zeros((3,) + grid.shape, dtype=np.complex128))

    @classmethod
    def from_components(cls, components) -> VectorSpectralField:
        comps = list(components)
        if len(comps) != 3:
            raise ValueError("a vector field needs exactly three components")
        grid = _check_grid(*comps)
        return cls(grid, np.stack([c.coeffs for c in comps]))

    @classmethod
    def from_samples(cls, grid: Grid3, samples) -> VectorSpectralField:
        return cls(grid, forward(grid, samples, axes=(1, 2, 3)))

    @property
    def components(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return tuple(SpectralField(self.grid, c) for c in self.coeffs)

    def to_samples(self) -> np.ndarray:
        return inverse(self.coeffs)

    def __add__(self, other: VectorSpectralField) -> VectorSpectralField:
        _check_grid(self, other)
        return VectorSpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: VectorSpectralField) -> VectorSpectralField:
        _check_grid(self, other)
        return VectorSpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> VectorSpectralField:
        return VectorSpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> VectorSpectralField:
        return VectorSpectralField(self.grid, -self.coeffs)


Field = SpectralField | VectorSpectralField


def forward(grid: Grid3, samples, axes=(-3, -2, -1)) -> np.ndarray:
    """Normalised forward transform of physical samples."""
    x = np.asarray(samples)
    if x.shape[-3:] != grid.shape:
        raise ValueError(f"expected samples of shape (..., {grid.n}, {grid.n}, {grid.n}), got {x.shape}")
    return sfft.fftn(x, axes=axes) / grid.n**3


def inverse(coeffs: np.ndarray) -> np.ndarray:
    """Real physical samples of a Hermitian coefficient array."""
    n = coeffs.shape[-1]
    return sfft.ifftn(coeffs, axes=(-3, -2, -1)).real * n**3


def inverse_hermitian(coeffs: np.ndarray) -> np.ndarray:
    """Like :func:`inverse` but reads only the ``k_3 >= 0`` half; valid for Hermitian arrays."""
    n = coeffs.shape[-1]
    return sfft.irfftn(coeffs[..., : n // 2 + 1], s=(n, n, n), axes=(-3, -2, -1)) * n**3


def _mirror(coeffs: np.ndarray) -> np.ndarray:
    """Array whose entry at ``k`` is ``coeffs[-k]``."""
    out = np.flip(coeffs, axis=(-3, -2, -1))
    return np.roll(out, 1, axis=(-3, -2, -1))


def hermitian_defect(f: Field) -> float:
    """Largest ``|c(-k) - conj(c(k))|`` over the lattice (0 for a real field)."""
    return float(np.max(np.abs(_mirror(f.coeffs) - np.conj(f.coeffs))))


def transform_roundtrip(grid: Grid3, samples) -> tuple[SpectralField, np.ndarray]:
    """Transform samples and back; returns the field and the reconstructed samples."""
    f = SpectralField.from_samples(grid, samples)
    return f, f.to_samples()


@dataclass(frozen=True)
class OperatorSpec:
    """A Fourier multiplier operator.

    ``kind`` is one of :data:`OPERATOR_KINDS`; ``s`` is the order for
    ``lambda`` and ``w`` the background vector for the ``w``-operators.
    """

    kind: str
    s: float | None = None
    w: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "lambda":
            if self.s is None or not np.isfinite(self.s) or self.s < 0:
                raise ValueError(f"lambda(s) needs a finite s >= 0, got {self.s!r}")
        if self.kind in ("w_dot_grad", "w_cross_grad", "laplacian_w", "div_w"):
            if self.w is None:
                raise ValueError(f"{self.kind} needs a background vector w")
            w = tuple(float(x) for x in np.asarray(self.w, dtype=float).ravel())
            if len(w) != 3 or not any(w):
                raise ValueError(f"w must be a nonzero 3-vector, got {self.w!r}")
            object.__setattr__(self, "w", w)


def lambda_multiplier(grid: Grid3, s: float) -> np.ndarray:
    """Symbol ``(2 pi |k|)^s`` of ``Lambda^s``; the zero mode maps to 0 unless s == 0.

    The returned array is cached and read-only.
    """
    return _lambda_cached(grid, float(s))


@lru_cache(maxsize=64)
def _lambda_cached(grid: Grid3, s: float) -> np.ndarray:
    mag = TWO_PI * np.sqrt(grid.k_squared)
    if s == 0:
        out = np.ones(grid.shape)
    else:
        with np.errstate(divide="ignore"):
            out = np.where(grid.k_squared > 0, mag**s, 0.0)
    out.flags.writeable = False
    return out


def _odd_vectors(grid: Grid3):
    kx, ky, kz = grid.k_odd
    shape = grid.shape
    return [np.broadcast_to(c, shape) for c in (kx, ky, kz)]


def _dot_w(grid: Grid3, w) -> np.ndarray:
    kx, ky, kz = grid.k_odd
    return w[0] * kx + w[1] * ky + w[2] * kz


def _cross_w(grid: Grid3, w):
    kx, ky, kz = _odd_vectors(grid)
    return (w[1] * kz - w[2] * ky, w[2] * kx - w[0] * kz, w[0] * ky - w[1] * kx)


def cross_w_squared(grid: Grid3, w) -> np.ndarray:
    """``|w x k|^2`` on the true lattice."""
    kx, ky, kz = (np.broadcast_to(c, grid.shape).astype(float) for c in grid.k)
    cx = w[1] * kz - w[2] * ky
    cy = w[2] * kx - w[0] * kz
    cz = w[0] * ky - w[1] * kx
    return cx**2 + cy**2 + cz**2


def apply_operator(f: Field, op: OperatorSpec) -> Field:
    """Apply a Fourier multiplier, returning a field of the appropriate rank."""
    grid = f.grid
    vector = isinstance(f, VectorSpectralField)
    c = f.coeffs
    kind = op.kind

    def same_rank(out):
        return VectorSpectralField(grid, out) if vector else SpectralField(grid, out)

    if kind == "lambda":
        return same_rank(c * lambda_multiplier(grid, op.s))
    if kind == "laplacian":
        return same_rank(c * (-(TWO_PI**2) * grid.k_squared))
    if kind == "laplacian_w":
        return same_rank(c * (-(TWO_PI**2) * cross_w_squared(grid, op.w)))
    if kind == "w_dot_grad":
        return same_rank(c * (1j * TWO_PI * _dot_w(grid, op.w)))

    kvec = _odd_vectors(grid)
    if kind == "gradient":
        _require_scalar(f, kind)
        return VectorSpectralField(grid, np.stack([1j * TWO_PI * k * c for k in kvec]))
    if kind == "w_cross_grad":
        _require_scalar(f, kind)
        return VectorSpectralField(grid, np.stack([1j * TWO_PI * m * c for m in _cross_w(grid, op.w)]))
    if kind == "divergence":
        _require_vector(f, kind)
        return SpectralField(grid, 1j * TWO_PI * sum(k * ci for k, ci in zip(kvec, c)))
    if kind == "div_w":
        _require_vector(f, kind)
        m = _cross_w(grid, op.w)
        return SpectralField(grid, 1j * TWO_PI * sum(mi * ci for mi, ci in zip(m, c)))
    if kind == "curl":
        _require_vector(f, kind)
        kx, ky, kz = kvec
        out = np.stack([ky * c[2] - kz * c[1], kz * c[0] - kx * c[2], kx * c[1] - ky * c[0]])
        return VectorSpectralField(grid, 1j * TWO_PI * out)
    raise AssertionError(kind)


def _require_scalar(f, kind):
    if not isinstance(f, SpectralField):
        raise TypeError(f"{kind} acts on scalar fields")


def _require_vector(f, kind):
    if not isinstance(f, VectorSpectralField):
        raise TypeError(f"{kind} acts on vector fields")


def sobolev_weight(grid: Grid3, s: float) -> np.ndarray:
    """Inhomogeneous Sobolev symbol ``(1 + 4 pi^2 |k|^2)^s`` (squared-norm weight, cached, read-only)."""
    return _sobolev_cached(grid, float(s))


@lru_cache(maxsize=64)
def _sobolev_cached(grid: Grid3, s: float) -> np.ndarray:
    out = (1.0 + TWO_PI**2 * grid.k_squared) ** s
    out.flags.writeable = False
    return out


def sobolev_norm(f: Field, s: float) -> float:
    """``(sum_k (1 + 4 pi^2 |k|^2)^s |f_k|^2)^(1/2)``, summed over components for vectors."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    power = np.abs(f.coeffs) ** 2
    if power.ndim == 4:
        power = power.sum(axis=0)
    return float(np.sqrt(np.sum(sobolev_weight(f.grid, s) * power)))


def l2_norm(f: Field) -> float:
    return sobolev_norm(f, 0.0)


def inner(f: Field, g: Field) -> float:
    """``int f g dx`` for real fields of equal rank."""
    _check_grid(f, g)
    return float(np.sum((f.coeffs * np.conj(g.coeffs)).real))


def dealias(f: Field) -> Field:
    """Zero every mode outside the retained band."""
    out = f.coeffs * f.grid.dealias_mask
    return type(f)(f.grid, out)


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product with the 2/3 rule applied to both inputs and the output."""
    grid = _check_grid(f, g)
    mask = grid.dealias_mask
    prod = inverse(f.coeffs * mask) * inverse(g.coeffs * mask)
    return SpectralField(grid, forward(grid, prod) * mask)


def leray_project(v: VectorSpectralField) -> VectorSpectralField:
    """Remove the component of each mode parallel to its wave vector."""
    kx, ky, kz = _odd_vectors(v.grid)
    k2 = kx**2 + ky**2 + kz**2
    c = v.coeffs
    kdotv = kx * c[0] + ky * c[1] + kz * c[2]
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(k2 > 0, kdotv / np.where(k2 > 0, k2, 1.0), 0.0)
    return VectorSpectralField(v.grid, c - np.stack([kx * factor, ky * factor, kz * factor]))


def mean_and_center(f: Field):
    """Split a field into its mean (the ``k = 0`` coefficient) and the centred remainder."""
    c = f.coeffs.copy()
    if c.ndim == 4:
        mean = c[:, 0, 0, 0].real.copy()
        c[:, 0, 0, 0] = 0.0
    else:
        mean = float(c[0, 0, 0].real)
        c[0, 0, 0] = 0.0
    return mean, type(f)(f.grid, c)


def band_limited_random(grid: Grid3, rng: np.random.Generator, k_max: float, components: int | None = None) -> np.ndarray:
    """Hermitian coefficients of a random real field with modes ``0 < |k| <= k_max``.

    White noise on the grid is transformed and masked, so Hermitian symmetry
    is exact.  Returns an ``(n, n, n)`` array, or ``(components, n, n, n)``.
    """
    shape = grid.shape if components is None else (components,) + grid.shape
    noise = rng.standard_normal(shape)
    c = forward(grid, noise)
    mask = (grid.k_squared > 0) & (grid.k_squared <= k_max**2)
    return c * mask
