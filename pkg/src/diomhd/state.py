"""Perturbation state ``(a, u, h)`` around the constant state ``(1, 0, w)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid3, SpectralField, VectorSpectralField, _check_grid

FIELD_NAMES = ("a", "u1", "u2", "u3", "h1", "h2", "h3")


@dataclass(frozen=True, eq=False)
class PerturbationState:
    """Density deviation ``a = rho - 1``, velocity ``u`` and magnetic deviation ``h = H - w``."""

    a: SpectralField
    u: VectorSpectralField
    h: VectorSpectralField
    time: float = 0.0

    def __post_init__(self):
        _check_grid(self.a, self.u, self.h)

    @property
    def grid(self) -> Grid3:
        return self.a.grid

    @classmethod
    def zeros(cls, grid: Grid3, time: float = 0.0) -> PerturbationState:
        return cls(SpectralField.zeros(grid), VectorSpectralField.zeros(grid), VectorSpectralField.zeros(grid), time)

    def stack(self) -> np.ndarray:
        """Coefficients of ``(a, u1, u2, u3, h1, h2, h3)`` as a ``(7, n, n, n)`` array."""
        return np.concatenate([self.a.coeffs[None], self.u.coeffs, self.h.coeffs])

    @classmethod
    def from_stack(cls, grid: Grid3, coeffs: np.ndarray, time: float = 0.0) -> PerturbationState:
        c = np.asarray(coeffs)
        if c.shape != (7,) + grid.shape:
            raise ValueError(f"expected shape {(7,) + grid.shape}, got {c.shape}")
        return cls(SpectralField(grid, c[0]), VectorSpectralField(grid, c[1:4]), VectorSpectralField(grid, c[4:7]),
                   float(time))

    def with_time(self, time: float) -> PerturbationState:
        return PerturbationState(self.a, self.u, self.h, float(time))

    def scaled(self, factor: float) -> PerturbationState:
        return PerturbationState(self.a * factor, self.u * factor, self.h * factor, self.time)

    def density(self) -> np.ndarray:
        """``rho = 1 + a`` on the physical grid."""
        return 1.0 + self.a.to_samples()
