"""Barotropic pressure laws and the constants derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

WINDOW = (0.5, 1.5)

# Gauss-Legendre nodes for the vectorised potential energy
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


class PressureLawError(ValueError):
    """The pressure law is not increasing on the window."""


@dataclass(frozen=True)
class PressureLaw:
    """Pressure ``p(rho)`` with its derived constants.

    Attributes:
        p, dp: the pressure and its first derivative (vectorised callables).
        beta: ``p'(1)``.
        alpha1: ``min(inf p'(s)/s, 1/2)`` over the window.
        alpha2: ``max(sup p'(s)/s, 3/2)`` over the window.
        Q: sampled sup of ``|p^(k)|`` for ``k`` up to the derivative cap.
        derivative: optional exact ``k``-th derivative ``derivative(k, s)``.
    """

    p: Callable
    dp: Callable
    beta: float
    alpha1: float
    alpha2: float
    Q: float
    q_order: int
    window: tuple[float, float] = WINDOW
    derivative: Callable | None = field(default=None, repr=False)
    name: str = "custom"
    gamma: float | None = None

    def sound_speed(self, rho):
        return np.sqrt(self.dp(rho))

    def e(self, rho):
        """Potential energy density ``2 rho int_1^rho (p(s) - p(1)) / s^2 ds`` (vectorised)."""
        rho = np.asarray(rho, dtype=float)
        if self.gamma is not None:
            return _power_law_energy(rho, self.gamma)
        half = 0.5 * (rho - 1.0)
        mid = 0.5 * (rho + 1.0)
        s = mid[..., None] + half[..., None] * _GL_NODES
        integrand = (self.p(s) - self.p(1.0)) / s**2
        return 2.0 * rho * half * (integrand @ _GL_WEIGHTS)

    def e_quad(self, rho: float, tol: float = 1e-12) -> float:
        """Scalar potential energy by adaptive quadrature."""
        p1 = self.p(1.0)
        val, _ = integrate.quad(lambda s: (self.p(s) - p1) / s**2, 1.0, rho, epsabs=tol, epsrel=tol, limit=200)
        return 2.0 * rho * val

    def enthalpy_weight(self, rho):
        """``p'(rho) / rho``, the weight of the density energy."""
        return self.dp(rho) / rho


def _power_law_energy(rho, gamma):
    log_rho = np.log1p(rho - 1.0)
    if gamma == 1.0:
        growth = log_rho
    else:
        growth = np.expm1((gamma - 1.0) * log_rho) / (gamma - 1.0)
    return 2.0 * (rho * growth - (rho - 1.0))


def _fd_derivative(p, s, k, h):
    # central differences of order k on a symmetric stencil
    if k == 0:
        return p(s)
    j = np.arange(k + 1)
    coeff = np.array([(-1) ** (k - i) * math.comb(k, i) for i in j], dtype=float)
    offsets = (j - k / 2.0) * h
    return sum(c * p(s + o) for c, o in zip(coeff, offsets)) / h**k


def pressure_constants(
    p: Callable,
    dp: Callable | None = None,
    window: tuple[float, float] = WINDOW,
    q_order: int = 4,
    derivative: Callable | None = None,
    samples: int = 4001,
    name: str = "custom",
    gamma: float | None = None,
) -> PressureLaw:
    """Derive ``beta``, ``alpha1``, ``alpha2`` and ``Q`` for a pressure law.

    ``alpha1``/``alpha2`` use a dense sampling of ``p'(s)/s`` on the closed
    window (the closure gives the inf/sup of the open interval for continuous
    ``p'``).  ``Q`` uses ``derivative(k, s)`` when supplied and finite
    differences otherwise.

    Raises:
        PressureLawError: if ``p' <= 0`` somewhere on the sampled window.
    """
    if dp is None:
        def dp(s, _p=p):
            h = 1e-5
            return (_p(s + h) - _p(s - h)) / (2 * h)
    lo, hi = window
    s = np.linspace(lo, hi, samples)
    slope = np.asarray(dp(s), dtype=float)
    if np.any(slope <= 0) or not np.all(np.isfinite(slope)):
        raise PressureLawError(f"p' must be positive on {window}; min sampled p' = {slope.min():.6g}")
    ratio = slope / s
    alpha1 = min(float(ratio.min()), 0.5)
    alpha2 = max(float(ratio.max()), 1.5)
    beta = float(dp(1.0))
    if derivative is not None:
        Q = max(float(np.max(np.abs(derivative(k, s)))) for k in range(q_order + 1))
    else:
        h = 1e-2
        inner = s[(s - lo > q_order * h) & (hi - s > q_order * h)]
        Q = max(float(np.max(np.abs(_fd_derivative(p, inner, k, h)))) for k in range(q_order + 1))
    return PressureLaw(p=p, dp=dp, beta=beta, alpha1=alpha1, alpha2=alpha2, Q=Q, q_order=q_order,
                       window=window, derivative=derivative, name=name, gamma=gamma)


def power_law(gamma: float = 1.4, q_order: int = 4, window: tuple[float, float] = WINDOW) -> PressureLaw:
    """``p(rho) = rho**gamma`` with exact derivatives."""
    if gamma <= 0:
        raise PressureLawError("gamma must be positive")

    def p(s):
        return np.asarray(s, dtype=float) ** gamma

    def dp(s):
        return gamma * np.asarray(s, dtype=float) ** (gamma - 1.0)

    def derivative(k, s):
        c = 1.0
        for i in range(k):
            c *= gamma - i
        return c * np.asarray(s, dtype=float) ** (gamma - k)

    return pressure_constants(p, dp, window=window, q_order=q_order, derivative=derivative,
                              name=f"power(gamma={gamma!r})", gamma=float(gamma))
