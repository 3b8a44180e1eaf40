"""Energy functionals, identity residuals and decay fits along a trajectory.

All functionals are evaluated on the collocation grid: weights such as
``sqrt(p'(rho)/rho)`` are applied pointwise to inverse-transformed fields and
integrated by the grid mean, unweighted quadratic terms use Parseval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .pressure import PressureLaw
from .solver import check_window, remainders
from .spectral import (
    TWO_PI,
    OperatorSpec,
    SpectralField,
    VectorSpectralField,
    apply_operator,
    inner,
    inverse_hermitian,
    lambda_multiplier,
    sobolev_weight,
)
from .state import PerturbationState

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "t",
    "E_phys",
    "dissipation",
    "E_0",
    "E_1",
    "E_3",
    "E_N_cfg",
    "X_tilde",
    "cross1",
    "cross2",
    "cross3",
    "X",
    "mass_residual",
    "momentum_residual_x",
    "momentum_residual_y",
    "momentum_residual_z",
    "mean_h_residual_x",
    "mean_h_residual_y",
    "mean_h_residual_z",
    "div_h_L2",
    "rho_min",
    "rho_max",
)

# centred first-derivative stencils, offsets -m..m
_STENCILS = {
    2: np.array([-1.0, 0.0, 1.0]) / 2.0,
    4: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
    6: np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0,
    8: np.array([3.0, -32.0, 168.0, -672.0, 0.0, 672.0, -168.0, 32.0, -3.0]) / 840.0,
}


# --------------------------------------------------------------------------
# Orders
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderParams:
    """Regularity indices ``L, M, N, d`` and the Diophantine exponent ``r``.

    Outside ``relaxed`` mode the constructor enforces
    ``r + 3 <= L <= M - r - 1``, ``M <= N - r - 2`` and ``d > 2 (N + r - L)``.
    Relaxed mode only requires the multiplier exponents ``L - r`` and
    ``M - r - 1`` to be nonnegative; it is meant for cheap, readable
    experiments and is not the proven regime.
    """

    L: int
    M: int
    N: int
    d: int
    r: float
    relaxed: bool = False

    def __post_init__(self):
        for name in ("L", "M", "N", "d"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not math.isfinite(self.r):
            raise ValueError("r must be finite")
        if self.relaxed:
            if self.L - self.r < 0 or self.M - self.r - 1 < 0:
                raise ValueError("relaxed orders still need L - r >= 0 and M - r - 1 >= 0")
        else:
            bad = self.violations()
            if bad:
                raise ValueError("orders violate " + "; ".join(bad) + " (use relaxed=True for small orders)")

    def violations(self) -> list[str]:
        L, M, N, d, r = self.L, self.M, self.N, self.d, self.r
        out = []
        if not r + 3 <= L:
            out.append(f"r + 3 <= L ({r + 3} > {L})")
        if not L <= M - r - 1:
            out.append(f"L <= M - r - 1 ({L} > {M - r - 1})")
        if not M <= N - r - 2:
            out.append(f"M <= N - r - 2 ({M} > {N - r - 2})")
        if not d > 2 * (N + r - L):
            out.append(f"d > 2(N + r - L) ({d} <= {2 * (N + r - L)})")
        return out

    @classmethod
    def relaxed_default(cls) -> OrderParams:
        """``L=1, M=2, N=3, d=7, r=1`` (smallest ``d`` with ``d > 2(N + r - L)``)."""
        return cls(1, 2, 3, 7, 1.0, relaxed=True)

    @classmethod
    def minimal(cls, r: float = 3.0) -> OrderParams:
        """Smallest admissible orders for a given ``r``."""
        L = math.ceil(r + 3)
        M = math.ceil(L + r + 1)
        N = math.ceil(M + r + 2)
        d = math.floor(2 * (N + r - L)) + 1
        return cls(L, M, N, d, r)

    @property
    def cross1_order(self) -> float:
        return self.M - self.r - 1

    @property
    def low_order(self) -> float:
        """``L - r``, the order of the dissipated energy."""
        return self.L - self.r

    @property
    def decay_exponent(self) -> float:
        """``d / (N + r - L)``."""
        return self.d / (self.N + self.r - self.L)


# --------------------------------------------------------------------------
# Energies
# --------------------------------------------------------------------------


def _samples(state: PerturbationState):
    phys = inverse_hermitian(state.stack())
    return phys[0], phys[1:4], phys[4:7]


def physical_energy(state: PerturbationState, pressure: PressureLaw) -> float:
    """``1/2 int (rho |u|^2 + |h|^2 + e(rho))`` by grid quadrature."""
    a, u, h = _samples(state)
    rho = 1.0 + a
    dens = rho * np.sum(u * u, axis=0) + np.sum(h * h, axis=0) + pressure.e(rho)
    return 0.5 * float(np.mean(dens))


def dissipation(state: PerturbationState) -> float:
    """``int |grad h|^2``."""
    k2 = TWO_PI**2 * state.grid.k_squared
    return float(np.sum(k2 * np.sum(np.abs(state.h.coeffs) ** 2, axis=0)))


def sobolev_energy(state: PerturbationState, j: float) -> float:
    """``E_j = |a|_j^2 + |u|_j^2 + |h|_j^2`` with inhomogeneous norms."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    power = np.sum(np.abs(state.stack()) ** 2, axis=0)
    return float(np.sum(sobolev_weight(state.grid, j) * power))


def weighted_energy(state: PerturbationState, pressure: PressureLaw, N: int, window=None) -> float:
    """``int e(rho) + sum_{s=1..N} |sqrt(p'/rho) L^s a|^2 + sum_{s=0..N} (|sqrt(rho) L^s u|^2 + |L^s h|^2)``.

    ``L^s`` is ``Lambda^s``; ``Lambda^0`` is the identity.

    Raises:
        PositivityError: if ``rho`` leaves ``window`` (the pressure window by default).
    """
    grid = state.grid
    window = pressure.window if window is None else window
    a_c, u_c, h_c = state.a.coeffs, state.u.coeffs, state.h.coeffs
    lam = [lambda_multiplier(grid, s) for s in range(N + 1)]
    spec = np.concatenate([[a_c] + [lam[s] * a_c for s in range(1, N + 1)]]
                          + [lam[s] * u_c for s in range(N + 1)])
    phys = inverse_hermitian(spec)
    rho = 1.0 + phys[0]
    check_window(rho, window, "weighted energy", state.time)
    total = float(np.mean(pressure.e(rho)))
    if N >= 1:
        total += float(np.mean(pressure.enthalpy_weight(rho) * np.sum(phys[1 : N + 1] ** 2, axis=0)))
    total += float(np.mean(rho * np.sum(phys[N + 1 :] ** 2, axis=0)))
    lam2 = sum(m**2 for m in lam)
    total += float(np.sum(lam2 * np.sum(np.abs(h_c) ** 2, axis=0)))
    return total


@dataclass(frozen=True)
class CrossTerms:
    cross1: float
    cross2: float
    cross3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cross1, self.cross2, self.cross3])


def cross_functionals(state: PerturbationState, w, orders: OrderParams) -> CrossTerms:
    """The three sign-indefinite functionals.

    ``cross1 = int L^q div u L^q a`` with ``q = M - r - 1``;
    ``cross2 = int (w.grad) L^L h . L^L u``;
    ``cross3 = int div_w L^M (u x w) L^M a + L^M (h.w) div L^M u``.
    """
    if not isinstance(orders, OrderParams):
        raise TypeError("orders must be an OrderParams")
    w = np.asarray(w, dtype=float)
    grid = state.grid
    a, u, h = state.a, state.u, state.h
    if not np.any(w):
        c2 = 0.0
        c3 = 0.0
    else:
        wt = tuple(w)
        LL = OperatorSpec("lambda", s=float(orders.L))
        c2 = inner(apply_operator(apply_operator(h, LL), OperatorSpec("w_dot_grad", w=wt)), apply_operator(u, LL))
        LM = OperatorSpec("lambda", s=float(orders.M))
        uxw = VectorSpectralField(grid, np.stack([
            u.coeffs[1] * w[2] - u.coeffs[2] * w[1],
            u.coeffs[2] * w[0] - u.coeffs[0] * w[2],
            u.coeffs[0] * w[1] - u.coeffs[1] * w[0],
        ]))
        hw = SpectralField(grid, np.tensordot(w, h.coeffs, axes=1))
        div_u = apply_operator(u, OperatorSpec("divergence"))
        c3 = inner(apply_operator(apply_operator(uxw, LM), OperatorSpec("div_w", w=wt)), apply_operator(a, LM)) \
            + inner(apply_operator(hw, LM), apply_operator(div_u, LM))
    Lq = OperatorSpec("lambda", s=float(orders.cross1_order))
    div_u = apply_operator(u, OperatorSpec("divergence"))
    c1 = inner(apply_operator(div_u, Lq), apply_operator(a, Lq))
    return CrossTerms(float(c1), float(c2), float(c3))


# --------------------------------------------------------------------------
# Composite functional
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositeReport:
    X: float
    X_tilde: float
    E_N: float
    cross: CrossTerms
    delta_star: float
    lower: float
    upper: float

    @property
    def bracket_ok(self) -> bool:
        return self.E_N == 0 or self.lower <= self.X <= self.upper


def bracket_holds(X, E_N, alpha1: float, alpha2: float) -> np.ndarray:
    """``alpha1/2 E_N <= X <= 2 alpha2 E_N`` elementwise (trivially true when ``E_N = 0``)."""
    X = np.asarray(X, dtype=float)
    E_N = np.asarray(E_N, dtype=float)
    return (E_N == 0) | ((0.5 * alpha1 * E_N <= X) & (X <= 2.0 * alpha2 * E_N))


def shrink_delta(X_tilde, cross, E_N, alpha1: float, alpha2: float, weights=(1.0, 1.0, 1.0),
                 start: float = 1.0, max_halvings: int = 200) -> float:
    """Largest ``start * 2^-j`` for which the composite bracket holds at every sample.

    Raises:
        RuntimeError: if no admissible value is found (the bracket already
            fails at ``delta = 0``).
    """
    X_tilde = np.atleast_1d(np.asarray(X_tilde, dtype=float))
    cross = np.atleast_2d(np.asarray(cross, dtype=float))
    combo = cross @ np.asarray(weights, dtype=float)
    if not np.all(bracket_holds(X_tilde, E_N, alpha1, alpha2)):
        raise RuntimeError("bracket fails even without cross terms")
    delta = float(start)
    for _ in range(max_halvings):
        if np.all(bracket_holds(X_tilde + delta * combo, E_N, alpha1, alpha2)):
            return delta
        delta *= 0.5
    raise RuntimeError("no admissible delta_star found")


def composite_X(state: PerturbationState, pressure: PressureLaw, w, orders: OrderParams,
                delta_star: float | str = "auto", weights=(1.0, 1.0, 1.0), start: float = 1.0) -> CompositeReport:
    """``X = X_tilde + delta (w1 cross1 + w2 cross2 + w3 cross3)`` and its bracket.

    With ``delta_star="auto"`` the value is halved from ``start`` until
    ``alpha1/2 E_N <= X <= 2 alpha2 E_N`` holds on this state.
    """
    Xt = weighted_energy(state, pressure, orders.N)
    cr = cross_functionals(state, w, orders)
    E_N = sobolev_energy(state, orders.N)
    if delta_star == "auto":
        delta = shrink_delta(Xt, cr.as_array(), E_N, pressure.alpha1, pressure.alpha2, weights, start)
    else:
        delta = float(delta_star)
        if delta < 0:
            raise ValueError("delta_star must be nonnegative")
    X = Xt + delta * float(np.dot(weights, cr.as_array()))
    return CompositeReport(X, Xt, E_N, cr, delta, 0.5 * pressure.alpha1 * E_N, 2.0 * pressure.alpha2 * E_N)


# --------------------------------------------------------------------------
# Time-derivative checks
# --------------------------------------------------------------------------


def _uniform_step(times) -> float:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) < 3:
        raise ValueError("need at least three samples")
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(dt, abs(t[-1])):
        raise ValueError("samples must be uniformly spaced in time")
    return dt


def centred_derivative(times, values, order: int = 6):
    """Centred finite-difference derivative on uniform samples.

    The stencil order is reduced to what the sample count allows.  Returns
    ``(interior_index, derivative)``, where ``interior_index`` selects the
    samples the derivative belongs to.
    """
    dt = _uniform_step(times)
    v = np.asarray(values, dtype=float)
    if order not in _STENCILS:
        raise ValueError(f"order must be one of {sorted(_STENCILS)}")
    while len(v) < order + 1:
        order -= 2
    c = _STENCILS[order]
    m = order // 2
    n = len(v)
    d = sum(c[j] * v[j : n - 2 * m + j] for j in range(2 * m + 1)) / dt
    return np.arange(m, n - m), d


@dataclass(frozen=True)
class IdentityReport:
    """Residual of ``dE/dt + D = 0`` on the interior samples."""

    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    dEdt: np.ndarray
    residual: np.ndarray
    relative: np.ndarray

    @property
    def max_relative(self) -> float:
        return float(np.max(self.relative)) if self.relative.size else 0.0


def energy_identity(times, energy, diss, order: int = 6) -> IdentityReport:
    """Compare the differenced energy with the dissipation, sample by sample."""
    idx, dE = centred_derivative(times, energy, order)
    D = np.asarray(diss, dtype=float)[idx]
    res = dE + D
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(D > 0, np.abs(res) / np.where(D > 0, D, 1.0), np.where(res == 0, 0.0, np.inf))
    t = np.asarray(times, dtype=float)
    return IdentityReport(t[idx], np.asarray(energy, dtype=float)[idx], D, dE, res, rel)


def physical_energy_and_identity(states: Sequence[PerturbationState], pressure: PressureLaw,
                                 order: int = 6) -> IdentityReport:
    """Energy identity residual over a uniformly sampled trajectory."""
    times = [s.time for s in states]
    E = [physical_energy(s, pressure) for s in states]
    D = [dissipation(s) for s in states]
    return energy_identity(times, E, D, order)


class IdentityMonitor:
    """Run callback recording ``E_phys`` and the dissipation at every call."""

    def __init__(self, pressure: PressureLaw, cadence: int = 1):
        self.pressure = pressure
        self.cadence = cadence
        self.times: list[float] = []
        self.energy: list[float] = []
        self.dissipation: list[float] = []

    def __call__(self, state: PerturbationState, step: int) -> None:
        self.times.append(float(state.time))
        self.energy.append(physical_energy(state, self.pressure))
        self.dissipation.append(dissipation(state))

    def identity(self, order: int = 6) -> IdentityReport:
        return energy_identity(self.times, self.energy, self.dissipation, order)


@dataclass(frozen=True)
class MonitorReport:
    """``dX/dt + margin E_low`` on the interior samples."""

    times: np.ndarray
    dXdt: np.ndarray
    E_low: np.ndarray
    margin: float
    series: np.ndarray
    violations: int
    empirical_margin: float

    @property
    def positive(self) -> bool:
        return self.empirical_margin > 0


def dissipation_monitor(times, X, E_low, margin: float = 0.0, order: int = 6, skip: int = 0) -> MonitorReport:
    """Check ``dX/dt + margin E_low <= 0`` and report the largest admissible margin.

    ``skip`` drops that many leading interior samples (an initial transient).
    The empirical margin is ``min(-dX/dt / E_low)`` over samples with
    ``E_low > 0``; it is the largest constant for which the inequality holds
    at every retained sample.
    """
    idx, dX = centred_derivative(times, X, order)
    idx, dX = idx[skip:], dX[skip:]
    El = np.asarray(E_low, dtype=float)[idx]
    series = dX + margin * El
    pos = El > 0
    emp = float(np.min(-dX[pos] / El[pos])) if np.any(pos) else math.inf
    if np.any(~pos & (dX > 0)):
        emp = -math.inf
    t = np.asarray(times, dtype=float)[idx]
    return MonitorReport(t, dX, El, float(margin), series, int(np.sum(series > 0)), emp)


# --------------------------------------------------------------------------
# Per-sample reports
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    """All diagnostics of one snapshot.  ``X`` depends on ``delta_star``."""

    time: float
    E_phys: float
    dissipation: float
    E: dict = field(repr=False)
    E_N: float
    X_tilde: float
    cross: CrossTerms
    X: float
    delta_star: float
    mass_residual: float
    momentum_residual: tuple[float, float, float]
    mean_h_residual: tuple[float, float, float]
    div_h_L2: float
    rho_min: float
    rho_max: float
    h_energy: float = 0.0

    def with_delta(self, delta_star: float, weights=(1.0, 1.0, 1.0)) -> EnergyReport:
        X = self.X_tilde + delta_star * float(np.dot(weights, self.cross.as_array()))
        return replace(self, X=X, delta_star=float(delta_star))

    def row(self) -> tuple[float, ...]:
        c = self.cross
        return (self.time, self.E_phys, self.dissipation, self.E[0], self.E[1], self.E[3], self.E_N, self.X_tilde,
                c.cross1, c.cross2, c.cross3, self.X, self.mass_residual, *self.momentum_residual,
                *self.mean_h_residual, self.div_h_L2, self.rho_min, self.rho_max)


def energy_report(state: PerturbationState, pressure: PressureLaw, w, orders: OrderParams,
                  delta_star: float = 0.0, weights=(1.0, 1.0, 1.0)) -> EnergyReport:
    """Evaluate every monitored quantity on one state."""
    grid = state.grid
    a, u, h = _samples(state)
    rho = 1.0 + a
    rmin, rmax = check_window(rho, pressure.window, "diagnostics", state.time)
    E_phys = 0.5 * float(np.mean(rho * np.sum(u * u, axis=0) + np.sum(h * h, axis=0) + pressure.e(rho)))
    power = np.sum(np.abs(state.stack()) ** 2, axis=0)
    E = {j: float(np.sum(sobolev_weight(grid, j) * power)) for j in (0, 1, 3)}
    E_N = float(np.sum(sobolev_weight(grid, orders.N) * power))
    Xt = weighted_energy(state, pressure, orders.N)
    cr = cross_functionals(state, w, orders)
    X = Xt + delta_star * float(np.dot(weights, cr.as_array()))
    kx, ky, kz = grid.k_odd
    hc = state.h.coeffs
    div_h = TWO_PI * math.sqrt(float(np.sum(np.abs(kx * hc[0] + ky * hc[1] + kz * hc[2]) ** 2)))
    momentum = tuple(float(x) for x in np.mean(rho * u, axis=(1, 2, 3)))
    mean_h = tuple(float(x) for x in hc[:, 0, 0, 0].real)
    return EnergyReport(
        time=float(state.time), E_phys=E_phys, dissipation=dissipation(state), E=E, E_N=E_N, X_tilde=Xt,
        cross=cr, X=X, delta_star=float(delta_star), mass_residual=float(np.mean(rho) - 1.0),
        momentum_residual=momentum, mean_h_residual=mean_h, div_h_L2=div_h, rho_min=rmin, rho_max=rmax,
        h_energy=0.5 * float(np.mean(np.sum(h * h, axis=0))),
    )


class EnergyMonitor:
    """Run callback collecting :class:`EnergyReport` objects.

    ``X`` is recorded with ``delta_star = 0``; apply a run-wide value
    afterwards with :meth:`with_delta` or :meth:`auto_delta`.
    """

    def __init__(self, pressure: PressureLaw, w, orders: OrderParams, cadence: int | None = None,
                 weights=(1.0, 1.0, 1.0)):
        self.pressure = pressure
        self.w = tuple(float(x) for x in w)
        self.orders = orders
        self.cadence = cadence
        self.weights = tuple(float(x) for x in weights)
        self.delta_star = 0.0
        self.reports: list[EnergyReport] = []

    def __call__(self, state: PerturbationState, step: int) -> None:
        self.reports.append(energy_report(state, self.pressure, self.w, self.orders, 0.0, self.weights))

    def series(self, name: str) -> np.ndarray:
        col = CSV_COLUMNS.index(name)
        return np.array([r.row()[col] for r in self.reports])

    def auto_delta(self, start: float = 1.0) -> float:
        r = self.reports
        return shrink_delta([x.X_tilde for x in r], [x.cross.as_array() for x in r], [x.E_N for x in r],
                            self.pressure.alpha1, self.pressure.alpha2, self.weights, start)

    def with_delta(self, delta_star: float) -> list[EnergyReport]:
        return [r.with_delta(delta_star, self.weights) for r in self.reports]


# --------------------------------------------------------------------------
# Decay fit
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``E(t) = C (1 + alpha t)^-p`` in log space."""

    C: float
    alpha: float
    p: float
    residual: float
    window: tuple[float, float]
    degenerate: bool = False
    converged: bool = True


def _edge_slope(t, y, frac=0.1):
    m = max(2, int(round(frac * len(t))))
    return float(np.polyfit(t[:m], y[:m], 1)[0]), float(np.polyfit(t[-m:], y[-m:], 1)[0])


def decay_fit(times, energy, window: tuple[float, float] | None = None) -> DecayFit:
    """Fit ``log E = log C - p log(1 + alpha t)``.

    Initialisation is deterministic: the log-slopes at both ends of the
    window fix ``alpha`` and ``p`` of the model exactly when the data follow
    it.  A constant series is reported as degenerate with ``p = 0``.

    Raises:
        ValueError: with fewer than 8 samples, non-increasing times or a
            nonpositive energy.
    """
    t = np.asarray(times, dtype=float)
    E = np.asarray(energy, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, E = t[keep], E[keep]
    if len(t) < 8:
        raise ValueError("decay_fit needs at least 8 samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if np.any(~np.isfinite(E)) or np.any(E <= 0):
        raise ValueError("energies must be positive and finite")
    if t[0] < 0:
        raise ValueError("times must be nonnegative")
    win = (float(t[0]), float(t[-1]))
    y = np.log(E)
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return DecayFit(float(np.exp(np.mean(y))), 0.0, 0.0, float(np.sqrt(np.mean((y - np.mean(y)) ** 2))), win,
                        degenerate=True)

    s0, s1 = _edge_slope(t, y)
    t0, t1 = t[0], t[-1]
    alpha0 = p0 = None
    if s0 < 0 and s1 < 0:
        R = s0 / s1
        if R > 1 and t1 - R * t0 > 0:
            alpha0 = (R - 1.0) / (t1 - R * t0)
            p0 = -s0 * (1.0 + alpha0 * t0) / alpha0
    if alpha0 is None:
        alpha0 = 1.0 / max(t1 - t0, 1e-12)
        growth = math.log((1.0 + alpha0 * t1) / (1.0 + alpha0 * t0))
        p0 = max((y[0] - y[-1]) / growth, 0.0)
    logC0 = y[0] + p0 * math.log1p(alpha0 * t0)

    def resid(x):
        return x[0] - x[2] * np.log1p(x[1] * t) - y

    sol = optimize.least_squares(resid, x0=[logC0, alpha0, p0], bounds=([-np.inf, 0.0, 0.0], [np.inf, np.inf, np.inf]),
                                 method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    logC, alpha, p = sol.x
    res = float(np.sqrt(np.mean(sol.fun**2)))
    return DecayFit(float(np.exp(logC)), float(alpha), float(p), res, win, converged=bool(sol.success))


def interpolation_ratio(state: PerturbationState, orders: OrderParams) -> float:
    """``E_N / (E_{L-r}^theta E_{N+d}^(1-theta))`` with ``theta = d / (N + d + r - L)``.

    Hoelder in multiplier space bounds this by 1.
    """
    lo = orders.low_order
    span = orders.N + orders.d + orders.r - orders.L
    theta = orders.d / span
    E_lo = sobolev_energy(state, lo)
    E_hi = sobolev_energy(state, orders.N + orders.d)
    E_N = sobolev_energy(state, orders.N)
    if E_N == 0:
        return 0.0
    return E_N / (E_lo**theta * E_hi ** (1.0 - theta))


# --------------------------------------------------------------------------
# Remainder statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RemainderRatios:
    """Size of the nonlinear remainders on one state.

    ``bound`` divides ``|R_i|_l`` by the product of norms in the quadratic
    estimate and stays bounded as the amplitude shrinks.  ``linear`` divides
    by a single norm ``|.|_{l+1}`` and shrinks in proportion to the amplitude.
    """

    bound: tuple[float, float, float]
    linear: tuple[float, float, float]


def _norm(coeffs: np.ndarray, grid, s: float) -> float:
    power = np.abs(coeffs) ** 2
    if power.ndim == 4:
        power = np.sum(power, axis=0)
    return math.sqrt(float(np.sum(sobolev_weight(grid, s) * power)))


def remainder_ratios(state: PerturbationState, config, l: int = 1) -> RemainderRatios:
    """Measure ``R1, R2, R3`` against the norms of the fields they are built from.

    ``R1`` is compared with ``|a,u|``, ``R3`` with ``|u,h|`` and ``R2`` with
    ``|a,u,h|``; the low factor of the quadratic bound is taken at order 2 for
    ``R1, R2`` and 3 for ``R3``.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    grid = state.grid
    rem = remainders(state, config)
    st = state.stack()
    au, uh = st[0:4], st[1:7]
    out_b, out_l = [], []
    for R, fields, low in ((rem.R1.coeffs, au, 2), (rem.R2.coeffs, st, 2), (rem.R3.coeffs, uh, 3)):
        top = _norm(R, grid, l)
        hi = _norm(fields, grid, l + 1)
        lo = _norm(fields, grid, low)
        out_b.append(top / (lo * hi) if lo * hi > 0 else 0.0)
        out_l.append(top / hi if hi > 0 else 0.0)
    return RemainderRatios(tuple(out_b), tuple(out_l))
