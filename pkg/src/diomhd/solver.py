"""Pseudo-spectral integration of the nonlinear perturbation system.

The state ``(a, u, h)`` evolves as

    a_t = -div((1 + a) u)
    u_t = -(u.grad) u - p'(rho) grad(a) / rho + (curl h) x (w + h) / rho
    h_t = curl(u x (w + h)) + nu Lap h

Nonlinear terms are formed on the physical grid with the 2/3 rule, division
by ``rho`` is pointwise, and the resistive Laplacian is integrated exactly by
an integrating-factor (Lawson) fourth-order Runge-Kutta scheme.  Internally
the integrator works on real-FFT half spectra; the public API exchanges
full-spectrum :class:`PerturbationState` objects.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .diophantine import DioVector
from .pressure import WINDOW, PressureLaw, power_law
from .spectral import (
    TWO_PI,
    Grid3,
    SpectralField,
    VectorSpectralField,
    band_limited_random,
    dealias,
    leray_project,
)
from .state import PerturbationState

logger = logging.getLogger(__name__)

# stability interval of classical RK4 on the imaginary axis
RK4_IMAGINARY_BOUND = 2.0 * math.sqrt(2.0)
# auto dt keeps this fraction of the initial CFL bound as headroom
AUTO_DT_SAFETY = 0.9


class SolverError(RuntimeError):
    """Base class for failures that end a run."""

    reason = "solver"


class PositivityError(SolverError):
    """``rho`` left the positivity window."""

    reason = "positivity"

    def __init__(self, rho_min: float, rho_max: float, window, stage: str = "", time: float = float("nan")):
        self.rho_min = float(rho_min)
        self.rho_max = float(rho_max)
        self.window = tuple(window)
        self.stage = stage
        self.time = float(time)
        where = f" at {stage}" if stage else ""
        super().__init__(
            f"rho in [{self.rho_min:.6g}, {self.rho_max:.6g}] leaves the window {self.window}{where} (t={self.time:.6g})"
        )


class CFLError(SolverError):
    """The fixed time step exceeds the current CFL bound."""

    reason = "cfl"

    def __init__(self, dt: float, limit: float, time: float):
        self.dt = dt
        self.limit = limit
        self.time = time
        super().__init__(f"dt={dt:.6g} exceeds the CFL bound {limit:.6g} at t={time:.6g}")


class InstabilityError(SolverError):
    """Non-finite values appeared in the state."""

    reason = "instability"


def _as_w(w) -> tuple[float, float, float]:
    if isinstance(w, DioVector):
        return w.w
    arr = np.asarray(w, dtype=float).ravel()
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"w must be a finite 3-vector, got {w!r}")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    Attributes:
        n: grid size per axis.
        t_end: final time.
        dt: fixed step, or ``"auto"`` for a uniform step derived from the
            CFL bound of the initial state.
        nu: resistivity.
        pressure: barotropic pressure law.
        w: background magnetic field (a :class:`DioVector` or any 3-vector,
            zero allowed for the non-magnetised comparison).
        cfl_number: Courant number in ``(0, 1)``.
        positivity_window: open interval that ``rho`` must stay in.
        seed: seed for random initial data.
        cadence: default callback cadence in steps.
    """

    n: int = 32
    t_end: float = 1.0
    dt: float | str = "auto"
    nu: float = 1.0
    pressure: PressureLaw = field(default_factory=power_law)
    w: tuple[float, float, float] = field(default_factory=lambda: DioVector.default(2.0).w)
    cfl_number: float = 0.4
    positivity_window: tuple[float, float] = WINDOW
    seed: int = 0
    cadence: int = 1

    def __post_init__(self):
        object.__setattr__(self, "w", _as_w(self.w))
        if self.dt != "auto":
            dt = float(self.dt)
            if not dt > 0 or not math.isfinite(dt):
                raise ValueError(f"dt must be positive or 'auto', got {self.dt!r}")
            object.__setattr__(self, "dt", dt)
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end!r}")
        if not 0 < self.cfl_number < 1:
            raise ValueError(f"cfl_number must lie in (0, 1), got {self.cfl_number!r}")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        lo, hi = self.positivity_window
        if not 0 < lo < 1 < hi:
            raise ValueError(f"positivity window must bracket 1, got {self.positivity_window!r}")
        if int(self.cadence) < 1:
            raise ValueError("cadence must be at least 1")
        Grid3(self.n)

    @property
    def grid(self) -> Grid3:
        return Grid3(self.n)


@dataclass(frozen=True)
class Tendency:
    """Time derivatives of ``(a, u, h)``."""

    da: SpectralField
    du: VectorSpectralField
    dh: VectorSpectralField

    def stack(self) -> np.ndarray:
        return np.concatenate([self.da.coeffs[None], self.du.coeffs, self.dh.coeffs])


# --------------------------------------------------------------------------
# Initial data
# --------------------------------------------------------------------------


def _as_scalar(grid: Grid3, f) -> SpectralField:
    if isinstance(f, SpectralField):
        return f
    if f is None:
        return SpectralField.zeros(grid)
    return SpectralField.from_samples(grid, f)


def _as_vector(grid: Grid3, f) -> VectorSpectralField:
    if isinstance(f, VectorSpectralField):
        return f
    if f is None:
        return VectorSpectralField.zeros(grid)
    return VectorSpectralField.from_samples(grid, f)


def check_window(rho: np.ndarray, window, stage: str = "", time: float = float("nan")) -> tuple[float, float]:
    """Return ``(min rho, max rho)`` or raise :class:`PositivityError`."""
    lo, hi = window
    rmin, rmax = float(np.min(rho)), float(np.max(rho))
    if not (np.isfinite(rmin) and np.isfinite(rmax)):
        raise InstabilityError(f"non-finite density at {stage or 'state'} (t={time:.6g})")
    if not (lo < rmin and rmax < hi):
        raise PositivityError(rmin, rmax, window, stage, time)
    return rmin, rmax


def prepare_initial_data(grid: Grid3, a0=None, u0=None, h0=None, window=WINDOW) -> PerturbationState:
    """Impose the mean constraints on raw initial data.

    Raw fields may be spectral fields or physical samples.  Content outside
    the dealiased band is removed first; then ``a`` and ``h`` are centred,
    ``h`` is made divergence free and ``u`` is shifted by a constant so that
    the grid mean of ``rho u`` vanishes.

    Raises:
        PositivityError: if ``rho = 1 + a`` leaves ``window`` after centring.
    """
    a = dealias(_as_scalar(grid, a0)).coeffs.copy()
    u = dealias(_as_vector(grid, u0)).coeffs.copy()
    h = dealias(_as_vector(grid, h0)).coeffs.copy()
    a[0, 0, 0] = 0.0
    h[:, 0, 0, 0] = 0.0
    h = leray_project(VectorSpectralField(grid, h)).coeffs
    a_field = SpectralField(grid, a)
    rho = 1.0 + a_field.to_samples()
    check_window(rho, window, stage="initial data")
    u_samples = VectorSpectralField(grid, u).to_samples()
    momentum = np.mean(rho * u_samples, axis=(1, 2, 3))
    u[:, 0, 0, 0] -= momentum / np.mean(rho)
    return PerturbationState(a_field, VectorSpectralField(grid, u), VectorSpectralField(grid, h))


def random_initial_data(grid: Grid3, amplitude: float, seed: int = 0, k_max: float = 2.0,
                        window=WINDOW) -> PerturbationState:
    """Band-limited random data with each of ``a, u, h`` at grid rms ``amplitude``.

    Modes with ``0 < |k| <= k_max`` are populated from white noise.  ``h`` is
    projected before scaling, so its rms is exactly ``amplitude`` too.
    """
    rng = np.random.default_rng(seed)
    a = band_limited_random(grid, rng, k_max)
    u = band_limited_random(grid, rng, k_max, 3)
    h = leray_project(VectorSpectralField(grid, band_limited_random(grid, rng, k_max, 3))).coeffs

    def scale(c):
        rms = math.sqrt(float(np.sum(np.abs(c) ** 2)) / (c.shape[0] if c.ndim == 4 else 1))
        return c * (amplitude / rms) if rms > 0 else c

    return prepare_initial_data(grid, SpectralField(grid, scale(a)), VectorSpectralField(grid, scale(u)),
                                VectorSpectralField(grid, scale(h)), window)


# --------------------------------------------------------------------------
# Half-spectrum kernel
# --------------------------------------------------------------------------


def _cross(x, y):
    return np.stack([
        x[1] * y[2] - x[2] * y[1],
        x[2] * y[0] - x[0] * y[2],
        x[0] * y[1] - x[1] * y[0],
    ])


class _Kernel:
    """Right-hand side and integrator on ``rfftn`` half spectra of shape ``(..., n, n, n/2+1)``."""

    def __init__(self, grid: Grid3, config: SolverConfig):
        self.grid = grid
        self.config = config
        n = grid.n
        self.n = n
        self.m = n // 2 + 1
        self.norm = float(n) ** 3
        self.w = np.array(config.w, dtype=float)
        self.pressure = config.pressure
        self.window = config.positivity_window
        kx, ky, kz = (np.broadcast_to(c, grid.shape)[..., : self.m] for c in grid.k_odd)
        self.ik = np.stack([1j * TWO_PI * kx, 1j * TWO_PI * ky, 1j * TWO_PI * kz])
        self.kodd = np.stack([kx, ky, kz])
        k2 = kx**2 + ky**2 + kz**2
        self.kodd2 = np.where(k2 > 0, k2, 1.0)
        self.mask = grid.dealias_mask[..., : self.m]
        self.kappa2 = TWO_PI**2 * grid.k_squared[..., : self.m]
        self.max_wavenumber = TWO_PI * float(np.sqrt(np.max(grid.k_squared[grid.dealias_mask])))
        self._factors: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        neg = (-np.arange(n)) % n
        self._neg = neg

    # transforms -----------------------------------------------------------

    def fwd(self, x: np.ndarray) -> np.ndarray:
        return sfft.rfftn(x, axes=(-3, -2, -1)) / self.norm

    def inv(self, c: np.ndarray) -> np.ndarray:
        return sfft.irfftn(c, s=(self.n,) * 3, axes=(-3, -2, -1)) * self.norm

    def to_half(self, full: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(full[..., : self.m])

    def to_full(self, half: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        out = np.empty(half.shape[:-1] + (n,), dtype=np.complex128)
        out[..., :m] = half
        mirror = np.take(np.take(half, self._neg, axis=-3), self._neg, axis=-2)
        out[..., m:] = np.conj(mirror[..., m - 2 : 0 : -1])
        return out

    # operators --------------------------------------------------------------

    def div(self, v):
        return self.ik[0] * v[0] + self.ik[1] * v[1] + self.ik[2] * v[2]

    def curl(self, v):
        i = self.ik
        return np.stack([i[1] * v[2] - i[2] * v[1], i[2] * v[0] - i[0] * v[2], i[0] * v[1] - i[1] * v[0]])

    def project(self, v):
        kd = (self.kodd[0] * v[0] + self.kodd[1] * v[1] + self.kodd[2] * v[2]) / self.kodd2
        return v - self.kodd * kd

    # physics ----------------------------------------------------------------

    def physical(self, y: np.ndarray, stage: str, time: float):
        """Grid values of ``a, u, h, grad a, curl u, curl h``; checks the window.

        ``y`` must already lie in the dealiased band.
        """
        ik = self.ik
        spec = np.empty((16,) + y.shape[1:], dtype=np.complex128)
        spec[:7] = y
        spec[7:10] = ik * y[0]
        for base, v in ((10, y[1:4]), (13, y[4:7])):
            spec[base] = ik[1] * v[2] - ik[2] * v[1]
            spec[base + 1] = ik[2] * v[0] - ik[0] * v[2]
            spec[base + 2] = ik[0] * v[1] - ik[1] * v[0]
        phys = self.inv(spec)
        rho = phys[0]
        rho += 1.0
        check_window(rho, self.window, stage, time)
        return phys, rho

    def _speed(self, phys, rho) -> float:
        u, h = phys[1:4], phys[4:7]
        H = h + self.w[:, None, None, None]
        umax = math.sqrt(float(np.max(np.einsum("i...,i...->...", u, u))))
        cmax = float(np.max(self.pressure.sound_speed(rho)))
        hmax = math.sqrt(float(np.max(np.einsum("i...,i...->...", H, H))))
        return umax + cmax + hmax

    def _limit(self, S: float) -> float:
        S = max(S, 1e-12)
        return min(self.config.cfl_number * self.grid.dx / S, RK4_IMAGINARY_BOUND / (S * self.max_wavenumber))

    def tendency(self, y: np.ndarray, stage: str = "", time: float = float("nan"), max_dt: float | None = None):
        """Explicit part of the right-hand side (everything except ``nu Lap h``).

        With ``max_dt`` set, the CFL bound of ``y`` is checked on the grid
        values already computed here.
        """
        phys, rho = self.physical(y, stage, time)
        if max_dt is not None:
            limit = self._limit(self._speed(phys, rho))
            if max_dt > limit * (1 + 1e-12):
                raise CFLError(max_dt, limit, time)
        u, h, grad_a, omega, J = phys[1:4], phys[4:7], phys[7:10], phys[10:13], phys[13:16]
        h += self.w[:, None, None, None]
        H = h
        inv_rho = 1.0 / rho
        stack = np.empty((10,) + rho.shape)
        stack[0:3] = u * rho
        # force = u x omega + (J x H - p'(rho) grad a) / rho
        grad_a *= self.pressure.dp(rho)
        lorentz = _cross(J, H)
        lorentz -= grad_a
        lorentz *= inv_rho
        lorentz += _cross(u, omega)
        stack[3:6] = lorentz
        stack[6] = 0.5 * np.einsum("i...,i...->...", u, u)
        stack[7:10] = _cross(u, H)
        spec = self.fwd(stack)
        spec *= self.mask
        ik = self.ik
        out = np.empty_like(y)
        out[0] = -(ik[0] * spec[0] + ik[1] * spec[1] + ik[2] * spec[2])
        out[1:4] = spec[3:6] - ik * spec[6]
        out[4:7] = self.project(self.curl(spec[7:10]))
        return out

    def factors(self, dt: float):
        if dt not in self._factors:
            E = np.exp(-self.config.nu * self.kappa2 * dt)
            E_half = np.exp(-self.config.nu * self.kappa2 * dt / 2)
            self._factors[dt] = (E, E_half)
        return self._factors[dt]

    def step(self, y: np.ndarray, dt: float, time: float, check_cfl: bool = False) -> np.ndarray:
        """One Lawson RK4 step; only ``h`` carries the integrating factor."""
        E, Eh = self.factors(dt)
        hs = slice(4, 7)
        k1 = self.tendency(y, "stage 1", time, dt if check_cfl else None)
        y2 = y + (0.5 * dt) * k1
        y2[hs] *= Eh
        k2 = self.tendency(y2, "stage 2", time + 0.5 * dt)
        yh = y.copy()
        yh[hs] *= Eh
        y3 = yh + (0.5 * dt) * k2
        k3 = self.tendency(y3, "stage 3", time + 0.5 * dt)
        k3[hs] *= Eh
        ye = y.copy()
        ye[hs] *= E
        y4 = ye + dt * k3
        k4 = self.tendency(y4, "stage 4", time + dt)
        # k3 already carries E_half
        k1[hs] *= E
        acc = k2
        acc[hs] *= Eh
        acc *= 2.0
        acc += k1
        acc += k4
        acc += 2.0 * k3
        new = ye + (dt / 6.0) * acc
        new[hs] = self.project(new[hs])
        new *= self.mask
        if not np.all(np.isfinite(new)):
            raise InstabilityError(f"non-finite state after step (t={time + dt:.6g})")
        return new

    def speed(self, y: np.ndarray) -> float:
        phys = self.inv(y[:7] * self.mask)
        rho = 1.0 + phys[0]
        return self._speed(phys, np.clip(rho, *self.window))

    def cfl_dt(self, y: np.ndarray) -> float:
        return self._limit(self.speed(y))

    # conversions ------------------------------------------------------------

    def pack(self, state: PerturbationState) -> np.ndarray:
        """Half spectrum of the state restricted to the dealiased band."""
        return self.to_half(state.stack()) * self.mask

    def unpack(self, y: np.ndarray, time: float) -> PerturbationState:
        return PerturbationState.from_stack(self.grid, self.to_full(y), time)


def _kernel(state: PerturbationState, config: SolverConfig) -> _Kernel:
    if state.grid.n != config.n:
        raise ValueError(f"state grid n={state.grid.n} does not match config n={config.n}")
    return _Kernel(state.grid, config)


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------


def rhs(state: PerturbationState, config: SolverConfig) -> Tendency:
    """Full right-hand side, including ``nu Lap h``."""
    ker = _kernel(state, config)
    y = ker.pack(state)
    out = ker.tendency(y, "rhs", state.time)
    out[4:7] -= config.nu * ker.kappa2 * (y[4:7] * ker.mask)
    full = ker.to_full(out)
    g = state.grid
    return Tendency(SpectralField(g, full[0]), VectorSpectralField(g, full[1:4]), VectorSpectralField(g, full[4:7]))


@dataclass(frozen=True)
class Remainders:
    """Nonlinear remainders and the velocity tendency they were built from."""

    R1: SpectralField
    R2: VectorSpectralField
    R3: VectorSpectralField
    u_t: VectorSpectralField


def remainders(state: PerturbationState, config: SolverConfig) -> Remainders:
    """Split the nonlinear terms off the linearisation about ``(1, 0, w)``.

    ``R1 = -div(a u)``, ``R3 = -(u.grad)h + (h.grad)u - h div u`` and
    ``R2 = -a u_t - (p'(rho) - p'(1)) grad a - rho (u.grad)u + (h.grad)h - grad|h|^2/2``
    are formed pointwise on the grid with ``u_t`` from the momentum equation,
    then transformed and truncated like the right-hand side.
    """
    grid = state.grid
    ker = _kernel(state, config)
    y = ker.pack(state) * ker.mask
    a, u, h = y[0], y[1:4], y[4:7]
    # gradient tensors: d_i u_j at [3*i + j]
    grad_u = (ker.ik[:, None] * u[None]).reshape((9,) + a.shape)
    grad_h = (ker.ik[:, None] * h[None]).reshape((9,) + a.shape)
    spec = np.concatenate([y, ker.ik * a, grad_u, grad_h, ker.curl(h)])
    phys = ker.inv(spec)
    rho = 1.0 + phys[0]
    check_window(rho, config.positivity_window, "remainders", state.time)
    A, U, Hh, grad_a = phys[0], phys[1:4], phys[4:7], phys[7:10]
    Du = phys[10:19].reshape((3, 3) + A.shape)
    Dh = phys[19:28].reshape((3, 3) + A.shape)
    J = phys[28:31]
    w = ker.w[:, None, None, None]
    u_grad_u = np.einsum("i...,ij...->j...", U, Du)
    u_grad_h = np.einsum("i...,ij...->j...", U, Dh)
    h_grad_u = np.einsum("i...,ij...->j...", Hh, Du)
    h_grad_h = np.einsum("i...,ij...->j...", Hh, Dh)
    grad_h2 = np.einsum("j...,ij...->i...", Hh, Dh)
    div_u = Du[0, 0] + Du[1, 1] + Du[2, 2]
    dp = config.pressure.dp(rho)
    beta = config.pressure.beta
    u_t = -u_grad_u + (_cross(J, Hh + w) - dp * grad_a) / rho
    R1 = -(A * div_u + np.sum(U * grad_a, axis=0))
    R2 = -A * u_t - (dp - beta) * grad_a - rho * u_grad_u + h_grad_h - grad_h2
    R3 = -u_grad_h + h_grad_u - Hh * div_u
    out = ker.fwd(np.concatenate([R1[None], R2, R3, u_t])) * ker.mask
    full = ker.to_full(out)
    return Remainders(SpectralField(grid, full[0]), VectorSpectralField(grid, full[1:4]),
                      VectorSpectralField(grid, full[4:7]), VectorSpectralField(grid, full[7:10]))


def cfl_dt(state: PerturbationState, config: SolverConfig) -> float:
    """``min(cfl dx / S, 2 sqrt(2) / (S |2 pi k|_max))`` with ``S = max|u| + max c + max|H|``.

    The second term is the RK4 imaginary-axis limit for the largest retained
    wave number; it is a hard cap and is not scaled by the Courant number.
    """
    ker = _kernel(state, config)
    return ker.cfl_dt(ker.pack(state))


def step(state: PerturbationState, dt: float, config: SolverConfig) -> PerturbationState:
    """Advance by one integrating-factor RK4 step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    ker = _kernel(state, config)
    return ker.unpack(ker.step(ker.pack(state), dt, state.time), state.time + dt)


def integrate(state: PerturbationState, config: SolverConfig, t: float, dt: float) -> PerturbationState:
    """Advance by ``t`` using ``round(t / dt)`` equal steps (no callbacks)."""
    steps = max(1, int(round(t / dt)))
    h = t / steps
    ker = _kernel(state, config)
    y = ker.pack(state)
    time = state.time
    for j in range(steps):
        y = ker.step(y, h, state.time + j * h)
    return ker.unpack(y, time + t)


# --------------------------------------------------------------------------
# Runs
# --------------------------------------------------------------------------


Callback = Callable[[PerturbationState, int], None]


@dataclass
class RunResult:
    """Outcome of :func:`run`; failures are recorded, not raised."""

    completed: bool
    steps: int
    dt: float
    final_state: PerturbationState
    reason: str = ""
    message: str = ""
    failure_time: float | None = None
    failure_stage: str = ""
    failure_rho: tuple[float, float] | None = None

    @property
    def last_valid_time(self) -> float:
        return self.final_state.time


def resolve_dt(state: PerturbationState, config: SolverConfig) -> tuple[float, int]:
    """Step size and count covering ``[t0, t0 + t_end]`` uniformly."""
    if config.dt == "auto":
        limit = AUTO_DT_SAFETY * cfl_dt(state, config)
    else:
        limit = float(config.dt)
    steps = max(1, math.ceil(config.t_end / limit - 1e-9))
    return config.t_end / steps, steps


def run(config: SolverConfig, initial: PerturbationState, callbacks: Sequence[Callback] = ()) -> RunResult:
    """Integrate to ``t_end`` and feed snapshots to the callbacks.

    A callback with a ``cadence`` attribute is called every ``cadence``
    steps, otherwise every ``config.cadence`` steps; all callbacks also see
    the initial and the final state.  Positivity, CFL and non-finite
    failures stop the run and are returned in the result.
    """
    ker = _kernel(initial, config)
    dt, steps = resolve_dt(initial, config)
    cadences = [int(getattr(cb, "cadence", None) or config.cadence) for cb in callbacks]
    y = ker.pack(initial)
    t0 = initial.time
    done = 0

    def notify(j, st):
        for cb, c in zip(callbacks, cadences):
            if j % c == 0 or j == steps:
                cb(st, j)

    logger.info("run: n=%d dt=%.6g steps=%d w=%s", config.n, dt, steps, config.w)
    try:
        check_window(1.0 + ker.inv(y[0]), config.positivity_window, "initial state", t0)
        notify(0, initial)
        for j in range(1, steps + 1):
            y = ker.step(y, dt, t0 + done * dt, check_cfl=True)
            done = j
            if any(j % c == 0 for c in cadences) or j == steps:
                notify(j, ker.unpack(y, t0 + j * dt))
    except SolverError as err:
        logger.warning("run stopped: %s", err)
        rho = (err.rho_min, err.rho_max) if isinstance(err, PositivityError) else None
        return RunResult(False, done, dt, ker.unpack(y, t0 + done * dt), err.reason, str(err),
                         getattr(err, "time", t0 + done * dt), getattr(err, "stage", ""), rho)
    return RunResult(True, done, dt, ker.unpack(y, t0 + done * dt))
