"""Per-mode analysis of the linearised system around ``(1, 0, w)``.

For a wave vector ``k`` with ``kt = 2 pi k`` the linearised equations read

    a' = -i kt.u
    u' = -i beta kt a + i (w.kt) h - i kt (w.h)
    h' = -nu |kt|^2 h + i (w.kt) u - i w (kt.u)

and preserve ``kt.h = 0``.  The reduced state is ``(a, u1, u2, u3, eta1,
eta2)`` with ``h = eta1 e1 + eta2 e2`` for an orthonormal pair ``e1, e2``
perpendicular to ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .diophantine import DEFAULT_LATTICE_BUDGET, lattice_band
from .spectral import TWO_PI, Grid3, cross_w_squared, sobolev_weight
from .state import PerturbationState

NEUTRAL_TOL = 1e-10
RESIDUAL_TOL = 1e-10


class SpectrumError(RuntimeError):
    """Eigen-solve failed or produced pairs with excessive residuals."""


class ConstraintError(ValueError):
    """Input state violates ``div h = 0`` or the zero-mean constraints."""


def perpendicular_basis(k) -> np.ndarray:
    """Deterministic orthonormal pair perpendicular to ``k`` as a ``(3, 2)`` array.

    Accepts a single vector or an ``(m, 3)`` batch (returning ``(m, 3, 2)``).
    """
    k = np.asarray(k, dtype=float)
    single = k.ndim == 1
    k = np.atleast_2d(k)
    khat = k / np.linalg.norm(k, axis=1, keepdims=True)
    # helper axis: the coordinate axis least aligned with k
    axis = np.argmin(np.abs(khat), axis=1)
    helper = np.eye(3)[axis]
    e1 = np.cross(khat, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(khat, e1)
    basis = np.stack([e1, e2], axis=-1)
    return basis[0] if single else basis


@dataclass(frozen=True)
class ModeSystem:
    k: tuple[int, int, int]
    w: tuple[float, float, float]
    beta: float = 1.0
    nu: float = 1.0
    basis: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        if k == (0, 0, 0):
            raise ValueError("k = 0 has no mode matrix")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "w", tuple(float(x) for x in self.w))
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.basis is None:
            object.__setattr__(self, "basis", perpendicular_basis(k))


def full_matrices(k: np.ndarray, w, beta: float, nu: float) -> np.ndarray:
    """Unreduced ``(m, 7, 7)`` matrices acting on ``(a, u, h)`` for a batch of wave vectors."""
    k = np.atleast_2d(np.asarray(k, dtype=float))
    w = np.asarray(w, dtype=float)
    kt = TWO_PI * k
    m = len(k)
    wk = kt @ w
    k2 = np.einsum("ij,ij->i", kt, kt)
    A = np.zeros((m, 7, 7), dtype=np.complex128)
    A[:, 0, 1:4] = -1j * kt
    A[:, 1:4, 0] = -1j * beta * kt
    eye = np.eye(3)
    # u' from h: i (w.kt) h - i kt (w.h)
    A[:, 1:4, 4:7] = 1j * wk[:, None, None] * eye - 1j * kt[:, :, None] * w[None, None, :]
    # h' from u: i (w.kt) u - i w (kt.u)
    A[:, 4:7, 1:4] = 1j * wk[:, None, None] * eye - 1j * w[None, :, None] * kt[:, None, :]
    A[:, 4:7, 4:7] = -nu * k2[:, None, None] * eye
    return A


def embeddings(k: np.ndarray) -> np.ndarray:
    """``(m, 7, 6)`` isometries mapping reduced states into ``(a, u, h)``."""
    basis = perpendicular_basis(np.atleast_2d(k))
    m = len(basis)
    T = np.zeros((m, 7, 6))
    T[:, :4, :4] = np.eye(4)
    T[:, 4:7, 4:6] = basis
    return T


def reduced_matrices(k: np.ndarray, w, beta: float, nu: float) -> np.ndarray:
    """Reduced ``(m, 6, 6)`` mode matrices for a batch of wave vectors."""
    A7 = full_matrices(k, w, beta, nu)
    T = embeddings(k)
    return np.einsum("mji,mjk,mkl->mil", T, A7, T)


def assemble_mode_matrix(ms: ModeSystem) -> np.ndarray:
    """Reduced 6x6 matrix of one mode, using the system's own perpendicular basis."""
    A7 = full_matrices(np.array([ms.k]), ms.w, ms.beta, ms.nu)[0]
    T = np.zeros((7, 6))
    T[:4, :4] = np.eye(4)
    T[4:7, 4:6] = ms.basis
    return T.T @ A7 @ T


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    spectral_abscissa: float
    neutral_directions: np.ndarray

    @property
    def neutral_count(self) -> int:
        return self.neutral_directions.shape[1]


def spectrum_of(A: np.ndarray, neutral_tol: float = NEUTRAL_TOL) -> SpectrumReport:
    try:
        vals, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigen-solver failed: {exc}") from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise SpectrumError("eigen-solver returned non-finite values")
    order = np.lexsort((vals.imag, vals.real))
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
    if np.any(res > RESIDUAL_TOL):
        raise SpectrumError(f"eigenpair residual {res.max():.3e} exceeds {RESIDUAL_TOL}")
    neutral = np.abs(vals.real) <= neutral_tol
    return SpectrumReport(eigenvalues=vals, eigenvectors=vecs, residuals=res,
                          spectral_abscissa=float(vals.real.max()), neutral_directions=vecs[:, neutral])


def mode_spectrum(ms: ModeSystem, neutral_tol: float = NEUTRAL_TOL) -> SpectrumReport:
    """Eigenpairs of the reduced mode matrix, ordered by real then imaginary part."""
    return spectrum_of(assemble_mode_matrix(ms), neutral_tol)


@dataclass(frozen=True)
class BandScan:
    K: int
    max_abscissa: float
    argmax: tuple[int, int, int]
    neutral_modes: list
    rows: list  # (k1, k2, k3, re_lambda_max, im_at_max, neutral_count)


def band_spectrum_scan(w, beta: float, nu: float, K: int, budget: int = DEFAULT_LATTICE_BUDGET,
                       neutral_tol: float = NEUTRAL_TOL, check: bool = False) -> BandScan:
    """Worst-case spectral abscissa over ``0 < |k| <= K``.

    ``-k`` has the conjugate spectrum, so one of each pair is scanned.  With
    ``check=True`` a nonnegative abscissa raises :class:`SpectrumError`.
    """
    k = lattice_band(K, budget, half=True)
    mats = reduced_matrices(k, w, beta, nu)
    rows, neutral = [], []
    for kv, A in zip(k, mats):
        rep = spectrum_of(A, neutral_tol)
        i = int(np.argmax(rep.eigenvalues.real))
        kt = tuple(int(x) for x in kv)
        rows.append(kt + (float(rep.eigenvalues[i].real), float(rep.eigenvalues[i].imag), rep.neutral_count))
        if rep.neutral_count:
            neutral.append((kt, rep.neutral_count))
    j = int(np.argmax([r[3] for r in rows]))
    scan = BandScan(K=int(K), max_abscissa=rows[j][3], argmax=rows[j][:3], neutral_modes=neutral, rows=rows)
    if check and scan.max_abscissa >= 0:
        raise SpectrumError(f"spectral abscissa {scan.max_abscissa:.3e} >= 0 at k={scan.argmax}")
    return scan


# --------------------------------------------------------------------------
# Exact linear evolution on a grid
# --------------------------------------------------------------------------


def _active_modes(grid: Grid3, stack: np.ndarray, tol: float = 1e-14):
    # Nyquist planes carry no consistent real linear dynamics; only roundoff may live there
    nyq = np.abs(grid.k1d) == grid.n // 2
    on_nyq = nyq[:, None, None] | nyq[None, :, None] | nyq[None, None, :]
    scale = float(np.max(np.abs(stack))) if stack.size else 0.0
    if np.any(np.abs(stack[:, on_nyq]) > tol * max(scale, 1e-300)):
        raise ConstraintError("Nyquist modes must be empty for linear evolution")
    nz = np.any(stack != 0, axis=0) & ~on_nyq
    nz[0, 0, 0] = False
    idx = np.nonzero(nz)
    k = np.stack([grid.k1d[i] for i in idx], axis=1)
    return idx, k


def check_linear_constraints(state: PerturbationState, tol: float = 1e-10) -> None:
    c = state.stack()
    scale = max(1.0, float(np.max(np.abs(c))))
    if abs(c[0, 0, 0, 0]) > tol * scale or np.max(np.abs(c[4:, 0, 0, 0])) > tol * scale:
        raise ConstraintError("a and h must have zero mean")
    kx, ky, kz = state.grid.k_odd
    div = kx * c[4] + ky * c[5] + kz * c[6]
    if np.max(np.abs(div)) > tol * scale * state.grid.n:
        raise ConstraintError(f"div h = {np.max(np.abs(div)):.3e} is not zero")


def linear_propagators(grid: Grid3, k: np.ndarray, w, beta, nu, t: float):
    """Reduced propagators ``exp(A t)`` and the embeddings for a batch of modes."""
    A = reduced_matrices(k, w, beta, nu)
    return linalg.expm(A * t), embeddings(k)


def linear_trajectory(initial: PerturbationState, w, beta: float, nu: float, dt: float, steps: int,
                      check: bool = True) -> list[PerturbationState]:
    """States at ``t0 + j dt`` for ``j = 0..steps`` under the exact linear flow."""
    if check:
        check_linear_constraints(initial)
    grid = initial.grid
    stack = initial.stack()
    out = [initial]
    idx, k = _active_modes(grid, stack)
    if len(k) == 0:
        return [initial.with_time(initial.time + j * dt) for j in range(steps + 1)]
    P, T = linear_propagators(grid, k, w, beta, nu, dt)
    z = np.einsum("mji,jm->mi", T, stack[(slice(None),) + idx])
    for j in range(1, steps + 1):
        z = np.einsum("mij,mj->mi", P, z)
        new = stack.copy()
        new[(slice(None),) + idx] = np.einsum("mij,mj->im", T, z)
        out.append(PerturbationState.from_stack(grid, new, initial.time + j * dt))
    return out


def evolve_linear(initial: PerturbationState, w, beta: float, nu: float, t: float) -> PerturbationState:
    """Advance a state by ``t`` under the exact linear flow (per-mode matrix exponential)."""
    return linear_trajectory(initial, w, beta, nu, t, 1)[-1]


def linear_action(state: PerturbationState, w, beta: float, nu: float) -> np.ndarray:
    """Time derivative of the stacked coefficients under the linear system."""
    grid = state.grid
    stack = state.stack()
    out = np.zeros_like(stack)
    idx, k = _active_modes(grid, stack)
    if len(k):
        A = full_matrices(k, w, beta, nu)
        out[(slice(None),) + idx] = np.einsum("mij,jm->im", A, stack[(slice(None),) + idx])
    return out


def linear_energy(state: PerturbationState, beta: float, N: float = 0) -> float:
    """``1/2 (beta |a|_N^2 + |u|_N^2 + |h|_N^2)``."""
    wgt = sobolev_weight(state.grid, N)
    c = state.stack()
    p = np.abs(c) ** 2
    return 0.5 * float(np.sum(wgt * (beta * p[0] + p[1:].sum(axis=0))))


def linear_dissipation(state: PerturbationState, N: float = 0) -> float:
    """``|grad h|_N^2``."""
    grid = state.grid
    wgt = sobolev_weight(grid, N) * TWO_PI**2 * grid.k_squared
    return float(np.sum(wgt * (np.abs(state.h.coeffs) ** 2).sum(axis=0)))


def linear_energy_rate(state: PerturbationState, w, beta: float, nu: float, N: float = 0) -> float:
    """Exact ``d/dt`` of :func:`linear_energy` along the linear flow."""
    wgt = sobolev_weight(state.grid, N)
    c = state.stack()
    dc = linear_action(state, w, beta, nu)
    prod = (np.conj(c) * dc).real
    return float(np.sum(wgt * (beta * prod[0] + prod[1:].sum(axis=0))))


def wave_identity_residual(trajectory: list[PerturbationState], w, beta: float, nu: float = 1.0) -> np.ndarray:
    """L2 residual of ``g'' - nu Lap g' - |w|^2 Lap g - beta Lap_w a = 0`` with ``g = h.w``.

    Time derivatives are second-order centred differences, so the first and
    last samples are dropped.  The sampling must be uniform.
    """
    if len(trajectory) < 3:
        raise ValueError("need at least three samples")
    times = np.array([s.time for s in trajectory])
    steps = np.diff(times)
    dt = steps[0]
    if not np.allclose(steps, dt, rtol=1e-9, atol=0):
        raise ValueError("sampling must be uniform")
    w = np.asarray(w, dtype=float)
    grid = trajectory[0].grid
    k2 = TWO_PI**2 * grid.k_squared
    kw2 = TWO_PI**2 * cross_w_squared(grid, w)
    g = np.array([np.tensordot(w, s.h.coeffs, axes=1) for s in trajectory])
    a = np.array([s.a.coeffs for s in trajectory])
    g_t = (g[2:] - g[:-2]) / (2 * dt)
    g_tt = (g[2:] - 2 * g[1:-1] + g[:-2]) / dt**2
    res = g_tt + nu * k2 * g_t + (w @ w) * k2 * g[1:-1] + beta * kw2 * a[1:-1]
    return np.sqrt(np.sum(np.abs(res) ** 2, axis=(1, 2, 3)))
