"""Lattice certification of background fields against the Diophantine condition.

Only a finite band ``0 < |k| <= K`` can be scanned, so every number produced
here is a band margin or a band-sharp constant with ``K`` attached; nothing is
extrapolated to the full lattice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .spectral import TWO_PI, Grid3, OperatorSpec, SpectralField

logger = logging.getLogger(__name__)

DEFAULT_LATTICE_BUDGET = 5_000_000
DEFAULT_DIRECTION = np.array([1.0, np.sqrt(2.0), np.sqrt(3.0)])


class LatticeBudgetError(RuntimeError):
    """The requested band would scan more lattice points than allowed."""


@dataclass(frozen=True)
class DioVector:
    """Background field ``w`` with Diophantine exponent ``r`` and optional constant."""

    w: tuple[float, float, float]
    r: float = 3.0
    claimed_c: float | None = None

    def __post_init__(self):
        w = tuple(float(x) for x in np.asarray(self.w, dtype=float).ravel())
        if len(w) != 3:
            raise ValueError("w must be a 3-vector")
        if not any(w):
            raise ValueError("w must be nonzero")
        object.__setattr__(self, "w", w)
        if self.claimed_c is not None and self.claimed_c <= 0:
            raise ValueError("claimed_c must be positive")
        if self.r <= 2:
            logger.warning("r=%s <= 2 lies outside the regime r > 2", self.r)

    @property
    def proven_regime(self) -> bool:
        return self.r > 2

    @property
    def array(self) -> np.ndarray:
        return np.array(self.w)

    @classmethod
    def default(cls, amplitude: float = 1.0, r: float = 3.0) -> DioVector:
        """``amplitude * (1, sqrt 2, sqrt 3)``."""
        return cls(tuple(amplitude * DEFAULT_DIRECTION), r=r)


def lattice_band(K: int, budget: int = DEFAULT_LATTICE_BUDGET, half: bool = False) -> np.ndarray:
    """Integer vectors with ``0 < |k| <= K`` as an ``(m, 3)`` array.

    With ``half=True`` only one of each pair ``{k, -k}`` is kept (the one whose
    first nonzero entry is positive).  Rows are ordered by ``|k|^2`` and then
    lexicographically descending, which makes argmin reporting deterministic.
    """
    K = int(K)
    if K < 1:
        raise ValueError("band limit K must be >= 1")
    points = (2 * K + 1) ** 3
    if points > budget:
        raise LatticeBudgetError(f"band K={K} scans {points} lattice points, budget is {budget}")
    r = np.arange(-K, K + 1)
    k = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    k2 = np.einsum("ij,ij->i", k, k)
    keep = (k2 > 0) & (k2 <= K * K)
    if half:
        lead = np.where(k[:, 0] != 0, k[:, 0], np.where(k[:, 1] != 0, k[:, 1], k[:, 2]))
        keep &= lead > 0
    k, k2 = k[keep], k2[keep]
    order = np.lexsort((-k[:, 2], -k[:, 1], -k[:, 0], k2))
    return k[order]


@dataclass(frozen=True)
class MarginEntry:
    value: float
    argmin: tuple[int, int, int]


@dataclass(frozen=True)
class MarginReport:
    K: int
    r: float
    dot_margin: float
    dot_argmin: tuple[int, int, int]
    cross_margin: float
    cross_argmin: tuple[int, int, int]

    @property
    def diophantine_in_band(self) -> bool:
        return self.dot_margin > 0


def _lattice_values(w, r, K, budget):
    w = np.asarray(w, dtype=float)
    if w.shape != (3,) or not np.any(w):
        raise ValueError("w must be a nonzero 3-vector")
    k = lattice_band(K, budget, half=True)
    kf = k.astype(float)
    norm = np.sqrt(np.einsum("ij,ij->i", kf, kf))
    dot = np.abs(kf @ w)
    cross = np.linalg.norm(np.cross(np.broadcast_to(w, kf.shape), kf), axis=1)
    return k, norm, dot * norm**r, cross * norm**r


def _min_entry(k, values) -> MarginEntry:
    i = int(np.argmin(values))
    return MarginEntry(float(values[i]), tuple(int(x) for x in k[i]))


def dot_margin(w, r: float, K: int, budget: int = DEFAULT_LATTICE_BUDGET) -> MarginEntry:
    """Minimum of ``|w.k| |k|^r`` over the band, with its minimising wave vector."""
    k, _, dot, _ = _lattice_values(w, r, K, budget)
    return _min_entry(k, dot)


def cross_margin(w, r: float, K: int, budget: int = DEFAULT_LATTICE_BUDGET) -> MarginEntry:
    """Minimum of ``|w x k| |k|^r`` over the band, with its minimising wave vector."""
    k, _, _, cross = _lattice_values(w, r, K, budget)
    return _min_entry(k, cross)


def margin_report(w, r: float, K: int, budget: int = DEFAULT_LATTICE_BUDGET) -> MarginReport:
    k, _, dot, cross = _lattice_values(w, r, K, budget)
    d, c = _min_entry(k, dot), _min_entry(k, cross)
    return MarginReport(K=int(K), r=float(r), dot_margin=d.value, dot_argmin=d.argmin,
                        cross_margin=c.value, cross_argmin=c.argmin)


def margin_table(w, r: float, K: int, budget: int = DEFAULT_LATTICE_BUDGET):
    """Rows ``(k1, k2, k3, |k|, dot_value, cross_value)`` for the half band."""
    k, norm, dot, cross = _lattice_values(w, r, K, budget)
    return [(int(a), int(b), int(c), float(n), float(d), float(x))
            for (a, b, c), n, d, x in zip(k, norm, dot, cross)]


def tilde_vector(k) -> np.ndarray:
    """Rotated lattice vector ``k~`` used to bound ``|w x k|`` from below.

    For ``k_3 != 0`` this is ``(0, -k_3, k_2) = e_1 x k``; otherwise the same
    construction is applied after a cyclic relabelling of the axes, i.e.
    ``e_{j+1} x k`` for the last nonzero coordinate ``j``.
    """
    k = np.asarray(k, dtype=np.int64)
    for j in (2, 1, 0):
        if k[j] != 0:
            e = np.zeros(3, dtype=np.int64)
            e[(j + 1) % 3] = 1
            return np.cross(e, k)
    raise ValueError("k must be nonzero")


@dataclass(frozen=True)
class TildeCheck:
    K: int
    checked: int
    violations: list = field(default_factory=list)
    max_ratio: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations


def tilde_inequality_check(w, K: int, budget: int = DEFAULT_LATTICE_BUDGET, rtol: float = 1e-12) -> TildeCheck:
    """Check ``|w.k~| <= |w x k|`` and ``0 < |k~| <= |k|`` on every band vector."""
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        raise ValueError("w must be nonzero")
    k = lattice_band(K, budget)
    tilde = np.array([tilde_vector(v) for v in k])
    lhs = np.abs(tilde.astype(float) @ w)
    rhs = np.linalg.norm(np.cross(np.broadcast_to(w, k.shape), k.astype(float)), axis=1)
    knorm = np.linalg.norm(k, axis=1)
    tnorm = np.linalg.norm(tilde, axis=1)
    bad = (lhs > rhs * (1 + rtol) + rtol * np.linalg.norm(w)) | (tnorm == 0) | (tnorm > knorm)
    violations = [tuple(int(x) for x in v) for v in k[bad]]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
    return TildeCheck(K=int(K), checked=len(k), violations=violations, max_ratio=float(ratio.max()))


# --------------------------------------------------------------------------
# Band-sharp Poincare constants
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalConstants:
    """Smallest constants making the three Poincare-type inequalities hold on the band.

    ``K1_emp`` bounds ``|Lambda^{s-r} f|_0`` by ``|w.grad Lambda^s f|_0``;
    ``K2_emp`` bounds ``|f|_{s-r}`` by ``|(w x grad) Lambda^s f|_0``;
    ``K3_emp`` bounds ``|f|_{s-r}`` by either of the two.  All three are
    infinite when some band vector is orthogonal to (or parallel with) ``w``.
    """

    K1_emp: float
    K2_emp: float
    K3_emp: float
    s: float
    r: float
    K: int
    worst_k1: tuple[int, int, int] | None
    worst_k2: tuple[int, int, int] | None
    worst_k3_dot: tuple[int, int, int] | None

    @property
    def diophantine_in_band(self) -> bool:
        return bool(np.isfinite(self.K1_emp) and np.isfinite(self.K3_emp))

    @property
    def status(self) -> str:
        return "diophantine in band" if self.diophantine_in_band else "not Diophantine in band"


def _mode_ratios(w, s, r, k):
    kf = k.astype(float)
    norm = np.sqrt(np.einsum("ij,ij->i", kf, kf))
    dot = TWO_PI * np.abs(kf @ w)
    cross = TWO_PI * np.linalg.norm(np.cross(np.broadcast_to(w, kf.shape), kf), axis=1)
    lam = TWO_PI * norm
    inhom = (1.0 + lam**2) ** ((s - r) / 2.0)
    with np.errstate(divide="ignore"):
        k1 = lam ** (s - r) / (dot * lam**s)
        k2 = inhom / (cross * lam**s)
        k3_dot = inhom / (dot * lam**s)
    return k1, k2, k3_dot


def empirical_constants(w, s: float, r: float, K: int, budget: int = DEFAULT_LATTICE_BUDGET) -> EmpiricalConstants:
    """Mode-wise maxima of the inequality quotients over ``0 < |k| <= K``."""
    w = np.asarray(w, dtype=float)
    if s < r:
        raise ValueError(f"need s >= r, got s={s}, r={r}")
    k = lattice_band(K, budget, half=True)
    k1, k2, k3_dot = _mode_ratios(w, s, r, k)

    def worst(vals):
        if not np.all(np.isfinite(vals)):
            i = int(np.argmax(~np.isfinite(vals)))
            return float("inf"), tuple(int(x) for x in k[i])
        i = int(np.argmax(vals))
        return float(vals[i]), tuple(int(x) for x in k[i])

    K1, a1 = worst(k1)
    K2, a2 = worst(k2)
    K3d, a3 = worst(k3_dot)
    return EmpiricalConstants(K1_emp=K1, K2_emp=K2, K3_emp=max(K2, K3d), s=float(s), r=float(r), K=int(K),
                              worst_k1=a1, worst_k2=a2, worst_k3_dot=a3)


def certification_grid(K: int) -> Grid3:
    """Smallest even grid holding every mode with ``|k_i| <= K`` exactly."""
    return Grid3(2 * int(K) + 2, dealias_fraction=1)


def single_mode(grid: Grid3, k) -> SpectralField:
    """``cos(2 pi k.x)`` as a spectral field."""
    c = np.zeros(grid.shape, dtype=np.complex128)
    n = grid.n
    i = tuple(int(x) % n for x in k)
    j = tuple(int(-x) % n for x in k)
    c[i] += 0.5
    c[j] += 0.5
    return SpectralField(grid, c)


def inequality_ratios(f: SpectralField, w, s: float, r: float) -> dict[str, float]:
    """Quotients of left by right sides of the three inequalities, from field operations."""
    wt = tuple(float(x) for x in w)
    lam_s = sp.apply_operator(f, OperatorSpec("lambda", s=s))
    dot = sp.l2_norm(sp.apply_operator(lam_s, OperatorSpec("w_dot_grad", w=wt)))
    cross = sp.l2_norm(sp.apply_operator(lam_s, OperatorSpec("w_cross_grad", w=wt)))
    lower_hom = sp.l2_norm(sp.apply_operator(f, OperatorSpec("lambda", s=s - r)))
    lower_inh = sp.sobolev_norm(f, s - r)
    return {
        "K1": _quotient(lower_hom, dot),
        "K2": _quotient(lower_inh, cross),
        "K3_dot": _quotient(lower_inh, dot),
        "K3_cross": _quotient(lower_inh, cross),
    }


def _quotient(num: float, den: float) -> float:
    # a vanishing right side makes the inequality fail for any finite constant
    return num / den if den > 0 else float("inf")


@dataclass(frozen=True)
class Certification:
    constants: EmpiricalConstants
    worst_mode_ratios: dict
    max_random_ratios: dict
    samples: int

    def max_observed(self, which: str) -> float:
        return max(self.worst_mode_ratios[which], self.max_random_ratios[which])

    def holds(self, rtol: float = 1e-12) -> bool:
        c = self.constants
        bounds = {"K1": c.K1_emp, "K2": c.K2_emp, "K3_dot": c.K3_emp, "K3_cross": c.K3_emp}
        return all(self.max_observed(key) <= bound * (1 + rtol) for key, bound in bounds.items())


def certify_constants(w, s: float, r: float, K: int, samples: int = 100, seed: int = 0) -> Certification:
    """Evaluate the inequalities on the worst single modes and on random band-limited fields.

    Random fields are real, mean zero and supported on ``0 < |k| <= K``.
    """
    const = empirical_constants(w, s, r, K)
    if not const.diophantine_in_band:
        raise ValueError("constants are infinite: w is not Diophantine in band")
    grid = certification_grid(K)
    worst = {
        "K1": inequality_ratios(single_mode(grid, const.worst_k1), w, s, r)["K1"],
        "K2": inequality_ratios(single_mode(grid, const.worst_k2), w, s, r)["K2"],
        "K3_dot": inequality_ratios(single_mode(grid, const.worst_k3_dot), w, s, r)["K3_dot"],
        "K3_cross": inequality_ratios(single_mode(grid, const.worst_k2), w, s, r)["K3_cross"],
    }
    rng = np.random.default_rng(seed)
    best = {key: 0.0 for key in worst}
    for _ in range(samples):
        f = SpectralField(grid, sp.band_limited_random(grid, rng, K))
        for key, val in inequality_ratios(f, w, s, r).items():
            best[key] = max(best[key], val)
    return Certification(constants=const, worst_mode_ratios=worst, max_random_ratios=best, samples=samples)


# --------------------------------------------------------------------------
# Ratio harnesses for the standard calculus inequalities
# --------------------------------------------------------------------------


def _padded_grid(K: int) -> Grid3:
    # products of two band-K fields stay alias free
    return Grid3(4 * int(K) + 2, dealias_fraction=1)


def _sup(f: SpectralField) -> float:
    return float(np.max(np.abs(f.to_samples())))


def product_ratio(f: SpectralField, g: SpectralField, s: float) -> float:
    """``|fg|_s / (|f|_inf |g|_s + |g|_inf |f|_s)`` with an exact product."""
    fg = SpectralField.from_samples(f.grid, f.to_samples() * g.to_samples())
    den = _sup(f) * sp.sobolev_norm(g, s) + _sup(g) * sp.sobolev_norm(f, s)
    return sp.sobolev_norm(fg, s) / den


def commutator_ratio(f: SpectralField, g: SpectralField, s: float) -> float:
    """``|[Lambda^s, f] g|_0 / (|Df|_inf |Lambda^{s-1} g|_0 + |g|_inf |Lambda^s f|_0)``."""
    grid = f.grid
    lam = OperatorSpec("lambda", s=s)
    fg = SpectralField.from_samples(grid, f.to_samples() * g.to_samples())
    f_lam_g = SpectralField.from_samples(grid, f.to_samples() * sp.apply_operator(g, lam).to_samples())
    comm = sp.apply_operator(fg, lam) - f_lam_g
    grad_f = sp.apply_operator(f, OperatorSpec("gradient")).to_samples()
    df_inf = float(np.max(np.abs(grad_f)))
    den = (df_inf * sp.l2_norm(sp.apply_operator(g, OperatorSpec("lambda", s=max(s - 1, 0.0))))
           + _sup(g) * sp.l2_norm(sp.apply_operator(f, lam)))
    return sp.l2_norm(comm) / den


def composition_ratio(f: SpectralField, s: float, func=np.expm1) -> float:
    """``|F(f)|_s / ((1 + |f|_inf)^([s]+1) |f|_s)`` for ``F(0) = 0``.

    ``F(f)`` is not band limited; the grid should be fine enough that its
    truncation is negligible at the amplitudes used.
    """
    Ff = SpectralField.from_samples(f.grid, func(f.to_samples()))
    return sp.sobolev_norm(Ff, s) / ((1 + _sup(f)) ** (int(np.floor(s)) + 1) * sp.sobolev_norm(f, s))


def weighted_poincare_ratio(weight: SpectralField, z: SpectralField) -> float:
    """Quotient for ``|z|_0 <= |int f z| / M + K7 (1 + |M - f|_0 / M) |grad z|_0``.

    Returns ``(|z|_0 - |int f z|/M) / ((1 + |M - f|_0/M) |grad z|_0)``; the
    inequality holds with ``K7`` equal to the supremum of this quantity.
    """
    M = float(weight.coeffs[0, 0, 0].real)
    if M <= 0:
        raise ValueError("weight must have positive mean")
    fz = float(np.mean(weight.to_samples() * z.to_samples()))
    _, centred = sp.mean_and_center(weight)
    grad = sp.l2_norm(sp.apply_operator(z, OperatorSpec("gradient")))
    return (sp.l2_norm(z) - abs(fz) / M) / ((1 + sp.l2_norm(centred) / M) * grad)


@dataclass(frozen=True)
class HarnessReport:
    name: str
    s: float
    samples: int
    max_ratio: float
    mean_ratio: float


def ratio_harness(s: float = 2.0, K: int = 4, samples: int = 100, seed: int = 0) -> list[HarnessReport]:
    """Sweep the product, commutator, composition and weighted Poincare quotients."""
    grid = _padded_grid(K)
    rng = np.random.default_rng(seed)
    out = {"product": [], "commutator": [], "composition": [], "weighted_poincare": []}
    for _ in range(samples):
        f = SpectralField(grid, sp.band_limited_random(grid, rng, K))
        g = SpectralField(grid, sp.band_limited_random(grid, rng, K))
        f = f * (1.0 / sp.l2_norm(f))
        g = g * (1.0 / sp.l2_norm(g))
        out["product"].append(product_ratio(f, g, s))
        out["commutator"].append(commutator_ratio(f, g, s))
        out["composition"].append(composition_ratio(f * 0.1, s))
        weight = SpectralField(grid, (f * (0.3 / _sup(f))).coeffs)
        weight.coeffs[0, 0, 0] = 1.0
        out["weighted_poincare"].append(weighted_poincare_ratio(weight, g + f * 0.5))
    return [HarnessReport(name, float(s), samples, float(np.max(v)), float(np.mean(v))) for name, v in out.items()]
