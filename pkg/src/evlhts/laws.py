"""Empirical distributions, reference laws, and KS-type comparisons.

Empirical laws may be right-censored at a known cap (hitting-time runs
stop scanning at a horizon): censored observations are counted in the
denominator but carry no location, so the ECDF is exact strictly below
the cap and undefined above it — queries there raise rather than guess.

Reference laws cover the three classical extreme value families, the
exponential law, and explicit tabulated curves.  KS comparisons use the
asymptotic Kolmogorov distribution computed in-house (both series of the
theta function, switched at the usual lambda = 1.18).
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    CapTooSmall,
    DomainError,
    GridMismatch,
    InsufficientSample,
    NonMonotoneInput,
)


@dataclass
class EmpiricalLaw:
    """Sorted sample with optional upper-tail censoring.

    ``values`` hold the observed points (may include +inf for saturated
    maxima); ``n_censored`` observations are known only to lie at or above
    ``cap``.
    """

    values: np.ndarray
    n_censored: int = 0
    cap: float | None = None

    def __post_init__(self):
        self.values = np.sort(np.asarray(self.values, dtype=np.float64))
        if self.values.size == 0 and self.n_censored == 0:
            raise InsufficientSample("empty sample")
        if self.n_censored < 0:
            raise DomainError("negative censored count")
        if self.n_censored and self.cap is None:
            raise DomainError("censored observations need a cap value")
        if self.cap is not None and self.values.size and \
                self.values[-1] > self.cap:
            raise DomainError("observed value beyond the censoring cap")

    @classmethod
    def from_hit_times(cls, times, hit, scale=1.0, cap=None):
        """Law of scaled hitting times; unhit lanes are censored at cap."""
        times = np.asarray(times)
        hit = np.asarray(hit, dtype=bool)
        observed = times[hit] * scale
        n_cens = int((~hit).sum())
        if cap is None:
            cap = float(times.max() * scale) if n_cens else None
        return cls(observed, n_cens, cap)

    @property
    def n_total(self) -> int:
        return int(self.values.size) + self.n_censored

    def _check_in_range(self, t):
        if self.n_censored and self.cap is not None and t >= self.cap:
            raise CapTooSmall(
                f"ECDF undefined at {t}: {self.n_censored} observations "
                f"censored at cap {self.cap}"
            )

    def cdf(self, t: float) -> float:
        """Right-continuous ECDF; exact below the censoring cap."""
        if math.isinf(t) and t > 0:
            return 1.0
        self._check_in_range(t)
        return float(
            np.searchsorted(self.values, t, side="right") / self.n_total
        )

    def sf(self, t: float) -> float:
        """P(X > t).  Survival of +inf is exactly 0 whatever the cap."""
        if math.isinf(t) and t > 0:
            return 0.0
        self._check_in_range(t)
        return 1.0 - self.cdf(t)


class LawKind(str, Enum):
    EV1 = "ev1"
    EV2 = "ev2"
    EV3 = "ev3"
    EXPONENTIAL = "exponential"
    GRID = "grid"


@dataclass(frozen=True)
class ReferenceLaw:
    """A target distribution function.

    EV1(y) = exp(-e^-y); EV2 has mass on y > 0 with F = exp(-y^-alpha);
    EV3 has support y <= 0 with F = exp(-(-y)^alpha); the exponential law
    uses ``rate``; GRID interpolates a tabulated curve linearly.
    """

    kind: LawKind
    alpha: float = 1.0
    rate: float = 1.0
    xs: tuple = field(default=())
    fs: tuple = field(default=())

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError("alpha must be positive")
        if self.rate <= 0:
            raise DomainError("rate must be positive")
        if self.kind is LawKind.GRID:
            if len(self.xs) != len(self.fs) or len(self.xs) < 2:
                raise DomainError("grid law needs matching xs/fs, >= 2 points")
            if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
                raise NonMonotoneInput("grid abscissae must increase")
            if any(b < a for a, b in zip(self.fs, self.fs[1:])):
                raise NonMonotoneInput("grid CDF values must not decrease")

    def cdf(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.kind is LawKind.EV1:
            out = np.exp(-np.exp(-y))
        elif self.kind is LawKind.EV2:
            with np.errstate(divide="ignore"):
                out = np.where(y > 0, np.exp(-np.power(np.maximum(y, 1e-300),
                                                       -self.alpha)), 0.0)
        elif self.kind is LawKind.EV3:
            out = np.where(y <= 0, np.exp(-np.power(np.abs(np.minimum(y, 0.0)),
                                                    self.alpha)), 1.0)
        elif self.kind is LawKind.EXPONENTIAL:
            out = np.where(y >= 0, -np.expm1(-self.rate * np.maximum(y, 0.0)),
                           0.0)
        else:
            out = np.interp(y, self.xs, self.fs, left=0.0, right=1.0)
        return out if out.ndim else float(out)


# ------------------------------------------------------------------ KS

def kolmogorov_sf(lam: float) -> float:
    """P(sup |Brownian bridge| > lam): the asymptotic KS tail."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # Jacobi-transformed series: accurate where the direct one is slow
        t = math.exp(-math.pi * math.pi / (8.0 * lam * lam))
        series = t + t**9 + t**25 + t**49
        return max(0.0, min(1.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * series))
    total = 0.0
    for k in range(1, 64):
        term = math.exp(-2.0 * (k * lam) ** 2) * (1 if k % 2 else -1)
        total += term
        if abs(term) < 1e-17:
            break
    return max(0.0, min(1.0, 2.0 * total))


def ks_critical(n: int, significance: float = 0.01) -> float:
    """Critical one-sample KS distance at the given significance."""
    if n < 1:
        raise InsufficientSample("need at least one observation")
    if not 0.0 < significance < 1.0:
        raise DomainError("significance must be in (0, 1)")
    lo, hi = 1e-9, 8.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kolmogorov_sf(mid) > significance:
            lo = mid
        else:
            hi = mid
    return hi / math.sqrt(n)


@dataclass(frozen=True)
class KsReport:
    statistic: float
    critical: float
    n_effective: float
    significance: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical


def ks_statistic(law: EmpiricalLaw, ref: ReferenceLaw) -> float:
    """One-sample KS distance sup_t |F_n(t) - F(t)| (full-sample laws only)."""
    if law.n_censored:
        raise CapTooSmall(
            "KS needs the whole sample; rerun with a larger horizon "
            f"({law.n_censored} censored)"
        )
    x = law.values
    n = x.size
    f = np.asarray(ref.cdf(x))
    grid = np.arange(n, dtype=np.float64)
    d_plus = np.max((grid + 1.0) / n - f)
    d_minus = np.max(f - grid / n)
    return float(max(d_plus, d_minus))


def ks_test(law: EmpiricalLaw, ref: ReferenceLaw,
            significance: float = 0.01) -> KsReport:
    stat = ks_statistic(law, ref)
    n = law.n_total
    return KsReport(stat, ks_critical(n, significance), n, significance)


def ks_two_sample(a: EmpiricalLaw, b: EmpiricalLaw,
                  significance: float = 0.01) -> KsReport:
    """Two-sample KS over the pooled jump points."""
    if a.n_censored or b.n_censored:
        raise CapTooSmall("two-sample KS needs uncensored laws")
    pooled = np.concatenate([a.values, b.values])
    fa = np.searchsorted(a.values, pooled, side="right") / a.n_total
    fb = np.searchsorted(b.values, pooled, side="right") / b.n_total
    stat = float(np.max(np.abs(fa - fb)))
    n_eff = a.n_total * b.n_total / (a.n_total + b.n_total)
    return KsReport(stat, ks_critical(max(int(n_eff), 1), significance),
                    n_eff, significance)


def sup_distance_on_grid(law: EmpiricalLaw, ref: ReferenceLaw, grid) -> float:
    """max over the grid of |ECDF - reference CDF|."""
    diffs = [abs(law.cdf(t) - float(np.asarray(ref.cdf(t)))) for t in grid]
    return max(diffs)


# ------------------------------------------- level-vs-time comparisons

@dataclass(frozen=True)
class LevelTimeComparison:
    y_grid: tuple
    taus: tuple
    maxima_probs: tuple  # P(M_n <= u_n(y)) per grid point
    time_survivals: tuple  # G(tau(y)) from the hitting-time law
    sup_diff: float


def check_evl_from_hts(y_grid, maxima_probs, hit_law: EmpiricalLaw,
                       g) -> LevelTimeComparison:
    """Compare the maxima law against the hitting-time law point by point.

    The bridge is tau = g's level-to-rate map: the no-exceedance
    probability at rescaled level y should match the probability that the
    normalized hitting time exceeds tau(y).  The hitting-time law must
    cover every finite tau(y) (GridMismatch otherwise).
    """
    if len(y_grid) != len(maxima_probs):
        raise DomainError("grid and probabilities differ in length")
    taus, survivals = [], []
    for y in y_grid:
        t = g.tau(y)
        taus.append(t)
        try:
            survivals.append(hit_law.sf(t))  # sf(+inf) is exactly 0
        except CapTooSmall as exc:
            raise GridMismatch(
                f"tau({y}) = {t} lies beyond the hitting-time horizon"
            ) from exc
    diffs = [abs(p - s) for p, s in zip(maxima_probs, survivals)]
    return LevelTimeComparison(
        tuple(y_grid), tuple(taus), tuple(maxima_probs), tuple(survivals),
        max(diffs),
    )


@dataclass(frozen=True)
class EquivalenceReport:
    tau_grid: tuple
    probs_by_route: dict
    max_pairwise: float
    max_vs_limit: float

    @property
    def routes(self):
        return tuple(self.probs_by_route)


def check_cylinder_equivalence(tau_grid, probs_by_route: dict
                               ) -> EquivalenceReport:
    """Pairwise sup-differences between no-entry probability routes, plus
    the distance of every route to the limit exp(-tau)."""
    routes = list(probs_by_route)
    if len(routes) < 2:
        raise DomainError("need at least two routes to compare")
    lengths = {len(v) for v in probs_by_route.values()}
    if lengths != {len(tau_grid)}:
        raise DomainError("every route must cover the whole tau grid")
    max_pair = 0.0
    for i, ra in enumerate(routes):
        for rb in routes[i + 1:]:
            diff = max(
                abs(a - b)
                for a, b in zip(probs_by_route[ra], probs_by_route[rb])
            )
            max_pair = max(max_pair, diff)
    limit = [math.exp(-t) for t in tau_grid]
    max_vs_limit = max(
        abs(p - l)
        for probs in probs_by_route.values()
        for p, l in zip(probs, limit)
    )
    return EquivalenceReport(tuple(tau_grid), dict(probs_by_route), max_pair,
                             max_vs_limit)


def survival_integral(law: EmpiricalLaw, t) -> float:
    """integral_0^t P(T > s) ds, evaluated exactly on the step ECDF.

    With T >= 0 this is E[min(t, T)], so censoring at a cap >= t is
    harmless: censored lanes contribute exactly t.
    """
    if t < 0:
        raise DomainError("the integral starts at 0")
    if law.cap is not None and law.n_censored and t > law.cap:
        raise CapTooSmall(f"integral needs the law up to {t}, cap {law.cap}")
    if law.values.size and law.values[0] < 0:
        raise DomainError("hitting times must be nonnegative")
    clipped = np.minimum(law.values, t)
    total = float(clipped.sum()) + law.n_censored * t
    return total / law.n_total
