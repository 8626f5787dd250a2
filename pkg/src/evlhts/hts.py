"""Hitting and return times to small target sets.

A target is a positive-mass set around a center point: a cylinder of the
natural partition or a metric ball.  Runs record the first entry time of
each sampled orbit into the target within a step cap; times are censored
at the cap, never discarded, and the normalized law multiplies the times
by the target mass, so a mass-tau target with a clean exponential limit
shows rate 1.

Hitting runs start from the stationary measure; return runs condition
the start on the target itself (exact letter preload for cylinders,
digit-by-digit CDF inversion for balls under the digit-product measures,
uniform arc points for rotations, orbit points inside the set for the
intermittent map).  Kac's identity — mean return time times target mass
equals 1 — is checked from the same samples with a CLT band.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .cylinders import PartitionContext, cylinder_at, cylinder_word
from .errors import (
    CapTooSmall,
    DomainError,
    UnsupportedCombination,
)
from .evl import pack_word
from .laws import EmpiricalLaw, survival_integral
from .measures import (
    BernoulliDoubling,
    EmpiricalOrbit,
    Lebesgue1D,
    MeasureModel,
    point_value,
)
from .systems import FIXED_ONE, MapKind, MapSystem, Metric

#: Default normalized horizon: caps at 50 expected return times.
DEFAULT_HORIZON = 50.0


@dataclass(frozen=True)
class TargetSet:
    """A positive-mass set together with what samplers need to hit it."""

    kind: str  # "cylinder" | "ball"
    mass: float
    zeta_value: float
    word: tuple = ()  # cylinder letters (digit systems)
    depth: int = 0
    arc: tuple | None = None  # fixed-point [lo, hi) (rotation targets)
    eta: float = 0.0  # ball radius
    cdf_arcs: tuple | None = None  # ((cdf lo...), (cdf hi...)) of ball pieces


def cylinder_target(ctx: PartitionContext, zeta, depth: int) -> TargetSet:
    """The depth-``depth`` cylinder around zeta as a hit target."""
    cyl = cylinder_at(ctx, zeta, depth)
    if cyl.mass <= 0.0:
        raise DomainError(f"cylinder at depth {depth} has zero sampled mass")
    word = cylinder_word(ctx, zeta, depth)
    arc = None
    if ctx.system.kind is MapKind.ROTATION:
        lo = cyl.lo * FIXED_ONE
        hi = cyl.hi * FIXED_ONE
        arc = (int(lo), int(hi))
        if arc[0] != lo or arc[1] != hi:  # grid cells are exact by build
            raise DomainError("rotation cell endpoints left the fixed grid")
    return TargetSet(
        kind="cylinder",
        mass=cyl.mass,
        zeta_value=point_value(zeta),
        word=word,
        depth=depth,
        arc=arc,
    )


def ball_target(measure: MeasureModel, zeta, *, eta: float | None = None,
                mass: float | None = None) -> TargetSet:
    """The ball around zeta, specified by radius or by mass (not both)."""
    if (eta is None) == (mass is None):
        raise DomainError("give exactly one of eta and mass")
    if eta is None:
        eta = measure.quantile_radius(zeta, mass)
    z = point_value(zeta)
    mass = measure.ball_mass(zeta, eta)
    if mass <= 0.0:
        raise DomainError("ball carries no mass")
    if measure.metric is Metric.CIRCLE:
        lo, hi = (z - eta) % 1.0, (z + eta) % 1.0
        pieces = [(lo, hi)] if lo < hi else [(lo, 1.0), (0.0, hi)]
        if 2 * eta >= 1.0:
            pieces = [(0.0, 1.0)]
    else:
        pieces = [(max(z - eta, 0.0), min(z + eta, 1.0))]
    cdf_lo = tuple(measure.cdf(a) for a, _ in pieces)
    cdf_hi = tuple(measure.cdf(b) for _, b in pieces)
    return TargetSet(
        kind="ball",
        mass=mass,
        zeta_value=z,
        eta=eta,
        cdf_arcs=(cdf_lo, cdf_hi),
    )


def default_cap(mass: float, horizon: float = DEFAULT_HORIZON) -> int:
    """Step cap covering ``horizon`` expected return times."""
    if not 0.0 < mass <= 1.0:
        raise DomainError("target mass must lie in (0, 1]")
    return max(int(math.ceil(horizon / mass)), 2)


@dataclass
class HitSample:
    """First-entry times of sampled orbits into one target."""

    times: np.ndarray
    hit: np.ndarray
    target: TargetSet
    cap: int
    start_j: int
    conditional: bool

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    @property
    def n_censored(self) -> int:
        return int((~self.hit).sum())

    def law(self) -> EmpiricalLaw:
        """Normalized law: times scaled by the target mass."""
        return EmpiricalLaw.from_hit_times(
            self.times, self.hit, scale=self.target.mass,
            cap=self.cap * self.target.mass,
        )


def sample_hit_times(
    system: MapSystem,
    target: TargetSet,
    *,
    cap: int,
    n_samples: int,
    seed: int,
    labels: tuple = ("hit-times",),
    threads: int = 1,
    conditional: bool = False,
    start_j: int = 1,
    measure: MeasureModel | None = None,
) -> HitSample:
    """First entry times into the target for ``n_samples`` orbits.

    ``conditional`` starts the orbit inside the target (return times);
    otherwise starts are stationary (hitting times).  ``measure`` is
    required for the digit systems (to read the digit frequency) and for
    the intermittent map (the empirical orbit to draw starts from).
    """
    if cap < 2:
        raise DomainError("cap must allow at least one step")
    kernel = _hit_kernel(system, target, cap, start_j, conditional, measure)
    route = "ret" if conditional else "hit"
    times, hit = engine.run_blocked(
        n_samples, seed, (*labels, route), kernel, threads=threads
    )
    return HitSample(times, hit, target, cap, start_j, conditional)


def _digit_p_zero(measure) -> float:
    if isinstance(measure, Lebesgue1D):
        return 0.5
    if isinstance(measure, BernoulliDoubling):
        return measure.p
    raise UnsupportedCombination(
        "digit systems need a digit-product measure; got "
        f"{type(measure).__name__}"
    )


def _hit_kernel(system, target, cap, start_j, conditional, measure):
    kind = system.kind
    if kind in (MapKind.FULL_TENT, MapKind.DOUBLING):
        if measure is None:
            raise DomainError("digit systems need the measure for sampling")
        p_zero = _digit_p_zero(measure)
        tent = kind is MapKind.FULL_TENT
        if target.kind == "cylinder":
            word_int = pack_word(target.word)
            depth = target.depth

            def kernel(gen, count):
                return engine.word_first_hit(
                    gen, count, word_int=word_int, depth=depth, tent=tent,
                    p_zero=p_zero, cap=cap, start_j=start_j,
                    preload=conditional,
                )
        else:
            circle = measure.metric is Metric.CIRCLE
            eta, zeta, arcs = target.eta, target.zeta_value, target.cdf_arcs

            def kernel(gen, count):
                initial = None
                if conditional:
                    initial = engine.conditional_digit_starts(
                        gen, count, arcs=arcs, p_zero=p_zero
                    )
                return engine.ball_first_hit_digits(
                    gen, count, eta=eta, zeta=zeta, tent=tent, p_zero=p_zero,
                    circle=circle, cap=cap, start_j=start_j,
                    initial_digits=initial,
                )
        return kernel

    if kind is MapKind.ROTATION:
        step = system.fixed_angle
        if target.kind == "cylinder":
            lo, hi = target.arc
        else:
            # Shift coordinates so the ball becomes the arc [0, width):
            # uniform starts are shift-invariant, so stationary sampling
            # is unchanged and conditional starts are uniform on the arc.
            width = min(round(2 * target.eta * FIXED_ONE), FIXED_ONE)
            lo, hi = 0, max(int(width), 1)

        def kernel(gen, count):
            starts = None
            if conditional:
                starts = gen.integers(lo, hi, size=count, dtype=np.uint64)
            return engine.rotation_first_hit(
                gen, count, step_fixed=step, lo=lo, hi=hi, cap=cap,
                start_j=start_j, starts=starts,
            )
        return kernel

    if kind is MapKind.MANNEVILLE_POMEAU:
        if target.kind != "ball":
            raise UnsupportedCombination(
                "the intermittent map has no partition cylinders here"
            )
        if not isinstance(measure, EmpiricalOrbit):
            raise DomainError("intermittent runs need the empirical orbit")
        orbit = measure.orbit
        eta, zeta = target.eta, target.zeta_value
        if conditional:
            inside = np.flatnonzero(np.abs(orbit - zeta) < eta)
            if inside.size == 0:
                raise DomainError("no orbit point falls in the target ball")
        else:
            inside = None

        def kernel(gen, count):
            if inside is None:
                starts = orbit[gen.integers(0, orbit.size, size=count)]
            else:
                starts = orbit[inside[gen.integers(0, inside.size, size=count)]]
            return engine.mp_first_hit(
                gen, count, s_exp=system.s, eta=eta, zeta=zeta, cap=cap,
                start_j=start_j, starts=starts,
            )
        return kernel

    raise UnsupportedCombination(kind)  # pragma: no cover - exhaustive


# ------------------------------------------------------------------- Kac

@dataclass(frozen=True)
class KacReport:
    """Mean return time times target mass, with a 3-sigma CLT band."""

    product: float
    band: float
    n_samples: int
    mass: float

    @property
    def passed(self) -> bool:
        return abs(self.product - 1.0) <= self.band


def kac_check(sample: HitSample) -> KacReport:
    """Certify mean(return time) * mass = 1 on an uncensored return run."""
    if not sample.conditional or sample.start_j < 1:
        raise DomainError("Kac's identity concerns return times (start inside)")
    if sample.n_censored:
        raise CapTooSmall(
            f"{sample.n_censored} returns censored at cap {sample.cap}; "
            "the mean needs every return time"
        )
    times = sample.times.astype(np.float64)
    mass = sample.target.mass
    product = float(times.mean() * mass)
    se = float(times.std(ddof=1) * mass / math.sqrt(times.size))
    return KacReport(product, 3.0 * se, int(times.size), mass)


# ---------------------------------------------------- return-vs-hit bridge

def hts_curve_from_rts(rts_law: EmpiricalLaw, t_grid) -> np.ndarray:
    """Hitting-time CDF implied by a return-time law.

    In the normalized limit the two laws determine each other:
    F_hit(t) = integral_0^t (1 - F_ret(s)) ds, evaluated here exactly on
    the step ECDF of the return sample.
    """
    return np.array([survival_integral(rts_law, t) for t in t_grid])


def compare_hts_rts(hts_law: EmpiricalLaw, rts_law: EmpiricalLaw,
                    t_grid) -> float:
    """sup over the grid of |empirical hitting CDF - integrated return law|."""
    implied = hts_curve_from_rts(rts_law, t_grid)
    direct = np.array([hts_law.cdf(t) for t in t_grid])
    return float(np.max(np.abs(direct - implied)))
