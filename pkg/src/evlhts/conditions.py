"""Dependence diagnostics behind the exponential-law heuristics.

Two Monte Carlo estimators quantify how far an orbit is from the iid
picture at a small cylinder event E of mass m, level-indexed by a block
length n (so tau = n * m is the expected hit count per block):

* ``dprime_estimate`` — short-range recurrence.  The statistic is
  n * sum_{j=1}^{n/k} P(x in E, f^j x in E), estimated by counting
  entries of a window of length n/k started inside E.  Under
  independence the sum is n * (n/k) * m^2 = tau^2 / k; orbits that
  linger near their starting cell (periodic/fixed centers) push it up
  by a factor of order k.  The verdict judges the excess over the iid
  value, not the raw statistic, because the iid part never vanishes.

* ``mixing_gap_estimate`` — long-range decorrelation.  After a gap of
  t = ceil(n^0.7) steps, the chance of avoiding E for a further window
  of n steps is compared between orbits started inside E and orbits
  started from the stationary measure; the difference, scaled by n * m,
  estimates the dependence surviving the gap.

Both estimators work on the digit systems (tent/doubling), where entry
counting is exact on the letter register.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import DomainError, UnsupportedCombination
from .evl import pack_word
from .hts import TargetSet, _digit_p_zero
from .systems import MapKind, MapSystem

#: Excess below this floor is treated as zero regardless of its CLT band.
DEFAULT_FLOOR = 0.02


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one dependence estimator at one (n, k) setting."""

    name: str
    estimate: float
    baseline: float
    sigma: float
    n_samples: int
    block_n: int
    window: int
    floor: float = DEFAULT_FLOOR

    @property
    def excess(self) -> float:
        return self.estimate - self.baseline

    @property
    def consistent_with_zero(self) -> bool:
        return self.excess < max(self.floor, 3.0 * self.sigma)

    @property
    def verdict(self) -> str:
        return "ConsistentWithZero" if self.consistent_with_zero \
            else "Elevated"


def _require_digit_cylinder(system: MapSystem, target: TargetSet) -> None:
    if system.kind not in (MapKind.FULL_TENT, MapKind.DOUBLING):
        raise UnsupportedCombination(
            "dependence estimators run on the digit systems"
        )
    if target.kind != "cylinder":
        raise UnsupportedCombination(
            "dependence estimators expect a cylinder event"
        )


def dprime_estimate(
    system: MapSystem,
    measure,
    target: TargetSet,
    *,
    block_n: int,
    k: int,
    n_samples: int,
    seed: int,
    labels: tuple = ("dprime",),
    threads: int = 1,
    floor: float = DEFAULT_FLOOR,
) -> ConditionReport:
    """Short-range recurrence statistic at separation factor ``k``.

    Counts entries during [1, block_n // k] for orbits conditioned to
    start in the event, giving n * m * E[count | start in E]; the iid
    baseline is n * (n//k) * m^2.
    """
    _require_digit_cylinder(system, target)
    if block_n < 1 or k < 1:
        raise DomainError("block length and separation must be >= 1")
    window = block_n // k
    if window < 1:
        raise DomainError("window block_n // k is empty")
    p_zero = _digit_p_zero(measure)
    tent = system.kind is MapKind.FULL_TENT
    word_int = pack_word(target.word)
    depth = target.depth

    def kernel(gen, count):
        return engine.word_hit_count(
            gen, count, word_int=word_int, depth=depth, tent=tent,
            p_zero=p_zero, window=window, start_j=1, preload=True,
        )

    counts = engine.run_blocked(
        n_samples, seed, (*labels, f"k{k}"), kernel, threads=threads
    )[0].astype(np.float64)
    scale = block_n * target.mass
    estimate = float(scale * counts.mean())
    sigma = float(scale * counts.std(ddof=1) / math.sqrt(counts.size))
    baseline = block_n * window * target.mass ** 2
    return ConditionReport(
        name="short-range-recurrence",
        estimate=estimate,
        baseline=baseline,
        sigma=sigma,
        n_samples=n_samples,
        block_n=block_n,
        window=window,
        floor=floor,
    )


def mixing_gap_estimate(
    system: MapSystem,
    measure,
    target: TargetSet,
    *,
    block_n: int,
    gap: int | None = None,
    n_samples: int,
    seed: int,
    labels: tuple = ("mixing-gap",),
    threads: int = 1,
    floor: float = DEFAULT_FLOOR,
) -> ConditionReport:
    """Dependence surviving a gap of t = ceil(n^0.7) steps.

    Both runs measure the no-entry probability of the window
    [gap, gap + block_n); one conditions the start on the event, the
    other starts stationary.  The report's estimate is
    n * m * |difference| and its baseline is 0.
    """
    _require_digit_cylinder(system, target)
    if block_n < 1:
        raise DomainError("block length must be >= 1")
    if gap is None:
        gap = int(math.ceil(block_n ** 0.7))
    if gap < 1:
        raise DomainError("gap must be >= 1")
    p_zero = _digit_p_zero(measure)
    tent = system.kind is MapKind.FULL_TENT
    word_int = pack_word(target.word)
    depth = target.depth
    cap = gap + block_n

    def make_kernel(preload):
        def kernel(gen, count):
            times, hit = engine.word_first_hit(
                gen, count, word_int=word_int, depth=depth, tent=tent,
                p_zero=p_zero, cap=cap, start_j=gap, preload=preload,
            )
            return (~hit,)
        return kernel

    halves = []
    for preload, tag in ((True, "cond"), (False, "free")):
        flags = engine.run_blocked(
            n_samples, seed, (*labels, tag), make_kernel(preload),
            threads=threads,
        )[0]
        halves.append(flags.astype(np.float64))
    p_cond = float(halves[0].mean())
    p_free = float(halves[1].mean())
    scale = block_n * target.mass
    estimate = scale * abs(p_cond - p_free)
    se = math.sqrt(
        p_cond * (1.0 - p_cond) / n_samples
        + p_free * (1.0 - p_free) / n_samples
    )
    return ConditionReport(
        name="mixing-gap",
        estimate=float(estimate),
        baseline=0.0,
        sigma=float(scale * se),
        n_samples=n_samples,
        block_n=block_n,
        window=gap,
        floor=floor,
    )
