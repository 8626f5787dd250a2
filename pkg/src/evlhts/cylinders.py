"""Dynamically defined cylinders over the natural Markov partitions.

The depth-n partition is the join of the first n pullbacks of a base
partition P0:

* full tent map: P0 = {[0, 1/2], (1/2, 1]}; the depth-n cells are the
  dyadic intervals of length 2^-n,
* doubling map: P0 = {[0, 1/2), [1/2, 1)}; depth-n cells are the binary
  digit cylinders [k 2^-n, (k+1) 2^-n),
* rotation: P0 = {[0, 1-alpha), [1-alpha, 1)}; the depth-n cells are the
  n+1 arcs cut by the backward orbit of 0 (the classical three-distance
  structure), computed here in exact 63-bit fixed point.

Membership is decided by the itinerary (the exact letter sequence of the
orbit through P0), which is self-consistent at every point.  Interval
endpoints are reported with the uniform half-open convention of each map
(right-closed for the tent cells, left-closed otherwise); the two views
can disagree only on the measure-zero set of cell boundaries.

Masses are exact: powers of 2 for Lebesgue on the tent/doubling cells
(carried as an integer base-2 log so deep cylinders never underflow),
digit products for the Bernoulli measure (carried in log space), and arc
lengths for the rotation.
"""

import bisect
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DomainError, UnsupportedCombination, ZeroMassCylinder
from .measures import BernoulliDoubling, Lebesgue1D, MeasureModel
from .systems import (
    FIXED_ONE,
    BitStreamPoint,
    FloatPoint,
    MapKind,
    MapSystem,
    PointRep,
)

LN2 = math.log(2)

#: Default number of recorded partition levels.
DEFAULT_MAX_DEPTH = 60


@dataclass(frozen=True)
class Cylinder:
    """One partition cell: exact endpoints, closures, and mass."""

    depth: int
    lo: Fraction
    hi: Fraction
    closed_left: bool
    closed_right: bool
    mass: float
    log_mass: float
    log2_mass: int | None = None  # exact when the mass is a power of 2

    @property
    def width(self) -> float:
        return float(self.hi - self.lo)


@dataclass
class PartitionContext:
    """A map, a compatible measure, and a depth cap for cylinder queries."""

    system: MapSystem
    measure: MeasureModel
    max_depth: int = DEFAULT_MAX_DEPTH
    _rotation_bounds: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        kind = self.system.kind
        if kind is MapKind.MANNEVILLE_POMEAU:
            raise UnsupportedCombination(
                "no Markov partition is provided for the intermittent map"
            )
        if kind is MapKind.ROTATION and not isinstance(self.measure, Lebesgue1D):
            raise UnsupportedCombination("rotation cylinders require Lebesgue")
        if isinstance(self.measure, BernoulliDoubling) and kind is not MapKind.DOUBLING:
            raise UnsupportedCombination(
                "the Bernoulli digit measure is invariant only for the doubling map"
            )

    def rotation_bounds(self, depth: int) -> list[int]:
        """Sorted fixed-point boundary set {-k alpha mod 1 : k <= depth}."""
        got = self._rotation_bounds.get(depth)
        if got is None:
            a = self.system.fixed_angle
            got = sorted(((-k * a) % FIXED_ONE) for k in range(depth + 1))
            self._rotation_bounds[depth] = got
        return got


def _letter_log_mass(ctx: PartitionContext) -> tuple[float, float] | None:
    """Per-letter log masses when the cylinder mass is a letter product."""
    kind = ctx.system.kind
    if kind in (MapKind.FULL_TENT, MapKind.DOUBLING) and isinstance(
        ctx.measure, Lebesgue1D
    ):
        return (math.log(0.5), math.log(0.5))
    if kind is MapKind.DOUBLING and isinstance(ctx.measure, BernoulliDoubling):
        return (math.log(ctx.measure.p), math.log(1.0 - ctx.measure.p))
    return None


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, FloatPoint):
        return Fraction(x.value())
    if isinstance(x, (int, float)):
        return Fraction(float(x))
    raise DomainError(f"cannot take exact value of {type(x).__name__}")


HALF = Fraction(1, 2)


def cylinder_word(ctx: PartitionContext, x, n: int) -> tuple[int, ...]:
    """Itinerary of ``x`` through the base partition for ``n`` steps.

    Letters are 0 for the left base cell and 1 for the right one.  Float
    points are followed in exact rational arithmetic; digit-stream points
    read their letters from the stream (for the tent map the letter at
    step j is the leading digit of the j-th iterate), which matches the
    interval rule everywhere except possibly on the measure-zero set of
    dyadic cell boundaries.
    """
    if n < 0:
        raise DomainError("word length must be >= 0")
    kind = ctx.system.kind
    if kind is MapKind.FULL_TENT:
        if isinstance(x, BitStreamPoint):
            letters = []
            cur = x
            for _ in range(n):
                letters.append(cur.digit(1))
                cur = cur.shifted(1, tent=True)
            return tuple(letters)
        v = _to_fraction(x)
        if not 0 <= v <= 1:
            raise DomainError("point outside [0, 1]")
        letters = []
        for _ in range(n):
            if v <= HALF:
                letters.append(0)
                v = 2 * v
            else:
                letters.append(1)
                v = 2 - 2 * v
        return tuple(letters)
    if kind is MapKind.DOUBLING:
        if isinstance(x, BitStreamPoint):
            return tuple(x.digits(n))
        v = _to_fraction(x)
        if v == 1:
            v = Fraction(0)
        letters = []
        for _ in range(n):
            v = 2 * v
            if v >= 1:
                letters.append(1)
                v -= 1
            else:
                letters.append(0)
        return tuple(letters)
    if kind is MapKind.ROTATION:
        xi = _rotation_fixed(x)
        a = ctx.system.fixed_angle
        thr = FIXED_ONE - a
        letters = []
        for _ in range(n):
            letters.append(0 if xi < thr else 1)
            xi = (xi + a) % FIXED_ONE
        return tuple(letters)
    raise UnsupportedCombination(kind)


def _rotation_fixed(x) -> int:
    v = x.value() if isinstance(x, PointRep) else float(x)
    if not 0.0 <= v <= 1.0:
        raise DomainError("point outside [0, 1]")
    return round(v * FIXED_ONE) % FIXED_ONE


def _tent_interval(word) -> tuple[Fraction, Fraction]:
    """Exact endpoints of the tent cell with the given itinerary."""
    lo, hi = Fraction(0), Fraction(1)
    orient = 1
    for w in word:
        mid = (lo + hi) / 2
        if (w == 0) == (orient > 0):
            hi = mid
        else:
            lo = mid
        if w == 1:
            orient = -orient
    return lo, hi


def cylinder_at(ctx: PartitionContext, zeta, n: int) -> Cylinder:
    """The depth-``n`` cylinder around ``zeta`` with its exact mass."""
    if not 0 <= n:
        raise DomainError("depth must be >= 0")
    kind = ctx.system.kind
    if n == 0:
        return Cylinder(0, Fraction(0), Fraction(1), True, True, 1.0, 0.0, 0)
    word = cylinder_word(ctx, zeta, n)
    if kind is MapKind.FULL_TENT:
        lo, hi = _tent_interval(word)
        return Cylinder(
            n, lo, hi, closed_left=(lo == 0), closed_right=True,
            mass=_pow2_float(-n), log_mass=-n * LN2, log2_mass=-n,
        )
    if kind is MapKind.DOUBLING:
        idx = 0
        for w in word:
            idx = (idx << 1) | w
        lo = Fraction(idx, 1 << n)
        hi = Fraction(idx + 1, 1 << n)
        if isinstance(ctx.measure, Lebesgue1D):
            return Cylinder(
                n, lo, hi, True, False,
                mass=_pow2_float(-n), log_mass=-n * LN2, log2_mass=-n,
            )
        if isinstance(ctx.measure, BernoulliDoubling):
            lp = math.log(ctx.measure.p)
            lq = math.log(1.0 - ctx.measure.p)
            log_mass = math.fsum(lp if w == 0 else lq for w in word)
            return Cylinder(n, lo, hi, True, False, math.exp(log_mass), log_mass)
        raise UnsupportedCombination(type(ctx.measure).__name__)
    if kind is MapKind.ROTATION:
        bounds = ctx.rotation_bounds(n)
        zi = _rotation_fixed(zeta)
        i = bisect.bisect_right(bounds, zi) - 1
        lo_i = bounds[i]
        hi_i = bounds[i + 1] if i + 1 < len(bounds) else FIXED_ONE
        mass = (hi_i - lo_i) / FIXED_ONE
        if mass <= 0.0:
            raise ZeroMassCylinder(f"empty rotation arc at depth {n}")
        return Cylinder(
            n, Fraction(lo_i, FIXED_ONE), Fraction(hi_i, FIXED_ONE),
            True, False, mass, math.log(mass),
        )
    raise UnsupportedCombination(kind)


def _pow2_float(e: int) -> float:
    try:
        return math.ldexp(1.0, e)
    except OverflowError:  # pragma: no cover
        return float("inf")


def max_depth_in(ctx: PartitionContext, x, zeta) -> int:
    """Largest n <= max_depth with x in the depth-n cylinder around zeta.

    Returns 0 when x already falls outside the depth-1 cell.  The value
    ``ctx.max_depth`` means the match reached the depth cap and is an
    overflow marker: the true depth is only known to be >= max_depth.
    """
    cap = ctx.max_depth
    wx = cylinder_word(ctx, x, cap)
    wz = cylinder_word(ctx, zeta, cap)
    depth = 0
    while depth < cap and wx[depth] == wz[depth]:
        depth += 1
    return depth


def smb_estimate(ctx: PartitionContext, zeta, n: int) -> float:
    """Depth-normalized information -log mu(Z_n[zeta]) / n.

    Uses the exact integer base-2 log when the mass is a dyadic power, so
    the tent/Lebesgue estimate is exactly log 2 at every depth and never
    underflows; otherwise works from the accumulated log mass.
    """
    if n < 1:
        raise DomainError("depth must be >= 1")
    cyl = cylinder_at(ctx, zeta, n)
    if cyl.log2_mass is not None:
        return LN2 * (-cyl.log2_mass / n)
    if not math.isfinite(cyl.log_mass):
        raise ZeroMassCylinder(f"zero-mass cylinder at depth {n}")
    return -cyl.log_mass / n


def gibbs_envelope(
    ctx: PartitionContext,
    zeta,
    n: int,
    potential: tuple[float, float],
    pressure: float = 0.0,
) -> float:
    """Ratio mu(Z_n[zeta]) / exp(S_n phi(zeta) - n P) for a potential that
    is constant on each base cell.

    Both the cylinder log mass and the Birkhoff sum are accumulated as
    per-letter float sums in the same order, so when the potential values
    equal the letter log masses (and P = 0) the ratio is exactly 1.0.
    """
    if n < 1:
        raise DomainError("depth must be >= 1")
    word = cylinder_word(ctx, zeta, n)
    letter_logs = _letter_log_mass(ctx)
    if letter_logs is not None:
        log_mass = math.fsum(letter_logs[w] for w in word)
    else:
        log_mass = cylinder_at(ctx, zeta, n).log_mass
    if not math.isfinite(log_mass):
        raise ZeroMassCylinder(f"zero-mass cylinder at depth {n}")
    s_n = math.fsum(potential[w] for w in word)
    return math.exp(log_mass - (s_n - n * pressure))


def cells_at_depth(ctx: PartitionContext, depth: int) -> list[Cylinder]:
    """All depth-``depth`` cells (small depths only for the expanding maps)."""
    kind = ctx.system.kind
    if kind is MapKind.ROTATION:
        bounds = ctx.rotation_bounds(depth)
        out = []
        for i, lo_i in enumerate(bounds):
            hi_i = bounds[i + 1] if i + 1 < len(bounds) else FIXED_ONE
            if hi_i == lo_i:
                continue
            mass = (hi_i - lo_i) / FIXED_ONE
            out.append(
                Cylinder(
                    depth, Fraction(lo_i, FIXED_ONE), Fraction(hi_i, FIXED_ONE),
                    True, False, mass, math.log(mass),
                )
            )
        return out
    if depth > 14:
        raise DomainError("refusing to enumerate more than 2^14 cells")
    out = []
    for idx in range(1 << depth):
        lo = Fraction(idx, 1 << depth)
        probe = lo + Fraction(1, 1 << (depth + 1))  # interior point
        out.append(cylinder_at(ctx, FloatPoint(float(probe)), depth))
    # de-duplicate while preserving order (tent words are not in idx order)
    seen = set()
    unique = []
    for c in out:
        key = (c.lo, c.hi)
        if key not in seen:
            seen.add(key)
            unique.append(c)
    return unique


def write_cells_csv(ctx: PartitionContext, depth: int, path: str):
    """Dump (depth, lo, hi, mass) rows for every cell at one depth."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["depth", "lo", "hi", "mass"])
        for c in cells_at_depth(ctx, depth):
            w.writerow([c.depth, repr(float(c.lo)), repr(float(c.hi)), repr(c.mass)])
