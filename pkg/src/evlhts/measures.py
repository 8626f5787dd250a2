"""Stationary measures paired with the maps.

Three kinds are provided:

* ``Lebesgue1D`` -- the acip of the tent, doubling and rotation maps.
* ``BernoulliDoubling(p)`` -- the (p, 1-p) Bernoulli measure on binary
  digits, invariant and ergodic for the doubling map and mutually singular
  with Lebesgue for p != 1/2.  Its CDF is computed exactly from the digit
  expansion of the argument: F(0.b1 b2 ...) sums, over every digit b_i = 1,
  the mass of the prefix b_1 .. b_{i-1} times p.  All endpoint arithmetic
  is done in 128-bit fixed point, so the digit expansion never truncates
  before the certified remainder is below ~1e-19.
* ``EmpiricalOrbit`` -- a long-orbit surrogate for maps without a closed
  form invariant density (Manneville-Pomeau); one orbit is generated once,
  after a burn-in, and all masses are orbit frequencies.

Ball masses reduce to CDF differences of the (at most two) arcs or
segments a metric ball induces on [0, 1].  ``quantile_radius`` inverts the
ball mass by bisection and certifies |mass - gamma| <= 1e-10, raising
``NotAttained`` on flat spots of the mass profile.
"""

import math
from fractions import Fraction

import numpy as np

from .errors import DomainError, NotAttained, UnsupportedCombination
from .rng import substream
from .systems import (
    Backend,
    BitStreamPoint,
    FloatPoint,
    MapKind,
    MapSystem,
    Metric,
    PointRep,
)

QUANTILE_MASS_TOL = 1e-10
QUANTILE_BRACKET_MIN = 1e-14
FLAT_SPOT_GAP = 1e-8

#: Working depth (binary digits) of exact endpoint arithmetic.
FIXED_DEPTH = 128
_FIXED_UNIT = 1 << FIXED_DEPTH


def point_value(x) -> float:
    """Float value of a point given as PointRep or number."""
    if isinstance(x, PointRep):
        return x.value()
    return float(x)


def _unit_to_fixed(x) -> int:
    """Exact 128-bit fixed-point representation of a point of [0, 1]."""
    if isinstance(x, BitStreamPoint):
        acc = 0
        for d in x.digits(FIXED_DEPTH):
            acc = (acc << 1) | d
        return acc
    v = point_value(x)
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"point {v!r} outside [0, 1]")
    frac = Fraction(v)
    shift = FIXED_DEPTH - (frac.denominator.bit_length() - 1)
    if shift < 0:
        raise DomainError("point finer than the fixed-point working depth")
    return frac.numerator << shift


class MeasureModel:
    """Common ball-mass / quantile machinery over an interval CDF."""

    metric: Metric

    # -- kind-specific primitives -------------------------------------
    def interval_mass(self, a: int, b: int) -> float:
        """Mass of [a, b) with fixed-point endpoints 0 <= a <= b <= 1."""
        raise NotImplementedError

    def sample_stationary(self, gen: np.random.Generator) -> PointRep:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    # -- shared operations ---------------------------------------------
    @property
    def diameter(self) -> float:
        return 0.5 if self.metric is Metric.CIRCLE else 1.0

    def _ball_arcs(self, zeta_fixed: int, eta: float) -> list[tuple[int, int]]:
        """Fixed-point [lo, hi) pieces of the ball of radius eta."""
        if eta <= 0.0:
            return []
        eta_fixed = (Fraction(eta) * _FIXED_UNIT).__floor__()
        if self.metric is Metric.CIRCLE:
            if 2 * eta_fixed >= _FIXED_UNIT:
                return [(0, _FIXED_UNIT)]
            lo = (zeta_fixed - eta_fixed) % _FIXED_UNIT
            hi = (zeta_fixed + eta_fixed) % _FIXED_UNIT
            if lo < hi:
                return [(lo, hi)]
            return [(lo, _FIXED_UNIT), (0, hi)]
        lo = max(zeta_fixed - eta_fixed, 0)
        hi = min(zeta_fixed + eta_fixed, _FIXED_UNIT)
        return [(lo, hi)] if lo < hi else []

    def ball_mass(self, zeta, eta: float) -> float:
        """Mass of the open metric ball of radius ``eta`` around ``zeta``.

        The measures here are non-atomic, so open/closed balls carry the
        same mass and the result is a CDF difference per arc piece.
        """
        zf = _unit_to_fixed(zeta)
        return math.fsum(self.interval_mass(a, b) for a, b in self._ball_arcs(zf, eta))

    def ball_masses(self, zeta, radii: np.ndarray) -> np.ndarray:
        """Vector of ``ball_mass`` over ``radii`` (subclasses may vectorize)."""
        return np.array([self.ball_mass(zeta, float(r)) for r in radii], dtype=np.float64)

    def quantile_radius(self, zeta, gamma: float) -> float:
        """Smallest radius whose ball around ``zeta`` has mass ``gamma``.

        Bisects the monotone radius -> mass profile until the bracket is
        below 1e-14 and certifies |mass - gamma| <= 1e-10.  A larger
        residual means the profile jumps across ``gamma`` (flat spot of
        the CDF / atom of the mass profile) and raises ``NotAttained``.
        """
        if not 0.0 <= gamma <= 1.0:
            raise DomainError(f"mass {gamma!r} outside [0, 1]")
        if gamma == 0.0:
            return 0.0
        zf = _unit_to_fixed(zeta)

        def mass(r: float) -> float:
            return math.fsum(self.interval_mass(a, b) for a, b in self._ball_arcs(zf, r))

        lo, hi = 0.0, self.diameter
        if mass(hi) < gamma - QUANTILE_MASS_TOL:
            raise NotAttained(f"total mass below requested level {gamma}")
        while True:
            if hi - lo < QUANTILE_BRACKET_MIN and abs(mass(hi) - gamma) <= QUANTILE_MASS_TOL:
                break
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:  # bracket is two adjacent floats
                break
            if mass(mid) >= gamma:
                hi = mid
            else:
                lo = mid
        achieved = mass(hi)
        if abs(achieved - gamma) > self._quantile_tol():
            raise NotAttained(
                f"mass profile jumps past {gamma}: nearest attainable {achieved} "
                f"(gap {abs(achieved - gamma):.3g})"
            )
        return hi

    def _quantile_tol(self) -> float:
        return FLAT_SPOT_GAP


class Lebesgue1D(MeasureModel):
    """Normalized length on [0, 1], as interval or circle."""

    def __init__(self, metric: Metric = Metric.INTERVAL):
        self.metric = metric

    def interval_mass(self, a: int, b: int) -> float:
        return (b - a) / _FIXED_UNIT

    def cdf(self, x) -> float:
        return _unit_to_fixed(x) / _FIXED_UNIT

    def ball_masses(self, zeta, radii: np.ndarray) -> np.ndarray:
        # Closed form: length of B_r(zeta) clipped to the space.
        r = np.asarray(radii, dtype=np.float64)
        if self.metric is Metric.CIRCLE:
            return np.minimum(2.0 * r, 1.0)
        z = point_value(zeta)
        return np.minimum(z + r, 1.0) - np.maximum(z - r, 0.0)

    def sample_stationary(
        self, gen: np.random.Generator, backend: Backend = Backend.FLOAT64
    ) -> PointRep:
        if backend is Backend.BITSTREAM:
            return BitStreamPoint.from_generator(gen, p_zero=0.5)
        return FloatPoint(gen.random())

    def describe(self) -> dict:
        return {"kind": "lebesgue", "metric": self.metric.value}


class BernoulliDoubling(MeasureModel):
    """(p, 1-p) Bernoulli measure on binary digits; digit 0 has mass p.

    Invariant for the doubling map.  Non-atomic and fully supported for
    p in (0, 1), so the CDF is continuous and strictly increasing, but it
    is singular with respect to Lebesgue whenever p != 1/2.
    """

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise DomainError(f"digit mass p={p!r} outside (0, 1)")
        self.p = float(p)
        self.metric = Metric.CIRCLE

    def cdf_fixed(self, x: int) -> float:
        """F(x) = mass of [0, x) for fixed-point x in [0, 2^128]."""
        if x <= 0:
            return 0.0
        if x >= _FIXED_UNIT:
            return 1.0
        p, q = self.p, 1.0 - self.p
        total = 0.0
        prefix = 1.0
        for i in range(FIXED_DEPTH):
            bit = (x >> (FIXED_DEPTH - 1 - i)) & 1
            if bit:
                total += prefix * p
                prefix *= q
            else:
                prefix *= p
            if prefix == 0.0:
                break
        return total

    def cdf(self, x) -> float:
        return self.cdf_fixed(_unit_to_fixed(x))

    def interval_mass(self, a: int, b: int) -> float:
        return max(self.cdf_fixed(b) - self.cdf_fixed(a), 0.0)

    def sample_stationary(
        self, gen: np.random.Generator, backend: Backend = Backend.BITSTREAM
    ) -> PointRep:
        return BitStreamPoint.from_generator(gen, p_zero=self.p)

    def describe(self) -> dict:
        return {"kind": "bernoulli", "p": self.p}


class EmpiricalOrbit(MeasureModel):
    """Long-orbit surrogate measure for maps lacking a closed form.

    One orbit of length ``orbit_len`` is generated once from a seeded
    start after ``burn_in`` discarded steps; every mass is the frequency
    of orbit points in the queried set.  Quantiles are resolved only to
    the atom size 1.5 / orbit_len of the empirical CDF.
    """

    def __init__(
        self,
        system: MapSystem,
        master_seed: int = 0,
        orbit_len: int = 10**6,
        burn_in: int = 10**4,
        x0: float | None = None,
    ):
        if system.kind in (MapKind.FULL_TENT, MapKind.DOUBLING):
            raise UnsupportedCombination(
                "empirical orbits of the tent/doubling maps collapse in float "
                "arithmetic; these maps have closed-form measures"
            )
        self.system = system
        self.metric = system.metric
        self.orbit_len = int(orbit_len)
        self.burn_in = int(burn_in)
        self.master_seed = int(master_seed)
        if x0 is None:
            x0 = float(substream(master_seed, "empirical-orbit", "start").random())
        self._x0 = x0
        self.orbit = self._run_orbit(x0)
        self._sorted = np.sort(self.orbit)

    def _run_orbit(self, x0: float) -> np.ndarray:
        kind = self.system.kind
        n = self.orbit_len + self.burn_in
        out = np.empty(self.orbit_len)
        x = x0
        if kind is MapKind.MANNEVILLE_POMEAU:
            e = 1.0 + self.system.s
            for j in range(n):
                if j >= self.burn_in:
                    out[j - self.burn_in] = x
                x = x + x**e
                if x >= 1.0:
                    x -= 1.0
        elif kind is MapKind.ROTATION:
            from .systems import FIXED_ONE

            xi = round(x * FIXED_ONE)
            step = self.system.fixed_angle
            for j in range(n):
                if j >= self.burn_in:
                    out[j - self.burn_in] = xi / FIXED_ONE
                xi = (xi + step) % FIXED_ONE
        else:  # pragma: no cover - guarded in __init__
            raise UnsupportedCombination(kind)
        return out

    def interval_mass(self, a: int, b: int) -> float:
        lo = a / _FIXED_UNIT
        hi = b / _FIXED_UNIT
        i = np.searchsorted(self._sorted, lo, side="left")
        j = np.searchsorted(self._sorted, hi, side="left")
        return (j - i) / self.orbit_len

    def cdf(self, x) -> float:
        v = point_value(x)
        return np.searchsorted(self._sorted, v, side="left") / self.orbit_len

    def sample_stationary(
        self, gen: np.random.Generator, backend: Backend = Backend.FLOAT64
    ) -> PointRep:
        return FloatPoint(float(self.orbit[gen.integers(self.orbit_len)]))

    def _quantile_tol(self) -> float:
        return 1.5 / self.orbit_len

    def describe(self) -> dict:
        return {
            "kind": "empirical_orbit",
            "system": self.system.kind.value,
            "s": self.system.s,
            "orbit_len": self.orbit_len,
            "burn_in": self.burn_in,
        }
