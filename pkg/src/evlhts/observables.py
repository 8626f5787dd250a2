"""Observables maximized at a target point, built from a shape function.

phi(x) = g(v(x)) where v(x) is a small-mass coordinate around the target
zeta and g: (0, 1] -> R is strictly decreasing:

* ball mode: v(x) = mu(B_d(zeta)) with d = dist(x, zeta) — the mass of
  the ball that just reaches x,
* cylinder mode: v(x) = mu(Z_n[zeta]) at the deepest partition level n
  whose cell around zeta still contains x.

Because g is strictly decreasing, {phi > u} is a ball (resp. cylinder)
around zeta of mass g^{-1}(u), which is what every threshold routine here
exploits.

Three shape families are provided, one per classical extreme value type:

  type 1: g(v) = -log v               range [0, inf)
  type 2: g(v) = v^(-1/alpha)         range [1, inf),   alpha > 0
  type 3: g(v) = top - v^(1/alpha)    range [top-1, top], alpha > 0

``tau`` maps a rescaled level y to the time-scaling constant used when
comparing maxima with hitting times: exp(-y), y^(-alpha) (infinite for
y <= 0), and (-y)^alpha (zero for y > 0) respectively.
"""

import math
from dataclasses import dataclass
from enum import Enum

from .cylinders import PartitionContext, cylinder_at, max_depth_in
from .errors import DomainError, OutOfRange
from .measures import MeasureModel, point_value
from .systems import distance


class GKind(str, Enum):
    G1 = "g1"
    G2 = "g2"
    G3 = "g3"


@dataclass(frozen=True)
class GShape:
    """A strictly decreasing shape g on (0, 1] with its inverse and tau."""

    kind: GKind
    alpha: float = 1.0
    top: float = 1.0  # essential sup of the observable (type 3 only)

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not math.isfinite(self.top):
            raise DomainError(f"top must be finite, got {self.top}")

    @property
    def value_at_zero(self) -> float:
        """sup phi: the value assigned to x = zeta (v = 0)."""
        return self.top if self.kind is GKind.G3 else math.inf

    def forward(self, v: float) -> float:
        """g(v) for v in [0, 1]; v = 0 gives the supremum."""
        if not 0.0 <= v <= 1.0:
            raise OutOfRange(f"mass argument {v} outside [0, 1]")
        if v == 0.0:
            return self.value_at_zero
        if self.kind is GKind.G1:
            return -math.log(v)
        if self.kind is GKind.G2:
            return v ** (-1.0 / self.alpha)
        return self.top - v ** (1.0 / self.alpha)

    def inverse(self, u: float) -> float:
        """g^{-1}(u); raises OutOfRange when u is below g(1) or above sup."""
        if self.kind is GKind.G1:
            if u < 0.0:
                raise OutOfRange(f"level {u} below g(1) = 0")
            return math.exp(-u)
        if self.kind is GKind.G2:
            if u < 1.0:
                raise OutOfRange(f"level {u} below g(1) = 1")
            return u ** (-self.alpha)
        if not self.top - 1.0 <= u <= self.top:
            raise OutOfRange(f"level {u} outside [{self.top - 1.0}, {self.top}]")
        return (self.top - u) ** self.alpha

    def tail_fraction(self, u: float) -> float:
        """mu(g(v) > u) as a function of the v-mass: the clipped inverse."""
        if self.kind is GKind.G1:
            return 1.0 if u < 0.0 else math.exp(-u)
        if self.kind is GKind.G2:
            return 1.0 if u < 1.0 else u ** (-self.alpha)
        if u >= self.top:
            return 0.0
        if u <= self.top - 1.0:
            return 1.0
        return (self.top - u) ** self.alpha

    def tau(self, y: float) -> float:
        """Level-to-rate map; +inf / 0 outside the support of the law."""
        if self.kind is GKind.G1:
            return math.exp(-y)
        if self.kind is GKind.G2:
            return math.inf if y <= 0.0 else y ** (-self.alpha)
        return 0.0 if y > 0.0 else (-y) ** self.alpha


@dataclass
class BallObservable:
    """phi(x) = g(ball mass at radius dist(x, zeta))."""

    g: GShape
    measure: MeasureModel
    zeta: object  # PointRep or float in [0, 1]

    def __post_init__(self):
        self._zeta_value = point_value(self.zeta)

    @property
    def mode(self) -> str:
        return "ball"

    @property
    def zeta_value(self) -> float:
        return self._zeta_value

    def evaluate(self, x) -> float:
        d = distance(self.measure.metric, point_value(x), self._zeta_value)
        return self.g.forward(self.measure.ball_mass(self.zeta, d))

    def evaluate_ex(self, x) -> tuple[float, bool]:
        return self.evaluate(x), False

    def exceedance_mass(self, u: float) -> float:
        """mu(phi > u).

        Exact whenever the ball mass grows continuously and strictly in
        the radius (true for the closed-form measures away from atoms);
        for orbit-empirical measures it is the same formula evaluated on
        the approximating measure.
        """
        return self.g.tail_fraction(u)

    def threshold_radius(self, u: float) -> float:
        """Radius eta with mu(B_eta(zeta)) = mu(phi > u)."""
        v = self.g.tail_fraction(u)
        if v <= 0.0:
            return 0.0
        if v >= 1.0:
            return self.measure.diameter
        return self.measure.quantile_radius(self.zeta, v)


@dataclass
class CylinderObservable:
    """phi(x) = g(mass of the deepest cylinder around zeta containing x)."""

    g: GShape
    ctx: PartitionContext
    zeta: object

    def __post_init__(self):
        self._ladder: list[float] = [1.0]  # mass of Z_k[zeta], k = 0, 1, ...

    @property
    def mode(self) -> str:
        return "cylinder"

    @property
    def measure(self) -> MeasureModel:
        return self.ctx.measure

    @property
    def zeta_value(self) -> float:
        return point_value(self.zeta)

    def ladder_mass(self, k: int) -> float:
        """mu(Z_k[zeta]), cached per depth."""
        if k < 0 or k > self.ctx.max_depth:
            raise DomainError(f"depth {k} outside [0, {self.ctx.max_depth}]")
        while len(self._ladder) <= k:
            self._ladder.append(
                cylinder_at(self.ctx, self.zeta, len(self._ladder)).mass
            )
        return self._ladder[k]

    def evaluate_ex(self, x) -> tuple[float, bool]:
        """(phi(x), overflow).  overflow means the itinerary of x agreed
        with the target's past the depth cap, so phi is reported as the
        supremum and the caller should treat the sample as censored."""
        n = max_depth_in(self.ctx, x, self.zeta)
        if n >= self.ctx.max_depth:
            return self.g.value_at_zero, True
        return self.g.forward(self.ladder_mass(n)), False

    def evaluate(self, x) -> float:
        return self.evaluate_ex(x)[0]

    def exceedance_depth(self, u: float) -> int:
        """Depth k such that {phi > u} = Z_k[zeta], exactly as sets.

        phi(x) > u iff the ladder mass at the depth of x is below
        g^{-1}(u), and the ladder is nested, so the exceedance set is the
        first cylinder whose mass drops below g^{-1}(u).  Levels below
        g(1) are exceeded everywhere (k = 0); levels at or above sup phi
        have no exceedance cylinder and raise OutOfRange."""
        if u >= self.g.value_at_zero:
            raise OutOfRange(f"level {u} is not below sup phi")
        if u < self.g.forward(1.0):
            return 0
        v = self.g.inverse(u)
        k = 1
        while self.ladder_mass(k) >= v:
            k += 1
            if k > self.ctx.max_depth:
                raise OutOfRange(
                    f"level {u} needs cylinders deeper than {self.ctx.max_depth}"
                )
        return k

    def exceedance_mass(self, u: float) -> float:
        """mu(phi > u) = mass of the cylinder {phi > u}."""
        if u >= self.g.value_at_zero:
            return 0.0
        return self.ladder_mass(self.exceedance_depth(u))
