"""A concrete three-parameter family with a quadratic homoclinic tangency to a
resonant conservative saddle.

The local map near the saddle is taken in exact linear normal form
``(x1, x2, y) -> (lambda1 x1, lambda2 x2, gamma y)`` and the global map along the
homoclinic excursion is its quadratic Taylor truncation.  All higher-order tails
are identically zero, which makes every first-return map ``T_k = T1 o T0^k`` an
explicit polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvariantViolation, OutOfRange, OutsideDomain

# radius of the neighbourhood of the unstable manifold in which T0^k must land
TANGENCY_RADIUS = 0.05
BOX_HALF_WIDTH = 0.5


@dataclass(frozen=True)
class ResonantBase:
    lam: float
    gamma_sign: int = 1

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise InvariantViolation(f"lambda must lie in (0, 1), got {self.lam}")
        if self.gamma_sign not in (1, -1):
            raise InvariantViolation(f"gamma_sign must be +1 or -1, got {self.gamma_sign}")

    @property
    def gamma0(self) -> float:
        return self.gamma_sign / self.lam**2


@dataclass(frozen=True)
class Unfolding:
    mu1: float = 0.0
    mu2: float = 0.0
    mu3: float = 0.0

    def __post_init__(self):
        if not abs(self.mu2) < 1.0:
            raise OutOfRange(f"|mu2| must be < 1, got {self.mu2}")
        if not 1.0 + self.mu3 > 0.0:
            raise OutOfRange(f"1 + mu3 must be positive, got mu3={self.mu3}")

    def norm_inf(self) -> float:
        return max(abs(self.mu1), abs(self.mu2), abs(self.mu3))


class SaddleMultipliers(NamedTuple):
    lambda1: float
    lambda2: float
    gamma: float


class ModelState(NamedTuple):
    x1: float
    x2: float
    y: float


@dataclass(frozen=True)
class GlobalCoeffs:
    x1p: float
    x2p: float
    ym: float
    a11: float
    a12: float
    a21: float
    a22: float
    b1: float
    b2: float
    c1: float
    c2: float
    d: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not math.isfinite(getattr(self, name)):
                raise InvariantViolation(f"{name} must be finite")
        if self.d == 0:
            raise InvariantViolation("d == 0 violates the quadratic tangency condition (d != 0)")
        if self.b1 == 0 and self.b2 == 0:
            raise InvariantViolation("b1 = b2 = 0 violates the quadratic tangency condition")
        if self.c1 == 0 and self.c2 == 0:
            raise InvariantViolation("c1 = c2 = 0: the global map is not a diffeomorphism")
        if self.b1 * self.c1 * self.b2 * self.c2 == 0:
            raise InvariantViolation(
                "b1*c1*b2*c2 == 0 violates the simple-tangency condition b1 c1 b2 c2 != 0"
            )
        if self.J1 == 0:
            raise InvariantViolation("J1 == 0: the global map is not a diffeomorphism")
        if not self.ym > 0:
            raise InvariantViolation(f"ym must be positive, got {self.ym}")
        if self.x1p == 0 and self.x2p == 0:
            raise InvariantViolation("x1p = x2p = 0: M+ must lie off the saddle")

    @property
    def linear_part(self) -> np.ndarray:
        return np.array(
            [[self.a11, self.a12, self.b1], [self.a21, self.a22, self.b2], [self.c1, self.c2, 0.0]]
        )

    @property
    def J1(self) -> float:
        # cofactor expansion along the third row
        return self.c1 * (self.a12 * self.b2 - self.a22 * self.b1) - self.c2 * (
            self.a11 * self.b2 - self.a21 * self.b1
        )

    @property
    def eta_max(self) -> float:
        """Smallest ``|y - ym|`` at which the global map's differential is singular.

        ``det DT1 = J1 + 2 d (y - ym) (a11 a22 - a12 a21)`` is linear in ``y - ym``.
        """
        minor = self.a11 * self.a22 - self.a12 * self.a21
        if minor == 0:
            return math.inf
        return abs(self.J1 / (2.0 * self.d * minor))


@dataclass(frozen=True)
class ModelSpec:
    base: ResonantBase
    coeffs: GlobalCoeffs

    @property
    def k_min(self) -> int:
        """Smallest k for which T0^k takes the return box into the tangency neighbourhood."""
        c = self.coeffs
        reach = max(abs(c.x1p), abs(c.x2p)) + BOX_HALF_WIDTH
        return max(1, math.ceil(math.log(TANGENCY_RADIUS / reach) / math.log(self.base.lam)))


def default_model() -> ModelSpec:
    return ModelSpec(
        ResonantBase(0.5, 1),
        GlobalCoeffs(
            x1p=1.0, x2p=1.0, ym=1.0,
            a11=1.0, a12=0.0, a21=0.0, a22=1.0,
            b1=1.0, b2=2.0, c1=1.0, c2=1.0, d=1.0,
        ),
    )  # fmt: skip


def multipliers_from_unfolding(base: ResonantBase, u: Unfolding) -> SaddleMultipliers:
    s = math.sqrt(1.0 + u.mu3)
    lam1 = base.lam * s
    lam2 = -base.lam / s
    gamma = base.gamma_sign * (1.0 - u.mu2) / base.lam**2
    if not lam1 < 1.0:
        raise OutOfRange(f"lambda1 = {lam1} must be < 1")
    if not lam2 > -1.0:
        raise OutOfRange(f"lambda2 = {lam2} must be > -1")
    if not abs(gamma) > 1.0:
        raise OutOfRange(f"|gamma| = {abs(gamma)} must be > 1")
    return SaddleMultipliers(lam1, lam2, gamma)


def power(x: float, k: int) -> float:
    """``x**k`` by repeated multiplication, so that signs alternate exactly."""
    r = 1.0
    for _ in range(k):
        r *= x
    return r


def local_map(m: SaddleMultipliers, s) -> ModelState:
    x1, x2, y = s
    return ModelState(m.lambda1 * x1, m.lambda2 * x2, m.gamma * y)


def local_map_iterate(m: SaddleMultipliers, k: int, s) -> ModelState:
    if k < 0:
        raise ValueError("k must be non-negative")
    x1, x2, y = s
    # one multiplication per step keeps this identical to k calls of local_map
    for _ in range(k):
        x1, x2, y = m.lambda1 * x1, m.lambda2 * x2, m.gamma * y
    return ModelState(x1, x2, y)


def global_map(c: GlobalCoeffs, mu1: float, s) -> ModelState:
    x1, x2, y = s
    eta = y - c.ym
    if not abs(eta) < c.eta_max:
        raise OutsideDomain(f"|y - ym| = {abs(eta):g} outside invertibility radius {c.eta_max:g}")
    return ModelState(
        c.x1p + c.a11 * x1 + c.a12 * x2 + c.b1 * eta,
        c.x2p + c.a21 * x1 + c.a22 * x2 + c.b2 * eta,
        mu1 + c.c1 * x1 + c.c2 * x2 + c.d * eta * eta,
    )


def global_map_jacobian(c: GlobalCoeffs, s) -> np.ndarray:
    J = c.linear_part.copy()
    J[2, 2] = 2.0 * c.d * (s[2] - c.ym)
    return J


def in_return_box(spec: ModelSpec, m: SaddleMultipliers, k: int, s) -> bool:
    c = spec.coeffs
    return (
        abs(s[0] - c.x1p) <= BOX_HALF_WIDTH
        and abs(s[1] - c.x2p) <= BOX_HALF_WIDTH
        and abs(s[2]) <= 2.0 * c.ym / abs(power(m.gamma, k))
    )


def first_return_map(spec: ModelSpec, u: Unfolding, k: int, s) -> ModelState:
    if k < spec.k_min:
        raise OutsideDomain(f"k = {k} below k_min = {spec.k_min}")
    m = multipliers_from_unfolding(spec.base, u)
    if not in_return_box(spec, m, k, s):
        raise OutsideDomain(f"state {tuple(s)} outside the return box for k = {k}")
    return global_map(spec.coeffs, u.mu1, local_map_iterate(m, k, s))


def homoclinic_tangency_certificate(spec: ModelSpec, mu1: float = 0.0, n: int = 2001):
    """Minimum height of ``T1(W^u_loc)`` over ``{y = 0}`` and its curvature at ``y = ym``.

    Scans the third component of ``T1(0, 0, y)`` on ``|y - ym| < eta_max`` (capped
    at 1) and takes a central second difference at ``ym``.
    """
    c = spec.coeffs
    r = min(c.eta_max, 1.0) * (1.0 - 1e-9)
    ys = np.append(c.ym + np.linspace(-r, r, n), c.ym)
    heights = np.array([global_map(c, mu1, (0.0, 0.0, y))[2] for y in ys])
    extreme = heights.min() if c.d > 0 else heights.max()
    h = 1e-3 * r
    f = lambda y: global_map(c, mu1, (0.0, 0.0, y))[2]  # noqa: E731
    second = (f(c.ym + h) - 2.0 * f(c.ym) + f(c.ym - h)) / (h * h)
    return float(extreme), float(second)
