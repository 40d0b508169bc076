"""The three-dimensional Henon map ``(x, y, z) -> (y, z, m1 + m2*y + b*x - z**2)``.

Besides iteration this module provides fixed points with their multipliers,
the resonant ``(-1, -1, +1)`` degeneracy, Lyapunov spectra, a coarse attractor
classification, and the coordinate permutation identifying the map with the
limit form ``(X1, X2, Y) -> (Y, X1, M1 + M2*X1 + B*X2 - Y**2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import OrbitDiverged
from .quadmap import DIVERGE_AT, LyapunovResult, Orbit, QuadraticMap

EPS_FLOOR = 0.005


@dataclass(frozen=True)
class HenonParams:
    m1: float
    m2: float
    b: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.m1, self.m2, self.b)):
            raise ValueError(f"non-finite Henon parameters {self}")

    def as_map(self) -> QuadraticMap:
        A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [self.b, self.m2, 0.0]])
        return QuadraticMap(A, np.array([0.0, 0.0, self.m1]))


class HenonState(NamedTuple):
    x: float
    y: float
    z: float


def henon_step(p: HenonParams, s) -> HenonState:
    x, y, z = s
    return HenonState(y, z, p.m1 + p.m2 * y + p.b * x - z * z)


def henon_jacobian(p: HenonParams, s) -> np.ndarray:
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [p.b, p.m2, -2.0 * s[2]]])


def limit_map_step(p: HenonParams, X) -> HenonState:
    """One step of the limit map in ``(X1, X2, Y)`` order."""
    X1, X2, Y = X
    return HenonState(Y, X1, p.m1 + p.m2 * X1 + p.b * X2 - Y * Y)


def limit_to_henon_coords(X) -> HenonState:
    """``(X1, X2, Y) -> (x, y, z) = (X2, X1, Y)``; the permutation is its own inverse."""
    X1, X2, Y = X
    return HenonState(X2, X1, Y)


henon_to_limit_coords = limit_to_henon_coords


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPoint:
    state: HenonState
    multipliers: np.ndarray  # complex, length 3
    multiplicity: int = 1


def _cubic(z: float, p: HenonParams):
    """Characteristic polynomial coefficients of the differential at ``(z, z, z)``."""
    return np.array([1.0, 2.0 * z, -p.m2, -p.b])


def _polish_clusters(roots: np.ndarray, coeffs: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    # Eigenvalues of a Jordan block are only sqrt(eps) accurate; a root of
    # multiplicity m is a simple root of the (m-1)-th derivative, so refine there.
    roots = roots.copy()
    n = len(roots)
    used = np.zeros(n, dtype=bool)
    for i in range(n):
        if used[i]:
            continue
        members = [j for j in range(n) if not used[j] and abs(roots[j] - roots[i]) < tol]
        if len(members) < 2:
            continue
        used[members] = True
        d = np.polyder(coeffs, len(members) - 1)
        dd = np.polyder(d)
        r = np.mean(roots[members]).real
        for _ in range(8):
            slope = np.polyval(dd, r)
            if slope == 0:
                break
            r -= np.polyval(d, r) / slope
        if abs(np.polyval(coeffs, r)) <= 1e-9 * max(1.0, np.abs(coeffs).max()):
            roots[members] = r
    return roots


def multipliers_at(p: HenonParams, z: float) -> np.ndarray:
    J = henon_jacobian(p, (z, z, z))
    roots = np.linalg.eigvals(J).astype(complex)
    roots = _polish_clusters(roots, _cubic(z, p))
    return np.sort_complex(roots)


def henon_fixed_points(p: HenonParams) -> list[FixedPoint]:
    """Fixed points ``(z, z, z)`` with ``z**2 + (1 - m2 - b) z - m1 = 0``."""
    beta = 1.0 - p.m2 - p.b
    disc = beta * beta + 4.0 * p.m1
    scale = beta * beta + 4.0 * abs(p.m1)
    if abs(disc) <= 8.0 * np.finfo(float).eps * scale:
        zs, mult = [-beta / 2.0], 2
    elif disc < 0:
        return []
    else:
        # stable quadratic formula
        q = -0.5 * (beta + math.copysign(math.sqrt(disc), beta))
        z1 = q
        z2 = -p.m1 / q if q != 0 else -beta - q
        zs, mult = sorted([z1, z2], reverse=True), 1
    return [FixedPoint(HenonState(z, z, z), multipliers_at(p, z), mult) for z in zs]


def find_resonant_degeneracy() -> tuple[HenonParams, HenonState]:
    """Parameters and fixed point with multipliers exactly ``(-1, -1, +1)``.

    Matching ``mu^3 + 2z mu^2 - m2 mu - b`` with ``(mu + 1)^2 (mu - 1)`` forces
    ``z = 1/2``, ``m2 = b = 1``; the fixed-point equation then gives ``m1 = -1/4``.
    """
    z = 0.5
    m2 = b = 1.0
    m1 = z * z + (1.0 - m2 - b) * z
    return HenonParams(m1, m2, b), HenonState(z, z, z)


# ---------------------------------------------------------------------------
# orbits and diagnostics


def iterate_orbit(
    p: HenonParams, s0, transient: int = 0, n: int = 1, diverge_at: float = DIVERGE_AT
) -> Orbit:
    return p.as_map().iterate(s0, transient, n, diverge_at)


def lyapunov_spectrum(
    p: HenonParams,
    s0,
    transient: int = 10_000,
    n: int = 1_000_000,
    *,
    diverge_at: float = DIVERGE_AT,
    stderr_tol: float = 1e-2,
) -> LyapunovResult:
    """Lyapunov exponents (nats/iteration) with block-averaged standard errors.

    Raises OrbitDiverged if the orbit leaves the box ``|component| <= diverge_at``.
    """
    return p.as_map().lyapunov(s0, transient, n, diverge_at=diverge_at, stderr_tol=stderr_tol)


class OrbitKind(enum.Enum):
    DIVERGED = "Diverged"
    FIXED_POINT_LIKE = "FixedPointLike"
    CURVE_OR_PERIODIC = "CurveOrPeriodic"
    CHAOTIC = "Chaotic"


@dataclass(frozen=True)
class OrbitClass:
    kind: OrbitKind
    step: int | None = None
    lyapunov: LyapunovResult | None = None

    @property
    def threshold(self) -> float | None:
        if self.lyapunov is None:
            return None
        return max(EPS_FLOOR, 3.0 * self.lyapunov.stderr_max)


@dataclass(frozen=True)
class ClassifyOptions:
    transient: int = 10_000
    n: int = 1_000_000
    diverge_at: float = DIVERGE_AT
    stderr_tol: float = 1e-2


def classify_map(qmap: QuadraticMap, s0, opts: ClassifyOptions | None = None) -> OrbitClass:
    opts = opts or ClassifyOptions()
    try:
        res = qmap.lyapunov(
            s0, opts.transient, opts.n, diverge_at=opts.diverge_at, stderr_tol=opts.stderr_tol
        )
    except OrbitDiverged as exc:
        return OrbitClass(OrbitKind.DIVERGED, exc.step)
    eps = max(EPS_FLOOR, 3.0 * res.stderr_max)
    lead = res.leading
    if lead > eps:
        kind = OrbitKind.CHAOTIC
    elif lead < -eps:
        kind = OrbitKind.FIXED_POINT_LIKE
    else:
        kind = OrbitKind.CURVE_OR_PERIODIC
    return OrbitClass(kind, None, res)


def classify_attractor(p: HenonParams, s0, opts: ClassifyOptions | None = None) -> OrbitClass:
    return classify_map(p.as_map(), s0, opts)
