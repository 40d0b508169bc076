"""Rescaling of the first-return maps ``T_k`` to the Henon limit map.

For the exact model the whole conjugacy ``C_k`` (shift, the mixing change
``x2 -> x2 - (b2/b1) x1`` and the final scaling) is affine, and
``C_k^{-1} o T_k o C_k`` is again a quadratic map of the form

    X1' = Y + alpha*X1 + beta*X2
    X2' = X1 + delta*X2
    Y'  = M1 + M2*X1 + B*X2 - Y**2

whose coefficients are computed here in extended precision.  Terms like
``gamma**(2k) * [mu1 + ...]`` cancel almost completely, so they are never
formed from large nearly equal doubles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import (
    DegenerateScale,
    IncompatibleParity,
    NoConvergence,
    OutOfRange,
    OutsideDomain,
    PrecisionLoss,
)
from .henon3d import HenonParams, limit_map_step
from .model_family import ModelSpec, Unfolding, first_return_map, multipliers_from_unfolding
from .quadmap import QuadraticMap

K_RANGE = (5, 25)
WORK_DPS = 60
VERIFY_BOX = 2.0
VERIFY_STEP = 0.5
DAMPING = 0.5
MAX_REFINE = 5


def _mp(x):
    return mpmath.mpf(x)


def _mpow(x, k: int):
    r = mpmath.mpf(1)
    for _ in range(k):
        r *= x
    return r


@dataclass(frozen=True)
class RescaledParams:
    M1: float
    M2: float
    B: float

    def as_henon(self) -> HenonParams:
        return HenonParams(self.M1, self.M2, self.B)

    def __iter__(self):
        return iter((self.M1, self.M2, self.B))


@dataclass(frozen=True)
class RescaledConjugacy:
    """Affine change ``C_k`` and the coefficients of the conjugated return map.

    ``x1 = x1p - phi1 + scale_x1*X1``, ``x2 = x2p - phi2 + mix_ratio*scale_x1*X1
    + scale_x2*X2`` and ``gamma**k * y - ym = scale_y*Y - psi``.
    """

    k: int
    lambda1: float
    lambda2: float
    gamma: float
    phi1: float
    phi2: float
    psi: float
    mix_ratio: float
    A21: float
    A22: float
    nu_k: float
    scale_y: float
    scale_x1: float
    scale_x2: float
    alpha: float
    beta: float
    delta: float
    M1: float
    M2: float
    B: float
    r_k: float
    # remainder factors of the general construction; identically zero here
    q_k: float = 0.0
    s_k: float = 0.0
    p_k: float = 0.0

    @property
    def params(self) -> RescaledParams:
        return RescaledParams(self.M1, self.M2, self.B)

    @property
    def linear_part(self) -> np.ndarray:
        return np.array(
            [[self.alpha, self.beta, 1.0], [1.0, self.delta, 0.0], [self.M2, self.B, 0.0]]
        )

    def as_map(self) -> QuadraticMap:
        return QuadraticMap(self.linear_part, np.array([0.0, 0.0, self.M1]))


def _check_k(spec: ModelSpec, k: int):
    lo, hi = K_RANGE
    if not lo <= k <= hi:
        raise OutOfRange(f"k = {k} outside the supported range [{lo}, {hi}]")
    if k < spec.k_min:
        raise OutOfRange(f"k = {k} below k_min = {spec.k_min}")


def _mp_multipliers(spec: ModelSpec, u: Unfolding):
    """Multipliers in extended precision (the float route would round ``sqrt``)."""
    multipliers_from_unfolding(spec.base, u)  # range checks
    lam = _mp(spec.base.lam)
    s = mpmath.sqrt(1 + _mp(u.mu3))
    return lam * s, -lam / s, spec.base.gamma_sign * (1 - _mp(u.mu2)) / lam**2


def _mp_shift(spec: ModelSpec, l1k, l2k, gk):
    c = spec.coeffs
    # Constant terms of the first two components and the linear-in-Y term of the
    # third vanish in the shifted coordinates; these conditions are linear here.
    M = mpmath.matrix(
        [
            [1 - c.a11 * l1k, -c.a12 * l2k, -c.b1],
            [-c.a21 * l1k, 1 - c.a22 * l2k, -c.b2],
            [0, 0, -2 * c.d * gk],
        ]
    )
    rhs = mpmath.matrix(
        [
            -(c.a11 * l1k * c.x1p + c.a12 * l2k * c.x2p),
            -(c.a21 * l1k * c.x1p + c.a22 * l2k * c.x2p),
            0,
        ]
    )
    try:
        sol = mpmath.lu_solve(M, rhs)
    except ZeroDivisionError as exc:
        raise NoConvergence("shift equations are singular") from exc
    return sol[0], sol[1], sol[2]


def _conjugacy_mp(spec: ModelSpec, u: Unfolding, k: int) -> dict:
    c = spec.coeffs
    with mpmath.workdps(WORK_DPS):
        l1, l2, g = _mp_multipliers(spec, u)
        l1k, l2k, gk = _mpow(l1, k), _mpow(l2, k), _mpow(g, k)
        phi1, phi2, psi = _mp_shift(spec, l1k, l2k, gk)
        r = _mp(c.b2) / c.b1
        ratio_k = l2k / l1k
        A21 = (c.a21 - r * c.a11) + (c.a22 - r * c.a12) * r * ratio_k
        A22 = c.a22 - r * c.a12
        nu = 1 + (_mp(c.b2) * c.c2) / (_mp(c.b1) * c.c1) * ratio_k
        if A21 == 0:
            raise DegenerateScale(f"A21 vanishes at k = {k}")
        scale_y = -1 / (c.d * gk)
        scale_x1 = c.b1 * scale_y
        scale_x2 = c.b1 * A21 * l1k * scale_y
        xs1, xs2 = c.x1p - phi1, c.x2p - phi2
        r_k = c.c1 * l1k * (-phi1) + c.c2 * l2k * (-phi2) - c.ym / gk
        bracket = _mp(u.mu1) + c.c1 * l1k * xs1 + c.c2 * l2k * xs2 - c.ym / gk
        out = dict(
            k=k,
            lambda1=l1,
            lambda2=l2,
            gamma=g,
            phi1=phi1,
            phi2=phi2,
            psi=psi,
            mix_ratio=r,
            A21=A21,
            A22=A22,
            nu_k=nu,
            scale_y=scale_y,
            scale_x1=scale_x1,
            scale_x2=scale_x2,
            alpha=c.a11 * l1k + c.a12 * r * l2k,
            beta=c.a12 * A21 * l1k * l2k,
            delta=A22 * l2k,
            M1=-c.d * gk * gk * bracket,
            M2=c.b1 * c.c1 * nu * l1k * gk,
            B=c.c2 * c.b1 * A21 * l1k * l2k * gk,
            r_k=r_k,
        )
    return out


def coordinate_shift(spec: ModelSpec, u: Unfolding, k: int) -> tuple[float, float, float]:
    """Shifts ``(phi1, phi2, psi)`` recentring ``T_k`` at the perturbed homoclinic point."""
    _check_k(spec, k)
    with mpmath.workdps(WORK_DPS):
        l1, l2, g = _mp_multipliers(spec, u)
        phi1, phi2, psi = _mp_shift(spec, _mpow(l1, k), _mpow(l2, k), _mpow(g, k))
    return float(phi1), float(phi2), float(psi)


def build_conjugacy(spec: ModelSpec, u: Unfolding, k: int) -> RescaledConjugacy:
    _check_k(spec, k)
    raw = _conjugacy_mp(spec, u, k)
    return RescaledConjugacy(**{key: (v if key == "k" else float(v)) for key, v in raw.items()})


def theorem_parameters(spec: ModelSpec, u: Unfolding, k: int) -> RescaledParams:
    """Exact ``(M1, M2, B)`` of the conjugated return map."""
    return build_conjugacy(spec, u, k).params


def leading_parameters(spec: ModelSpec, u: Unfolding, k: int) -> RescaledParams:
    """The asymptotic formulas with all correction terms dropped."""
    c = spec.coeffs
    with mpmath.workdps(WORK_DPS):
        l1, l2, g = _mp_multipliers(spec, u)
        l1k, l2k, gk = _mpow(l1, k), _mpow(l2, k), _mpow(g, k)
        M1 = -c.d * gk * gk * (u.mu1 + l1k * c.c1 * c.x1p + l2k * c.c2 * c.x2p)
        M2 = (c.b1 * c.c1 + c.b2 * c.c2 * l2k / l1k) * l1k * gk
        B = c.J1 * l1k * l2k * gk
    return RescaledParams(float(M1), float(M2), float(B))


# ---------------------------------------------------------------------------
# evaluation of the conjugated map


def _box_check(X, box: float):
    if not all(abs(x) <= box for x in X):
        raise OutsideDomain(f"X = {tuple(X)} outside the verification box [-{box}, {box}]^3")


def rescaled_return_map(spec: ModelSpec, u: Unfolding, k: int, X, *, box: float = VERIFY_BOX):
    """``C_k^{-1} o T_k o C_k`` evaluated from its recentred polynomial coefficients."""
    _box_check(X, box)
    return tuple(build_conjugacy(spec, u, k).as_map().step(X))


def _offsets(spec: ModelSpec, conj: RescaledConjugacy):
    c = spec.coeffs
    return c.x1p - conj.phi1, c.x2p - conj.phi2, c.ym - conj.psi, conj.gamma**conj.k


def apply_conjugacy(spec: ModelSpec, conj: RescaledConjugacy, X):
    """``C_k(X)``: rescaled coordinates to return-map coordinates ``(x1, x2, y)``.

    Works unchanged on mpmath inputs; in doubles ``x2`` only resolves ``X2`` to
    about ``ulp(x2) / scale_x2``, which grows like ``(lambda * gamma)**k``.
    """
    o1, o2, o3, gk = _offsets(spec, conj)
    X1, X2, Y = X
    z1 = conj.scale_x1 * X1
    return (o1 + z1, o2 + (conj.mix_ratio * z1 + conj.scale_x2 * X2), (o3 + conj.scale_y * Y) / gk)


def invert_conjugacy(spec: ModelSpec, conj: RescaledConjugacy, s):
    o1, o2, o3, gk = _offsets(spec, conj)
    x1, x2, y = s
    z1 = x1 - o1
    z2 = (x2 - o2) - conj.mix_ratio * z1
    return (z1 / conj.scale_x1, z2 / conj.scale_x2, (gk * y - o3) / conj.scale_y)


def rescaled_return_map_direct(spec: ModelSpec, u: Unfolding, k: int, X):
    """Naive double-precision composition ``C^{-1}(T_k(C(X)))``.

    Loses roughly ``gamma**k`` relative accuracy to cancellation; kept as an
    independent cross-check for small k.
    """
    conj = build_conjugacy(spec, u, k)
    return invert_conjugacy(spec, conj, first_return_map(spec, u, k, apply_conjugacy(spec, conj, X)))


def _grid(box: float, step: float) -> np.ndarray:
    axis = -box + step * np.arange(int(round(2 * box / step)) + 1)
    return np.array(list(itertools.product(axis, axis, axis)))


def _limit_jacobian(p: RescaledParams, X) -> np.ndarray:
    return np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [p.M2, p.B, -2.0 * X[2]]])


def residual_c0_c1(
    spec: ModelSpec, u: Unfolding, k: int, *, box: float = VERIFY_BOX, step: float = VERIFY_STEP
) -> tuple[float, float]:
    """Sup distances (values and differentials) to the limit map on a grid.

    The limit map uses the parameters measured from the conjugated map itself.
    Differentials are compared in the induced infinity norm.
    """
    conj = build_conjugacy(spec, u, k)
    qmap = conj.as_map()
    hp = conj.params.as_henon()
    c0 = c1 = 0.0
    for X in _grid(box, step):
        diff = qmap.step(X) - np.array(limit_map_step(hp, X))
        c0 = max(c0, float(np.max(np.abs(diff))))
        dJ = qmap.jacobian(X) - _limit_jacobian(conj.params, X)
        c1 = max(c1, float(np.max(np.abs(dJ).sum(axis=1))))
    return c0, c1


# ---------------------------------------------------------------------------
# inverting the parameter formulas


def _rel_err(got: RescaledParams, want: RescaledParams) -> float:
    return max(abs(g - w) / max(abs(w), 1.0) for g, w in zip(got, want))


def _sign_constraints(spec: ModelSpec, k: int, target: RescaledParams) -> list[str]:
    """Leading-order sign obstructions to realizing ``target`` at this k."""
    c = spec.coeffs
    gs = spec.base.gamma_sign
    problems = []
    jac_sign = math.copysign(1.0, c.J1) * (-gs) ** k
    if target.B == 0 or math.copysign(1.0, target.B) != jac_sign:
        problems.append(
            f"sign of J1*(lambda1*lambda2*gamma)^k is {jac_sign:+.0f} but target B = {target.B:g}"
        )
    mu2 = 1.0 - abs(target.B / c.J1) ** (1.0 / k) if target.B else 0.0
    growth = (spec.base.lam * gs * (1.0 - mu2) / spec.base.lam**2) ** k
    nu = target.M2 / (c.b1 * c.c1 * growth)
    rhs = (-1) ** k * (nu - 1.0) * (c.b1 * c.c1) / (c.b2 * c.c2)
    if not rhs > 0:
        problems.append("the multiplier-ratio equation (lambda2/lambda1)^k = ... has no real solution")
    return problems


def admissible_k(spec: ModelSpec, target: RescaledParams) -> list[int]:
    lo, hi = max(K_RANGE[0], spec.k_min), K_RANGE[1]
    return [k for k in range(lo, hi + 1) if not _sign_constraints(spec, k, target)]


def _leading_inverse(spec: ModelSpec, k: int, t: RescaledParams, exact_mu1: bool = False) -> Unfolding:
    c = spec.coeffs
    base = spec.base
    if t.B == 0:
        raise OutOfRange("target B must be nonzero")
    mu2 = 1.0 - abs(t.B / c.J1) ** (1.0 / k)
    gamma = base.gamma_sign * (1.0 - mu2) / base.lam**2
    s = 1.0
    for _ in range(200):
        growth = (base.lam * s * gamma) ** k
        nu = t.M2 / (c.b1 * c.c1 * growth)
        rhs = (-1) ** k * (nu - 1.0) * (c.b1 * c.c1) / (c.b2 * c.c2)  # = s^(-2k)
        if not rhs > 0:
            raise IncompatibleParity(k, "ratio equation has no real solution", [])
        s_new = rhs ** (-1.0 / (2 * k))
        done = abs(s_new - s) <= 4.0 * np.finfo(float).eps * s
        s = s_new
        if done:
            break
    else:
        raise NoConvergence("multiplier-ratio iteration did not settle")
    mu3 = s * s - 1.0
    u0 = Unfolding(0.0, mu2, mu3)
    conj = _conjugacy_mp(spec, u0, k)
    with mpmath.workdps(WORK_DPS):
        l1k, l2k, gk = _mpow(conj["lambda1"], k), _mpow(conj["lambda2"], k), _mpow(conj["gamma"], k)
        mu1 = -_mp(t.M1) / (c.d * gk * gk) - l1k * c.c1 * c.x1p - l2k * c.c2 * c.x2p - conj["r_k"]
    # mu1 keeps its working precision when returned as an mpf
    return Unfolding(mu1 if exact_mu1 else float(mu1), mu2, mu3)


def solve_unfolding(
    spec: ModelSpec, k: int, target: RescaledParams, *, exact_mu1: bool = False
) -> Unfolding:
    """Unfolding ``(mu1, mu2, mu3)`` at which the rescaled ``T_k`` has limit parameters ``target``.

    Leading-order inversion followed by a damped fixed-point correction of the
    effective target against the exactly measured parameters.

    The width of the region in ``mu1`` shrinks like ``gamma**(-2k)``; beyond
    k of about 15 a double cannot resolve it and PrecisionLoss is raised unless
    ``exact_mu1`` is set, in which case ``mu1`` is returned as an ``mpmath.mpf``.
    """
    _check_k(spec, k)
    problems = _sign_constraints(spec, k, target)
    if problems:
        near = sorted(admissible_k(spec, target), key=lambda j: (abs(j - k), j))[:2]
        raise IncompatibleParity(k, "; ".join(problems), sorted(near))
    eff = target
    u = _leading_inverse(spec, k, eff, exact_mu1)
    tol = 10.0 * multipliers_from_unfolding(spec.base, u).lambda1**k
    got = theorem_parameters(spec, u, k)
    for _ in range(MAX_REFINE):
        if _rel_err(got, target) <= 1e-13:
            break
        eff = RescaledParams(
            *(e + DAMPING * (w - g) for e, w, g in zip(eff, target, got))
        )
        u = _leading_inverse(spec, k, eff, exact_mu1)
        got = theorem_parameters(spec, u, k)

    err = _rel_err(got, target)
    if err > tol:
        # mu1 is quantized at one ulp; its effect on M1 is amplified by d*gamma^(2k)
        gamma = multipliers_from_unfolding(spec.base, u).gamma
        m1_floor = math.ulp(float(u.mu1)) * abs(spec.coeffs.d) * abs(gamma) ** (2 * k)
        if m1_floor > tol and not exact_mu1:
            raise PrecisionLoss(
                f"k = {k}: one ulp of mu1 moves M1 by {m1_floor:.3g} > tolerance {tol:.3g};"
                " pass exact_mu1=True"
            )
        raise NoConvergence(f"round-trip error {err:.3g} exceeds {tol:.3g}")
    return u
