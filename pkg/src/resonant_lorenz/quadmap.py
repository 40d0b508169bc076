"""Quadratic 3D maps ``v' = A v + c - e3 * v[2]**2``.

The Henon map and every rescaled first-return map of the exact model share this
form.  The differential is ``A`` with its ``(2, 2)`` entry shifted by
``-2 * v[2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import OrbitDiverged

DIVERGE_AT = 1e3
N_BLOCKS = 20


@dataclass(frozen=True)
class LyapunovResult:
    exponents: tuple[float, float, float]
    n_iterations: int
    n_transient: int
    stderr: tuple[float, float, float]
    stderr_max: float
    converged: bool

    @property
    def leading(self) -> float:
        return self.exponents[0]


@dataclass(frozen=True)
class Orbit:
    """Recorded states, or the 1-based step at which the orbit escaped."""

    states: np.ndarray
    diverged_step: int | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_step is not None


@dataclass(frozen=True)
class QuadraticMap:
    A: np.ndarray
    c: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "A", np.ascontiguousarray(self.A, dtype=float))
        object.__setattr__(self, "c", np.ascontiguousarray(self.c, dtype=float))

    def step(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.A @ v + self.c
        out[2] -= v[2] * v[2]
        return out

    def jacobian(self, v) -> np.ndarray:
        J = self.A.copy()
        J[2, 2] -= 2.0 * v[2]
        return J

    def iterate(self, v0, transient: int = 0, n: int = 1, diverge_at: float = DIVERGE_AT) -> Orbit:
        if diverge_at <= 0:
            raise ValueError("diverge_at must be positive")
        states, step = _kernels.iterate(
            self.A, self.c, np.asarray(v0, dtype=float), int(transient), int(n), float(diverge_at)
        )
        return Orbit(states, step or None)

    def lyapunov(
        self,
        v0,
        transient: int = 10_000,
        n: int = 1_000_000,
        *,
        n_blocks: int = N_BLOCKS,
        diverge_at: float = DIVERGE_AT,
        stderr_tol: float = 1e-2,
    ) -> LyapunovResult:
        if n < n_blocks:
            raise ValueError(f"need at least {n_blocks} iterations, got {n}")
        sums, step = _kernels.lyapunov(
            self.A,
            self.c,
            np.asarray(v0, dtype=float),
            int(transient),
            int(n),
            int(n_blocks),
            float(diverge_at),
        )
        if step:
            raise OrbitDiverged(step, diverge_at)
        return _summarize(sums, n, transient, n_blocks, stderr_tol)


def _summarize(sums: np.ndarray, n: int, transient: int, n_blocks: int, tol: float) -> LyapunovResult:
    lens = np.full(n_blocks, n // n_blocks, dtype=float)
    lens[-1] += n % n_blocks
    with np.errstate(invalid="ignore"):
        exps = sums.sum(axis=0) / n
        rates = sums / lens[:, None]
        se = np.where(
            np.isfinite(exps), rates.std(axis=0, ddof=1) / math.sqrt(n_blocks), 0.0
        )
    order = np.argsort(-exps, kind="stable")
    exps, se = exps[order], se[order]
    se_max = float(np.max(se))
    return LyapunovResult(
        exponents=tuple(float(e) for e in exps),
        n_iterations=n,
        n_transient=transient,
        stderr=tuple(float(s) for s in se),
        stderr_max=se_max,
        converged=bool(se_max <= tol),
    )
