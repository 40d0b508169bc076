"""Finite-time splitting indicators and parameter sweeps.

The splitting report looks for the pseudohyperbolic structure expected of a
discrete Lorenz attractor: one strongly contracting direction and a
complementary two-dimensional direction which expands volume.  Everything is
measured over disjoint finite windows, so the numbers are indicators rather
than proofs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import OrbitDiverged
from .henon3d import ClassifyOptions, HenonParams, OrbitKind, classify_map
from .quadmap import DIVERGE_AT, QuadraticMap

REFACTOR_EVERY = 20


class DiffMap(Protocol):
    def step(self, v) -> np.ndarray: ...

    def jacobian(self, v) -> np.ndarray: ...


@dataclass(frozen=True)
class LinearMap:
    """``v -> D v``; the constant-cocycle test case."""

    D: np.ndarray

    def step(self, v):
        return self.D @ np.asarray(v, dtype=float)

    def jacobian(self, v):
        return np.asarray(self.D, dtype=float)


@dataclass(frozen=True)
class WindowCocycle:
    """``P = Q R exp(log_scale)`` for the product of differentials over a window,
    applied to the frame carried in from the previous window.

    ``R2`` (scaled by ``exp(log_scale2)``) accumulates the second compound
    matrix of ``R``, whose largest singular value is ``s1 * s2``.
    """

    Q: np.ndarray
    R: np.ndarray
    log_scale: float
    log_diag: np.ndarray
    R2: np.ndarray
    log_scale2: float

    def log_singular_values(self) -> np.ndarray:
        # only leading singular values are read off the scaled products: the
        # small ones can underflow when the window's dynamic range is huge
        with np.errstate(divide="ignore"):
            l1 = math.log(np.linalg.norm(self.R, 2)) + self.log_scale
            l12 = math.log(np.linalg.norm(self.R2, 2)) + self.log_scale2
        return np.array([l1, l12 - l1, self.log_diag.sum() - l12])

    def matrix(self) -> np.ndarray:
        return self.Q @ self.R * math.exp(self.log_scale)


_PAIRS = ((0, 1), (0, 2), (1, 2))


def _compound2(M):
    return np.array(
        [
            [M[i, k] * M[j, l] - M[i, l] * M[j, k] for (k, l) in _PAIRS]
            for (i, j) in _PAIRS
        ]
    )


def _qr_positive(M):
    Q, R = np.linalg.qr(M)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def window_cocycle(jacobians: Sequence[np.ndarray], frame=None, refactor: int = REFACTOR_EVERY):
    """Accumulate ``J_n ... J_1 @ frame`` with QR re-factorization every ``refactor`` steps."""
    M = np.eye(3) if frame is None else np.array(frame, dtype=float)
    R_acc = np.eye(3)
    R2_acc = np.eye(3)
    log_scale = log_scale2 = 0.0
    log_diag = np.zeros(3)
    n = len(jacobians)
    for t, J in enumerate(jacobians):
        M = J @ M
        if (t + 1) % refactor == 0 or t == n - 1:
            M, Rn = _qr_positive(M)
            with np.errstate(divide="ignore"):
                log_diag += np.log(np.diag(Rn))
            R_acc = Rn @ R_acc
            R2_acc = _compound2(Rn) @ R2_acc
            scale = np.abs(R_acc).max()
            R_acc /= scale
            log_scale += math.log(scale)
            scale2 = np.abs(R2_acc).max()
            if scale2 > 0:
                R2_acc /= scale2
                log_scale2 += math.log(scale2)
    return WindowCocycle(M, R_acc, log_scale, log_diag, R2_acc, log_scale2)


@dataclass(frozen=True)
class PseudoHypReport:
    window_length: int
    n_windows: int
    sigma_est: float
    nu_est: float
    min_split_gap: float
    fraction_pass: float
    # per-window log rates (per iteration) from the singular values s1 >= s2 >= s3
    log_rates: np.ndarray
    # per-window log rates along the carried Gram-Schmidt frame: the 2-volume of
    # its leading plane and the stretch of the remaining direction
    eu_volume_log_rates: np.ndarray
    ss_log_rates: np.ndarray

    @property
    def mean_volume_log_rate(self) -> float:
        return float(np.mean(self.log_rates[:, 0] + self.log_rates[:, 1]))

    @property
    def mean_eu_volume_log_rate(self) -> float:
        return float(np.mean(self.eu_volume_log_rates))

    @property
    def eu_volume_stderr(self) -> float:
        return float(np.std(self.eu_volume_log_rates, ddof=1) / math.sqrt(self.n_windows))


def finite_time_splitting(
    dmap: DiffMap,
    s0,
    transient: int = 10_000,
    n: int = 100_000,
    window: int = 100,
    *,
    refactor: int = REFACTOR_EVERY,
    diverge_at: float = DIVERGE_AT,
) -> PseudoHypReport:
    if window < 10:
        raise ValueError("window must be at least 10")
    if n < 20 * window:
        raise ValueError("need n >= 20 * window")

    v = np.array(s0, dtype=float)
    frame = np.eye(3)

    def advance(v, t):
        v = dmap.step(v)
        if not np.all(np.abs(v) <= diverge_at):
            raise OrbitDiverged(t + 1, diverge_at)
        return v

    # the transient also aligns the frame with the dominant directions
    for t in range(transient):
        frame, _ = _qr_positive(dmap.jacobian(v) @ frame)
        v = advance(v, t)

    n_windows = n // window
    log_rates = np.empty((n_windows, 3))
    eu = np.empty(n_windows)
    ss = np.empty(n_windows)
    t = transient
    for w in range(n_windows):
        jacs = []
        for _ in range(window):
            jacs.append(dmap.jacobian(v))
            v = advance(v, t)
            t += 1
        cyc = window_cocycle(jacs, frame, refactor)
        frame = cyc.Q
        log_rates[w] = cyc.log_singular_values() / window
        eu[w] = (cyc.log_diag[0] + cyc.log_diag[1]) / window
        ss[w] = cyc.log_diag[2] / window

    r3 = np.exp(log_rates[:, 2])
    vol = np.exp(log_rates[:, 0] + log_rates[:, 1])
    return PseudoHypReport(
        window_length=window,
        n_windows=n_windows,
        sigma_est=float(r3.max()),
        nu_est=float(vol.min()),
        min_split_gap=float(np.min(log_rates[:, 1] - log_rates[:, 2])),
        fraction_pass=float(np.mean((r3 < 1.0) & (vol > 1.0))),
        log_rates=log_rates,
        eu_volume_log_rates=eu,
        ss_log_rates=ss,
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("an axis needs at least 2 steps")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class SweepCell:
    p1: float
    p2: float
    lmax: float
    kind: OrbitKind
    escape_step: int | None


@dataclass(frozen=True)
class SweepResult:
    axis1: Axis
    axis2: Axis
    fixed: dict
    cells: list[SweepCell]  # row-major over (axis1, axis2)

    def table(self, attr: str = "lmax") -> np.ndarray:
        vals = [getattr(c, attr) for c in self.cells]
        return np.array(vals, dtype=object if attr == "kind" else float).reshape(
            self.axis1.steps, self.axis2.steps
        )


def henon_family(params: dict) -> QuadraticMap:
    return HenonParams(params["m1"], params["m2"], params["b"]).as_map()


def _threads() -> int:
    raw = os.environ.get("THREADS")
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError("THREADS must be a positive integer")
    return n


def sweep(
    axis1: Axis,
    axis2: Axis,
    fixed: dict,
    s0,
    opts: ClassifyOptions | None = None,
    family: Callable[[dict], QuadraticMap] = henon_family,
    threads: int | None = None,
) -> SweepResult:
    """Classify every cell of a two-parameter grid; cells are independent."""
    opts = opts or ClassifyOptions()
    jobs = [
        {**fixed, axis1.name: float(p1), axis2.name: float(p2)}
        for p1 in axis1.values
        for p2 in axis2.values
    ]

    def run(params):
        res = classify_map(family(params), s0, opts)
        lmax = res.lyapunov.leading if res.lyapunov else math.nan
        return SweepCell(params[axis1.name], params[axis2.name], lmax, res.kind, res.step)

    with ThreadPoolExecutor(max_workers=threads or _threads()) as pool:
        cells = list(pool.map(run, jobs))
    return SweepResult(axis1, axis2, dict(fixed), cells)
