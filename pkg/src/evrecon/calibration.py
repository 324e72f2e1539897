"""Self-supervised consistency losses and threshold estimation.

The three losses compare what two neighbouring reference frames say about
the same latent instant. They vanish when the event model and threshold
are right, so the threshold can be found by minimising their weighted sum
over the scalar ``c``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CalibrationImpossibleError, DimensionMismatchError, InvalidInputError, OutOfRangeError
from .events import EventStream, ExposureWindow, event_count_map
from .integral import DoubleIntegralPlan, IntegralMap, Threshold, as_threshold
from .reconstruction import Frame, check_windows, reblur, reconstruct_latent

GRID_POINTS = 32
C_TOLERANCE = 1e-4
DEFAULT_QUERY_COUNT = 8


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidInputError(f"loss weight {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossReport:
    l_be: float
    l_sb: float
    l_bb: float
    total: float
    c: float

    def to_json(self) -> str:
        return json.dumps({"c": self.c, "l_be": self.l_be, "l_sb": self.l_sb,
                           "l_bb": self.l_bb, "total": self.total})


def _mean_abs(a, b) -> float:
    return float(np.mean(np.abs(a - b)))


def static_mask(stream: EventStream, m: float, window: ExposureWindow) -> np.ndarray:
    """1 where no event falls between ``m`` and the far side of ``window``.

    For ``m`` inside the window this is the set of pixels silent during the
    exposure. For ``m`` outside it also requires silence between ``m`` and
    the window, since only then does the latent frame equal the reference.
    """
    lo, hi = min(m, window.t_s), max(m, window.t_e)
    return (event_count_map(stream, lo, hi) == 0).astype(np.float64)


def _be(L_i: Frame, L_j: Frame) -> float:
    return _mean_abs(L_i.intensity, L_j.intensity)


def _sb(L_i, L_j, B_i, B_j, M_i, M_j) -> float:
    n = B_i.intensity.size
    return float((np.abs(L_i.intensity - B_i.intensity) * M_i).sum() / n
                 + (np.abs(L_j.intensity - B_j.intensity) * M_j).sum() / n)


def _bb(L_i, L_j, B_i, B_j, E_i: IntegralMap, E_j: IntegralMap) -> float:
    # cross pairing: each blurry frame is predicted from the other frame's latent
    Bb_i = reblur(L_j, E_i)
    Bb_j = reblur(L_i, E_j)
    return _mean_abs(Bb_i.intensity, B_i.intensity) + _mean_abs(Bb_j.intensity, B_j.intensity)


def _check_pair(B_i: Frame, B_j: Frame, stream: EventStream, queries: Sequence[float]) -> None:
    check_windows(B_i.exposure, B_j.exposure)
    if B_i.shape != B_j.shape or stream.shape != B_i.shape:
        raise DimensionMismatchError("frames and events differ in size")
    lo, hi = B_i.exposure.t_s, B_j.exposure.t_e
    for m in queries:
        if not (lo <= m <= hi):
            raise OutOfRangeError(f"query {m} outside [{lo}, {hi}]")
    stream.require_cover(lo, hi)


def _latents(B_i, B_j, stream, m, c):
    E_i = DoubleIntegralPlan(stream, m, B_i.exposure).evaluate(c)
    E_j = DoubleIntegralPlan(stream, m, B_j.exposure).evaluate(c)
    return E_i, E_j, reconstruct_latent(B_i, E_i), reconstruct_latent(B_j, E_j)


def loss_be(B_i: Frame, B_j: Frame, stream: EventStream, m: float, c) -> float:
    """Mean absolute difference between the two latent estimates at ``m``."""
    _check_pair(B_i, B_j, stream, [m])
    _, _, L_i, L_j = _latents(B_i, B_j, stream, m, as_threshold(c))
    return _be(L_i, L_j)


def loss_sb(L_i: Frame, L_j: Frame, B_i: Frame, B_j: Frame, stream: EventStream) -> float:
    """Brightness consistency between latents and references on static pixels."""
    for a in (L_j, B_i, B_j):
        if a.shape != L_i.shape:
            raise DimensionMismatchError(f"shape {a.shape} does not match {L_i.shape}")
    if stream.shape != L_i.shape:
        raise DimensionMismatchError("frames and events differ in size")
    m = L_i.exposure.t_s
    if L_j.exposure.t_s != m:
        raise InvalidInputError("latent frames are not at the same instant")
    M_i = static_mask(stream, m, B_i.exposure)
    M_j = static_mask(stream, m, B_j.exposure)
    return _sb(L_i, L_j, B_i, B_j, M_i, M_j)


def loss_bb(B_i: Frame, B_j: Frame, stream: EventStream, m: float, c) -> float:
    """Cross re-blur error: each reference rebuilt from the other's latent."""
    _check_pair(B_i, B_j, stream, [m])
    E_i, E_j, L_i, L_j = _latents(B_i, B_j, stream, m, as_threshold(c))
    return _bb(L_i, L_j, B_i, B_j, E_i, E_j)


class LossObjective:
    """Total loss for a fixed frame pair and query set, as a function of ``c``.

    Event bookkeeping and static masks are computed once; each call only
    re-evaluates the exponentials.
    """

    def __init__(self, B_i: Frame, B_j: Frame, stream: EventStream, queries: Sequence[float],
                 weights: LossWeights = LossWeights()):
        queries = [float(m) for m in queries]
        if not queries:
            raise InvalidInputError("need at least one query")
        _check_pair(B_i, B_j, stream, queries)
        self.B_i, self.B_j, self.weights = B_i, B_j, weights
        self.terms = []
        for m in queries:
            self.terms.append((DoubleIntegralPlan(stream, m, B_i.exposure),
                               DoubleIntegralPlan(stream, m, B_j.exposure),
                               static_mask(stream, m, B_i.exposure),
                               static_mask(stream, m, B_j.exposure)))

    def report(self, c) -> LossReport:
        c = as_threshold(c)
        be = sb = bb = 0.0
        B_i, B_j = self.B_i, self.B_j
        for plan_i, plan_j, M_i, M_j in self.terms:
            E_i, E_j = plan_i.evaluate(c), plan_j.evaluate(c)
            L_i, L_j = reconstruct_latent(B_i, E_i), reconstruct_latent(B_j, E_j)
            be += _be(L_i, L_j)
            sb += _sb(L_i, L_j, B_i, B_j, M_i, M_j)
            bb += _bb(L_i, L_j, B_i, B_j, E_i, E_j)
        n = len(self.terms)
        be, sb, bb = be / n, sb / n, bb / n
        w = self.weights
        return LossReport(be, sb, bb, w.alpha * be + w.beta * sb + w.gamma * bb, c.c)

    def __call__(self, c) -> float:
        return self.report(c).total


def total_loss(B_i: Frame, B_j: Frame, stream: EventStream, queries: Sequence[float], c,
               w: LossWeights = LossWeights()) -> LossReport:
    """Weighted sum of the three losses, each averaged over ``queries``."""
    return LossObjective(B_i, B_j, stream, queries, w).report(c)


def default_queries(win_i: ExposureWindow, win_j: ExposureWindow,
                    count: int = DEFAULT_QUERY_COUNT) -> list[float]:
    """``count`` instants log-spaced in their offset from the first exposure start.

    Offsets halve from the end of the second exposure back towards the
    start of the first, so both exposures and the gap between them get
    sampled.
    """
    lo, hi = win_i.t_s, win_j.t_e
    offsets = (hi - lo) * np.geomspace(2.0 ** (1 - count), 1.0, count)
    return [float(lo + o) for o in offsets]


_INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[a, b]`` until the bracket is below ``tol``."""
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def estimate_threshold(B_i: Frame, B_j: Frame, stream: EventStream, queries: Sequence[float] = None,
                       c_range: tuple[float, float] = (0.05, 0.8),
                       w: LossWeights = LossWeights()) -> Threshold:
    """Threshold that minimises :func:`total_loss` over ``c_range``.

    A 32-point log grid locates the basin, golden-section search refines
    it inside the neighbouring grid cells to an absolute width of 1e-4.
    """
    c_lo, c_hi = float(c_range[0]), float(c_range[1])
    if not (0 < c_lo < c_hi):
        raise InvalidInputError(f"bad threshold range {c_range}")
    if queries is None:
        queries = default_queries(B_i.exposure, B_j.exposure)
    hull = (B_i.exposure.t_s, B_j.exposure.t_e)
    if len(stream) == 0 or not np.any(event_count_map(stream, min(hull[0], min(queries)),
                                                       max(hull[1], max(queries)))):
        raise CalibrationImpossibleError("no events: the loss does not depend on the threshold")
    objective = LossObjective(B_i, B_j, stream, queries, w)
    grid = np.geomspace(c_lo, c_hi, GRID_POINTS)
    values = [objective(c) for c in grid]
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, GRID_POINTS - 1)]
    x, fx = golden_section(objective, float(a), float(b), C_TOLERANCE)
    if values[k] < fx:
        x = float(grid[k])
    return Threshold(x)
