"""Latent-frame recovery from reference frames and integral maps.

A reference frame (blurry or sharp) relates to the latent frame at ``m``
through the double integral: ``F = L(m) * E(m, window)``. Recovery is a
division, re-blurring the matching multiplication; two recoveries from
neighbouring reference frames are merged with a parameter-free softmax
weighting.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError, OutOfRangeError
from .events import EventStream, ExposureWindow
from .integral import DoubleIntegralPlan, IntegralMap, as_threshold

EPS = 1e-4


@dataclass(frozen=True, eq=False)
class Frame:
    """Linear-intensity image in ``[EPS, 1]`` with its exposure window."""

    intensity: np.ndarray
    exposure: ExposureWindow

    def __post_init__(self):
        a = np.array(self.intensity, dtype=np.float64)
        if a.ndim != 2:
            raise InvalidInputError("frame must be 2-D")
        if not np.all((a >= EPS) & (a <= 1.0)):
            raise InvalidInputError(f"frame intensities must lie in [{EPS}, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "intensity", a)

    @classmethod
    def clamped(cls, values, exposure: ExposureWindow) -> "Frame":
        return cls(np.clip(np.asarray(values, dtype=np.float64), EPS, 1.0), exposure)

    @property
    def shape(self) -> tuple[int, int]:
        return self.intensity.shape

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]


@dataclass(frozen=True, eq=False)
class FusionWeights:
    w_i: np.ndarray
    w_j: np.ndarray


def _match(a, b) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape {a.shape} does not match {b.shape}")


def reconstruct_latent(F: Frame, E: IntegralMap) -> Frame:
    """Latent frame at ``E.m``: ``clamp(F / E)``."""
    _match(F, E)
    return Frame.clamped(F.intensity / E.values, ExposureWindow(E.m, 0.0))


def reblur(L: Frame, E: IntegralMap) -> Frame:
    """Reference frame over ``E.window`` predicted from the latent at ``E.m``."""
    _match(L, E)
    return Frame.clamped(L.intensity * E.values, E.window)


def fusion_weights(E_i: IntegralMap, E_j: IntegralMap) -> FusionWeights:
    """Softmax weights that favour the map closer to 1 (smaller ``|log E|``)."""
    _match(E_i, E_j)
    a_i = np.abs(np.log(E_i.values))
    a_j = np.abs(np.log(E_j.values))
    # w_i = exp(a_j) / (exp(a_j) + exp(a_i)), written to avoid overflow
    w_i = 1.0 / (1.0 + np.exp(a_i - a_j))
    return FusionWeights(w_i, 1.0 - w_i)


def apf_fuse(L_i: Frame, L_j: Frame, E_i: IntegralMap, E_j: IntegralMap, m: float,
             win_i: ExposureWindow, win_j: ExposureWindow) -> Frame:
    """Merge the two latent estimates at ``m``.

    Inside either exposure window the estimate from that window's frame is
    returned untouched. Between the windows the estimates are blended
    pixel-wise with :func:`fusion_weights`.
    """
    if not (win_i.t_s <= m <= win_j.t_e):
        raise OutOfRangeError(f"query {m} outside [{win_i.t_s}, {win_j.t_e}]")
    if win_i.contains(m):
        return L_i
    if win_j.contains(m):
        return L_j
    _match(L_i, L_j)
    w = fusion_weights(E_i, E_j)
    a, b = L_i.intensity, L_j.intensity
    out = w.w_i * a + w.w_j * b
    # keep rounding from pushing the blend outside the pair
    out = np.clip(out, np.minimum(a, b), np.maximum(a, b))
    return Frame(out, ExposureWindow(m, 0.0))


def check_windows(win_i: ExposureWindow, win_j: ExposureWindow) -> None:
    if win_i.t_s > win_j.t_s or win_i.t_e > win_j.t_e:
        raise InvalidInputError(f"exposure windows out of order: {win_i} then {win_j}")


def enhance(F_i: Frame, F_j: Frame, stream: EventStream, queries: Sequence[float], c) -> list[Frame]:
    """Latent frames at every query time between two reference frames.

    Works for blurry (``T > 0``) and sharp (``T == 0``) references alike,
    which covers deblurring, interpolation and blurry-video enhancement.
    A query inside one exposure only touches that frame and its events.
    """
    c = as_threshold(c)
    win_i, win_j = F_i.exposure, F_j.exposure
    check_windows(win_i, win_j)
    _match(F_i, F_j)
    if stream.shape != F_i.shape:
        raise DimensionMismatchError(f"events are {stream.shape}, frames are {F_i.shape}")
    lo, hi = win_i.t_s, win_j.t_e
    for m in queries:
        if not (lo <= m <= hi):
            raise OutOfRangeError(f"query {m} outside [{lo}, {hi}]")
    stream.require_cover(lo, hi)
    out = []
    for m in queries:
        if win_i.contains(m):
            out.append(reconstruct_latent(F_i, DoubleIntegralPlan(stream, m, win_i).evaluate(c)))
            continue
        if win_j.contains(m):
            out.append(reconstruct_latent(F_j, DoubleIntegralPlan(stream, m, win_j).evaluate(c)))
            continue
        E_i = DoubleIntegralPlan(stream, m, win_i).evaluate(c)
        E_j = DoubleIntegralPlan(stream, m, win_j).evaluate(c)
        out.append(apf_fuse(reconstruct_latent(F_i, E_i), reconstruct_latent(F_j, E_j),
                            E_i, E_j, m, win_i, win_j))
    return out
