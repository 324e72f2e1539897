"""Forward model: events from latent video, blur by frame averaging, and
latent videos that agree exactly with a given event stream."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyWindowError, InvalidInputError
from .events import EventStream, ExposureWindow, signed_count_map
from .integral import as_threshold
from .reconstruction import EPS, Frame

# absorbs rounding in log(exp(c*k)) so an exact c step still counts as a crossing
_CROSSING_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LatentVideo:
    """Sharp frames at strictly increasing timestamps.

    ``clamped`` marks pixels where some frame had to be clamped into
    ``[EPS, 1]``; those pixels are not model-exact.
    """

    frames: tuple
    clamped: np.ndarray = field(default=None)

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InvalidInputError("latent video needs at least one frame")
        shape = frames[0].shape
        for f in frames:
            if f.shape != shape:
                raise InvalidInputError("latent frames differ in size")
            if not f.exposure.is_sharp:
                raise InvalidInputError("latent frames must be instantaneous")
        ts = np.array([f.exposure.t_s for f in frames])
        if np.any(np.diff(ts) <= 0):
            raise InvalidInputError("latent timestamps must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        if self.clamped is None:
            object.__setattr__(self, "clamped", np.zeros(shape, dtype=bool))

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([f.exposure.t_s for f in self.frames])

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def from_arrays(cls, images, timestamps) -> "LatentVideo":
        return cls(tuple(Frame.clamped(im, ExposureWindow(float(t), 0.0))
                         for im, t in zip(images, timestamps)))


def generate_events(video: LatentVideo, c) -> EventStream:
    """Noise-free event camera on a latent video.

    Log intensity is interpolated linearly between samples. Every time it
    moves a full threshold away from the pixel's reference level an event
    is emitted at the exact crossing time and the reference moves by one
    step. Several crossings between two samples all fire.
    """
    c = as_threshold(c).c
    if len(video) < 2:
        raise InvalidInputError("event generation needs at least 2 frames")
    H, W = video.shape
    ts = video.timestamps
    logs = [np.log(f.intensity).reshape(-1) for f in video.frames]
    ref0 = logs[0]
    level = np.zeros(H * W, dtype=np.int64)
    out_t, out_pix, out_p = [], [], []
    for k in range(len(video) - 1):
        v0, v1 = logs[k], logs[k + 1]
        t0, dt = ts[k], ts[k + 1] - ts[k]
        ref = ref0 + c * level
        d = (v1 - ref) / c
        n_up = np.where(d > 0, np.floor(d + _CROSSING_TOL), 0).astype(np.int64)
        n_dn = np.where(d < 0, np.floor(-d + _CROSSING_TOL), 0).astype(np.int64)
        for n, sign in ((n_up, 1), (n_dn, -1)):
            pix = np.flatnonzero(n)
            if pix.size == 0:
                continue
            counts = n[pix]
            rep = np.repeat(pix, counts)
            # 1..n within each pixel
            step = np.arange(rep.size) - np.repeat(np.cumsum(counts) - counts, counts) + 1
            lvl = ref[rep] + sign * c * step
            slope = v1[rep] - v0[rep]
            frac = np.clip((lvl - v0[rep]) / slope, 0.0, 1.0)
            out_t.append(t0 + frac * dt)
            out_pix.append(rep)
            out_p.append(np.full(rep.size, sign, dtype=np.int8))
            level[pix] += sign * counts
    if out_t:
        t = np.concatenate(out_t)
        pix = np.concatenate(out_pix)
        p = np.concatenate(out_p)
    else:
        t, pix, p = np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8)
    return EventStream.from_arrays(W, H, t, pix % W, pix // W, p, span=(float(ts[0]), float(ts[-1])))


def synthesize_blur(video: LatentVideo, window: ExposureWindow) -> Frame:
    """Arithmetic mean of the latent frames whose timestamps fall in ``window``."""
    ts = video.timestamps
    inside = np.flatnonzero((ts >= window.t_s) & (ts <= window.t_e))
    if inside.size == 0:
        raise EmptyWindowError(f"no latent frame inside [{window.t_s}, {window.t_e}]")
    acc = np.zeros(video.shape)
    for i in inside:
        acc += video.frames[i].intensity
    return Frame.clamped(acc / inside.size, window)


def model_exact_video(base: Frame, stream: EventStream, samples: Sequence[float], c) -> LatentVideo:
    """Latent frames that agree exactly with ``stream`` and threshold ``c``.

    ``L(t) = base * exp(c * signed_count(t_ref, t))`` with ``t_ref`` the
    base frame's instant.
    """
    c = as_threshold(c).c
    if not base.exposure.is_sharp:
        raise InvalidInputError("base frame must be instantaneous")
    if base.shape != stream.shape:
        raise InvalidInputError(f"base is {base.shape}, events are {stream.shape}")
    t_ref = base.exposure.t_s
    samples = [float(s) for s in samples]
    if samples:
        stream.require_cover(min(min(samples), t_ref), max(max(samples), t_ref))
    clamped = np.zeros(base.shape, dtype=bool)
    frames = []
    for s in samples:
        raw = base.intensity * np.exp(c * signed_count_map(stream, t_ref, s))
        clamped |= (raw < EPS) | (raw > 1.0)
        frames.append(Frame.clamped(raw, ExposureWindow(s, 0.0)))
    return LatentVideo(tuple(frames), clamped)


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """Two blurry exposures of a model-exact scene plus its ground truth."""

    c: float
    base: Frame
    stream: EventStream
    video: LatentVideo
    blurry: tuple
    step: float

    @property
    def windows(self) -> tuple:
        return tuple(b.exposure for b in self.blurry)

    @property
    def hull(self) -> tuple[float, float]:
        return (self.blurry[0].exposure.t_s, self.blurry[1].exposure.t_e)

    def latent_at(self, times) -> LatentVideo:
        return model_exact_video(self.base, self.stream, times, self.c)


def synthetic_scene(c, width: int = 64, height: int = 64, seed: int = 0, exposure: float = 1.0,
                    gap: float = 0.5, cells_per_unit: int = 100, amplitude: float = 0.8,
                    blobs: int = 3) -> SyntheticScene:
    """Moving bright and dark blobs over a smooth texture, quantised to events.

    The log-intensity change of each blob is rounded to whole threshold
    steps on a regular time grid, so every event sits on a grid point.
    Latent frames are sampled at cell midpoints, which makes the frame
    average equal the continuous exposure average and the blurry frames
    exact for the event model. Exposure and gap lengths must be whole
    numbers of cells.
    """
    c = as_threshold(c).c
    rng = np.random.default_rng(seed)
    n_exp = round(exposure * cells_per_unit)
    n_gap = round(gap * cells_per_unit)
    if abs(n_exp - exposure * cells_per_unit) > 1e-9 or abs(n_gap - gap * cells_per_unit) > 1e-9 or n_exp < 1:
        raise InvalidInputError("exposure and gap must be whole multiples of the grid step")
    n_cells = 2 * n_exp + n_gap
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)

    fx, fy = rng.uniform(0.5, 2.0, 2) * 2 * np.pi / np.array([width, height])
    phase = rng.uniform(0, 2 * np.pi, 2)
    texture = 0.5 + 0.25 * np.sin(fx * xx + phase[0]) + 0.25 * np.cos(fy * yy + phase[1])
    top = 0.9 * np.exp(-(amplitude + c / 2))
    texture = 0.1 + (top - 0.1) * texture

    centers = rng.uniform([0, 0], [width, height], size=(blobs, 2))
    duration = n_cells / cells_per_unit
    velocity = rng.uniform(-0.6, 0.6, size=(blobs, 2)) * np.array([width, height]) / duration
    radius = rng.uniform(0.1, 0.25, blobs) * min(width, height)
    sign = np.where(np.arange(blobs) % 2 == 0, 1.0, -1.0)

    def quantised(t):
        f = np.zeros((height, width))
        for b in range(blobs):
            cx, cy = centers[b] + velocity[b] * t
            f += sign[b] * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * radius[b] ** 2))
        f = np.clip(f, -1.0, 1.0) * amplitude
        return np.rint(f / c).astype(np.int64)

    q_prev = quantised(0.0)
    base = Frame(texture * np.exp(c * q_prev), ExposureWindow(0.0, 0.0))
    ts, xs, ys, ps = [], [], [], []
    for j in range(1, n_cells + 1):
        t = j / cells_per_unit
        q = quantised(t)
        dq = (q - q_prev).reshape(-1)
        q_prev = q
        pix = np.flatnonzero(dq)
        if pix.size == 0:
            continue
        n = np.abs(dq[pix])
        rep = np.repeat(pix, n)
        ts.append(np.full(rep.size, t))
        xs.append(rep % width)
        ys.append(rep // width)
        ps.append(np.repeat(np.sign(dq[pix]), n))
    win_i = ExposureWindow(0.0, n_exp / cells_per_unit)
    win_j = ExposureWindow((n_exp + n_gap) / cells_per_unit, n_exp / cells_per_unit)
    cat = (lambda a: np.concatenate(a)) if ts else (lambda a: np.empty(0))
    stream = EventStream.from_arrays(width, height, cat(ts), cat(xs), cat(ys), cat(ps),
                                     span=(0.0, max(duration, win_j.t_e)))
    mids = (np.arange(n_cells) + 0.5) / cells_per_unit
    video = model_exact_video(base, stream, mids, c)
    blurry = (synthesize_blur(video, win_i), synthesize_blur(video, win_j))
    return SyntheticScene(c, base, stream, video, blurry, 1.0 / cells_per_unit)
