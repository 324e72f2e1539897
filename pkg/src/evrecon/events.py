"""Event records, streams and the stream operators used by the integral engine.

Time intervals are half-open on the left, ``(a, b]``: an event stamped
exactly at ``a`` belongs to the past of ``a``. Polarity +1 means the log
intensity went up by one threshold step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import BoundsError, CoverageError, InvalidInputError, InvalidIntervalError


@dataclass(frozen=True)
class Event:
    t: float
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class ExposureWindow:
    """Exposure interval ``[t_s, t_s + T]``. ``T == 0`` is an instantaneous frame."""

    t_s: float
    T: float = 0.0

    def __post_init__(self):
        try:
            t_s, T = float(self.t_s), float(self.T)
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad exposure window t_s={self.t_s!r}, T={self.T!r}") from exc
        if not (np.isfinite(t_s) and np.isfinite(T)) or T < 0:
            raise InvalidInputError(f"bad exposure window t_s={self.t_s}, T={self.T}")
        object.__setattr__(self, "t_s", t_s)
        object.__setattr__(self, "T", T)

    @property
    def t_e(self) -> float:
        return self.t_s + self.T

    @property
    def is_sharp(self) -> bool:
        return self.T == 0

    def contains(self, m: float) -> bool:
        # closed on both ends
        return self.t_s <= m <= self.t_e


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-sorted events of a ``width`` x ``height`` sensor covering ``span``.

    Events are stored column-wise; use :meth:`from_arrays` or
    :meth:`from_events` to build one from unsorted input.
    """

    width: int
    height: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    span: tuple[float, float]

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        x = np.asarray(self.x, dtype=np.int64).reshape(-1)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        p = np.asarray(self.p, dtype=np.int8).reshape(-1)
        n = t.size
        if not (x.size == y.size == p.size == n):
            raise InvalidInputError("event columns differ in length")
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"bad sensor size {self.width}x{self.height}")
        lo, hi = float(self.span[0]), float(self.span[1])
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise InvalidIntervalError(f"bad span [{lo}, {hi}]")
        if n:
            if not np.all(np.isfinite(t)):
                raise InvalidInputError("non-finite event timestamp")
            if np.any(np.diff(t) < 0):
                raise InvalidInputError("events are not sorted by time")
            if t[0] < lo or t[-1] > hi:
                raise InvalidInputError("event timestamps outside span")
            if x.min() < 0 or y.min() < 0 or x.max() >= self.width or y.max() >= self.height:
                raise InvalidInputError("event coordinates outside sensor")
            if not np.all((p == 1) | (p == -1)):
                raise InvalidInputError("polarity must be +1 or -1")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "span", (lo, hi))

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p, span=None) -> "EventStream":
        """Build a stream from possibly unsorted columns (stable sort by time)."""
        t = np.asarray(t, dtype=np.float64).reshape(-1)
        order = np.argsort(t, kind="stable")
        t = t[order]
        if span is None:
            span = (float(t[0]), float(t[-1])) if t.size else (0.0, 0.0)
        return cls(width, height, t, np.asarray(x)[order], np.asarray(y)[order],
                   np.asarray(p)[order], span)

    @classmethod
    def from_events(cls, width: int, height: int, events: Sequence[Event], span=None) -> "EventStream":
        cols = [[e.t for e in events], [e.x for e in events], [e.y for e in events], [e.p for e in events]]
        return cls.from_arrays(width, height, *cols, span=span)

    @classmethod
    def empty(cls, width: int, height: int, span=(0.0, 0.0)) -> "EventStream":
        return cls(width, height, np.empty(0), np.empty(0), np.empty(0), np.empty(0), span)

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, p)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def pixel_index(self) -> np.ndarray:
        """Flat row-major pixel index of every event."""
        return self.y * self.width + self.x

    def with_span(self, lo: float, hi: float) -> "EventStream":
        """Same events, span widened to include ``[lo, hi]``."""
        return EventStream(self.width, self.height, self.t, self.x, self.y, self.p,
                           (min(self.span[0], lo), max(self.span[1], hi)))

    def covers(self, a: float, b: float) -> bool:
        lo, hi = min(a, b), max(a, b)
        return self.span[0] <= lo and hi <= self.span[1]

    def require_cover(self, a: float, b: float) -> None:
        if not self.covers(a, b):
            raise CoverageError(
                f"stream span [{self.span[0]}, {self.span[1]}] does not cover [{min(a, b)}, {max(a, b)}]")

    def _index_range(self, a: float, b: float) -> tuple[int, int]:
        # indices of events with a < t <= b
        return (int(np.searchsorted(self.t, a, side="right")),
                int(np.searchsorted(self.t, b, side="right")))

    def _take(self, sl, span) -> "EventStream":
        return EventStream(self.width, self.height, self.t[sl], self.x[sl], self.y[sl], self.p[sl], span)


def slice_stream(stream: EventStream, a: float, b: float) -> EventStream:
    """Events with ``a < t <= b``; the result's span is ``[a, b]``."""
    if a > b:
        raise InvalidIntervalError(f"slice start {a} after end {b}")
    i, j = stream._index_range(a, b)
    return stream._take(slice(i, j), (a, b))


def _check_pixel(stream: EventStream, pixel) -> tuple[int, int]:
    x, y = int(pixel[0]), int(pixel[1])
    if not (0 <= x < stream.width and 0 <= y < stream.height):
        raise BoundsError(f"pixel {(x, y)} outside {stream.width}x{stream.height} sensor")
    return x, y


def signed_count(stream: EventStream, pixel, a: float, b: float) -> int:
    """Oriented sum of polarities at ``pixel`` between ``a`` and ``b``.

    For ``a <= b`` this is the sum over ``(a, b]``; for ``a > b`` it is the
    negated sum over ``(b, a]``, so the count behaves like the integral
    of the event train from ``a`` to ``b``.
    """
    x, y = _check_pixel(stream, pixel)
    stream.require_cover(a, b)
    lo, hi, sign = (a, b, 1) if a <= b else (b, a, -1)
    i, j = stream._index_range(lo, hi)
    hit = (stream.x[i:j] == x) & (stream.y[i:j] == y)
    return sign * int(stream.p[i:j][hit].sum(dtype=np.int64))


def signed_count_map(stream: EventStream, a: float, b: float) -> np.ndarray:
    """:func:`signed_count` for every pixel at once, as an ``H x W`` int array."""
    stream.require_cover(a, b)
    lo, hi, sign = (a, b, 1) if a <= b else (b, a, -1)
    i, j = stream._index_range(lo, hi)
    counts = np.bincount(stream.pixel_index[i:j], weights=stream.p[i:j],
                         minlength=stream.width * stream.height)
    return sign * counts.astype(np.int64).reshape(stream.shape)


def event_count_map(stream: EventStream, a: float, b: float) -> np.ndarray:
    """Number of events (either polarity) per pixel in ``(a, b]``."""
    if a > b:
        raise InvalidIntervalError(f"interval start {a} after end {b}")
    i, j = stream._index_range(a, b)
    counts = np.bincount(stream.pixel_index[i:j], minlength=stream.width * stream.height)
    return counts.reshape(stream.shape)


def preprocess(stream: EventStream, m: float, t_r: float) -> EventStream:
    """Move the events between ``m`` and ``t_r`` to a stream starting at 0.

    Forward (``t_r >= m``): events in ``(m, t_r]`` are shifted by ``-m``.
    Backward (``t_r < m``): events in ``(t_r, m]`` are mapped to ``m - t``
    with flipped polarity, which turns the integral from ``m`` back to
    ``t_r`` into a forward one. The result spans ``[0, |t_r - m|]``.
    """
    stream.require_cover(m, t_r)
    D = abs(t_r - m)
    if t_r >= m:
        i, j = stream._index_range(m, t_r)
        sl = slice(i, j)
        return EventStream(stream.width, stream.height, stream.t[sl] - m,
                           stream.x[sl], stream.y[sl], stream.p[sl], (0.0, D))
    i, j = stream._index_range(t_r, m)
    rev = np.arange(j - 1, i - 1, -1)
    t = m - stream.t[rev]
    # m - t can round to exactly D for the earliest event; keep it inside the span
    np.minimum(t, D, out=t)
    return EventStream(stream.width, stream.height, t, stream.x[rev], stream.y[rev],
                       -stream.p[rev], (0.0, D))


@dataclass(frozen=True, eq=False)
class TemporalBinGrid:
    """Per-polarity event counts in ``N`` equal time bins.

    ``data`` has shape ``(2N, H, W)``: channels ``0..N-1`` count positive
    events, channels ``N..2N-1`` count negative events.
    """

    N: int
    data: np.ndarray
    span: tuple[float, float]

    @property
    def positive(self) -> np.ndarray:
        return self.data[: self.N]

    @property
    def negative(self) -> np.ndarray:
        return self.data[self.N:]


def to_bins(stream: EventStream, N: int) -> TemporalBinGrid:
    if N < 1:
        raise InvalidInputError(f"bin count must be >= 1, got {N}")
    t0, t1 = stream.span
    H, W = stream.shape
    if t1 > t0:
        b = np.floor(N * (stream.t - t0) / (t1 - t0)).astype(np.int64)
        b = np.clip(b, 0, N - 1)
    else:
        b = np.zeros(len(stream), dtype=np.int64)
    channel = np.where(stream.p > 0, b, N + b)
    flat = channel * (H * W) + stream.pixel_index
    data = np.bincount(flat, minlength=2 * N * H * W).astype(np.int32).reshape(2 * N, H, W)
    data.setflags(write=False)
    return TemporalBinGrid(N, data, stream.span)
