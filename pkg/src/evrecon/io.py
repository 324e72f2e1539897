"""File formats.

Events: little-endian binary (``EVS1`` magic, 16-byte header, 16 bytes per
event) or CSV with a ``t,x,y,p`` header; :func:`load_events` picks by magic.
Rasters: 8-byte header (width u32, height u32) followed by row-major f64.
Frames: 8-bit binary PGM or raw raster, chosen by extension. A frame
directory holds numbered frames plus ``manifest.txt`` with lines
``index timestamp [exposure]``.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .events import EventStream, ExposureWindow
from .integral import IntegralMap
from .reconstruction import EPS, Frame
from .simulator import LatentVideo

MAGIC = b"EVS1"
HEADER = struct.Struct("<4sHHQ")
EVENT_DTYPE = np.dtype([("t", "<f8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("pad", "V3")])
RASTER_HEADER = struct.Struct("<II")
MANIFEST = "manifest.txt"

assert EVENT_DTYPE.itemsize == 16 and HEADER.size == 16


def save_events(path, stream: EventStream) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "x", "y", "p"])
            for t, x, y, p in zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist()):
                w.writerow([repr(t), x, y, p])
        return
    rec = np.zeros(len(stream), dtype=EVENT_DTYPE)
    rec["t"], rec["x"], rec["y"], rec["p"] = stream.t, stream.x, stream.y, stream.p
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, stream.width, stream.height, len(stream)))
        f.write(rec.tobytes())


def load_events(path, width: int = None, height: int = None, polarity_sign: int = 1) -> EventStream:
    """Read an event file. ``polarity_sign=-1`` flips every polarity on load.

    The span of the returned stream is the range of its timestamps; widen
    it with :meth:`EventStream.with_span` when the recording is known to
    cover a longer interval.
    """
    if polarity_sign not in (1, -1):
        raise FormatError("polarity_sign must be +1 or -1")
    data = Path(path).read_bytes()
    if data[:4] == MAGIC:
        if len(data) < HEADER.size:
            raise FormatError(f"{path}: truncated header")
        _, w, h, n = HEADER.unpack_from(data)
        if len(data) != HEADER.size + n * EVENT_DTYPE.itemsize:
            raise FormatError(f"{path}: expected {n} events, file size disagrees")
        rec = np.frombuffer(data, dtype=EVENT_DTYPE, count=n, offset=HEADER.size)
        t, x, y, p = rec["t"], rec["x"], rec["y"], rec["p"]
        width, height = width or w, height or h
    else:
        lines = data.decode("utf-8").splitlines()
        if not lines or [s.strip() for s in lines[0].split(",")] != ["t", "x", "y", "p"]:
            raise FormatError(f"{path}: neither EVS1 binary nor CSV with a t,x,y,p header")
        rows = [r for r in csv.reader(lines[1:]) if r]
        try:
            t = np.array([float(r[0]) for r in rows])
            x = np.array([int(r[1]) for r in rows], dtype=np.int64)
            y = np.array([int(r[2]) for r in rows], dtype=np.int64)
            p = np.array([int(r[3]) for r in rows], dtype=np.int64)
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}: bad CSV row ({exc})") from exc
        width = width or (int(x.max()) + 1 if x.size else 1)
        height = height or (int(y.max()) + 1 if y.size else 1)
    return EventStream.from_arrays(width, height, t, x, y, polarity_sign * np.asarray(p, dtype=np.int64))


def save_raster(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(RASTER_HEADER.pack(w, h))
        f.write(values.tobytes())


def load_raster(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < RASTER_HEADER.size:
        raise FormatError(f"{path}: truncated raster header")
    w, h = RASTER_HEADER.unpack_from(data)
    if len(data) != RASTER_HEADER.size + 8 * w * h:
        raise FormatError(f"{path}: raster size disagrees with {w}x{h} header")
    return np.frombuffer(data, dtype="<f8", offset=RASTER_HEADER.size).reshape(h, w).copy()


def save_integral(path, E: IntegralMap) -> None:
    save_raster(path, E.values)


def save_pgm(path, values: np.ndarray) -> None:
    h, w = values.shape
    pix = np.clip(np.rint(np.asarray(values) * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(pix.tobytes())


def _pgm_tokens(data: bytes, count: int):
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PGM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1


def load_pgm(path) -> np.ndarray:
    """8-bit P5 image as linear intensity ``v / 255`` clamped to ``[EPS, 1]``."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), off = _pgm_tokens(data, 4)
    if magic != b"P5" or int(maxval) != 255:
        raise FormatError(f"{path}: only 8-bit binary PGM (P5, maxval 255) is supported")
    w, h = int(w), int(h)
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off)
    return np.clip(pix.reshape(h, w) / 255.0, EPS, 1.0)


def save_image(path, values: np.ndarray) -> None:
    if Path(path).suffix.lower() == ".pgm":
        save_pgm(path, values)
    else:
        save_raster(path, values)


def load_image(path) -> np.ndarray:
    if Path(path).suffix.lower() == ".pgm":
        return load_pgm(path)
    return np.clip(load_raster(path), EPS, 1.0)


def frame_name(index: int, fmt: str) -> str:
    return f"{index:06d}.{fmt}"


def save_frames(directory, frames, fmt: str = "pgm") -> None:
    """Write frames as ``000000.<fmt>``, ... and a manifest of their exposures."""
    if fmt not in ("pgm", "raw"):
        raise FormatError(f"unknown frame format {fmt!r}")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, f in enumerate(frames):
        save_image(d / frame_name(k, fmt), f.intensity)
        e = f.exposure
        lines.append(f"{k} {e.t_s!r}" + (f" {e.T!r}" if e.T else ""))
    (d / MANIFEST).write_text("\n".join(lines) + "\n")


def load_frames(directory) -> list[Frame]:
    d = Path(directory)
    mpath = d / MANIFEST
    if not mpath.exists():
        raise FormatError(f"{d}: missing {MANIFEST}")
    frames = []
    for n, line in enumerate(mpath.read_text().splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if len(parts) not in (2, 3):
            raise FormatError(f"{mpath}:{n}: expected 'index timestamp [exposure]'")
        try:
            k, t_s = int(parts[0]), float(parts[1])
            T = float(parts[2]) if len(parts) == 3 else 0.0
        except ValueError as exc:
            raise FormatError(f"{mpath}:{n}: {exc}") from exc
        matches = [p for ext in ("pgm", "raw") if (p := d / frame_name(k, ext)).exists()]
        if not matches:
            raise FormatError(f"{d}: no frame file for index {k}")
        frames.append(Frame(load_image(matches[0]), ExposureWindow(t_s, T)))
    return frames


def load_video(directory) -> LatentVideo:
    return LatentVideo(tuple(load_frames(directory)))


def parse_config(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
