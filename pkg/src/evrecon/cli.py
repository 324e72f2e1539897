"""Command-line front end.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines;
flags given on the command line win over the file. Failures print one
JSON line ``{"error": <reason>, "message": ...}`` to stderr and exit with
the error's code.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import io
from .calibration import LossWeights, default_queries, estimate_threshold, total_loss
from .errors import ConfigError, EngineError, OutOfRangeError
from .events import EventStream, ExposureWindow, preprocess, to_bins
from .integral import Threshold, integral_map
from .metrics import psnr, ssim
from .reconstruction import Frame, enhance, reconstruct_latent
from .simulator import generate_events, synthesize_blur, synthetic_scene

log = logging.getLogger("evrecon")

TASKS = ("simulate", "blur", "deblur", "interpolate", "enhance", "calibrate", "evaluate", "dump-integral")
IO_ERROR_CODE = 15
DEFAULT_QUERY_COUNT = 8


@dataclass
class RunConfig:
    task: str
    events: Optional[str] = None
    frames: Optional[str] = None
    test: Optional[str] = None
    out: Optional[str] = None
    c: Union[str, float] = "auto"
    c_range: tuple = (0.05, 0.8)
    queries: Union[int, list, None] = None
    weights: tuple = (1.0, 0.5, 1.0)
    bins: int = 16
    format: str = "pgm"
    window: Optional[str] = None
    windows: Optional[str] = None
    m: Optional[float] = None
    seed: int = 0
    size: tuple = (64, 64)
    polarity_sign: int = 1
    match_tol: float = 1e-6
    bins_out: Optional[str] = None

    def threshold(self) -> Optional[Threshold]:
        return None if self.c == "auto" else Threshold(self.c)

    def loss_weights(self) -> LossWeights:
        return LossWeights(*self.weights)


def _floats(text: str, n: int = None) -> tuple:
    try:
        vals = tuple(float(s) for s in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} values, got {text!r}")
    return vals


def parse_queries(text) -> Union[int, list]:
    text = str(text).strip()
    if "," not in text and "." not in text and "e" not in text.lower():
        try:
            n = int(text)
        except ValueError as exc:
            raise ConfigError(f"bad --queries {text!r}") from exc
        if n < 1:
            raise ConfigError("--queries count must be >= 1")
        return n
    return list(_floats(text))


def parse_window(text: str) -> ExposureWindow:
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must be 'start:duration', got {text!r}")
    return ExposureWindow(*_floats(",".join(parts), 2))


def _coerce(key: str, value):
    """Turn a string from a flag or config file into the RunConfig field type."""
    if value is None:
        return None
    try:
        if key == "c":
            return "auto" if str(value).strip() == "auto" else float(value)
        if key == "c_range":
            return _floats(value, 2)
        if key == "weights":
            return _floats(value, 3)
        if key == "queries":
            return parse_queries(value)
        if key in ("bins", "seed", "polarity_sign"):
            return int(value)
        if key in ("m", "match_tol"):
            return float(value)
        if key == "size":
            w, h = str(value).lower().split("x")
            return (int(w), int(h))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def build_config(task: str, flags: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)} - {"task"}
    merged = {}
    cfg_path = flags.pop("config", None)
    if cfg_path:
        for k, v in io.parse_config(cfg_path).items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            merged[k] = v
    merged.update({k: v for k, v in flags.items() if v is not None and k in known})
    cfg = RunConfig(task, **{k: _coerce(k, v) for k, v in merged.items()})
    if cfg.format not in ("pgm", "raw"):
        raise ConfigError(f"--format must be pgm or raw, got {cfg.format!r}")
    if cfg.bins < 1:
        raise ConfigError("--bins must be >= 1")
    if cfg.polarity_sign not in (1, -1):
        raise ConfigError("--polarity-sign must be 1 or -1")
    return cfg


def _require(cfg: RunConfig, *names) -> None:
    for n in names:
        if getattr(cfg, n) is None:
            raise ConfigError(f"{cfg.task} needs --{n.replace('_', '-')}")


def _load_stream(cfg: RunConfig, shape, lo: float, hi: float) -> EventStream:
    h, w = shape
    stream = io.load_events(cfg.events, width=w, height=h, polarity_sign=cfg.polarity_sign)
    if stream.shape != tuple(shape):
        raise ConfigError(f"events are {stream.shape}, frames are {tuple(shape)}")
    if len(stream):
        lo, hi = min(lo, stream.span[0]), max(hi, stream.span[1])
    return EventStream(stream.width, stream.height, stream.t, stream.x, stream.y, stream.p, (lo, hi))


def _pair(cfg: RunConfig):
    frames = io.load_frames(cfg.frames)
    if len(frames) != 2:
        raise ConfigError(f"{cfg.task} needs exactly 2 reference frames, found {len(frames)}")
    return frames


def _resolve_queries(cfg: RunConfig, lo: float, hi: float, default) -> list:
    q = cfg.queries
    if q is None:
        return default(DEFAULT_QUERY_COUNT)
    if isinstance(q, int):
        return default(q)
    for m in q:
        if not (lo <= m <= hi):
            raise OutOfRangeError(f"query {m} outside [{lo}, {hi}]")
    return list(q)


def _resolve_c(cfg: RunConfig, F_i: Frame, F_j: Frame, stream: EventStream) -> Threshold:
    c = cfg.threshold()
    if c is None:
        c = estimate_threshold(F_i, F_j, stream, c_range=cfg.c_range, w=cfg.loss_weights())
        log.info("estimated threshold c=%.6f", c.c)
    return c


def _write_frames(cfg: RunConfig, frames) -> None:
    _require(cfg, "out")
    io.save_frames(cfg.out, frames, cfg.format)


def cmd_simulate(cfg: RunConfig) -> int:
    _require(cfg, "out")
    c = cfg.threshold() or Threshold(0.2)
    if cfg.frames:
        video = io.load_video(cfg.frames)
        if not cfg.windows:
            raise ConfigError("simulate from a latent video needs --windows start:T,start:T")
        windows = []
    else:
        w, h = cfg.size
        scene = synthetic_scene(c, width=w, height=h, seed=cfg.seed)
        video, windows = scene.video, list(scene.windows)
    if cfg.windows:
        windows = [parse_window(s) for s in cfg.windows.split(",")]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stream = generate_events(video, c)
    io.save_events(out / "events.evs", stream)
    io.save_frames(out / "latent", video.frames, cfg.format)
    io.save_frames(out / "blurry", [synthesize_blur(video, win) for win in windows], cfg.format)
    log.info("simulated %d events, %d latent frames, %d blurry frames", len(stream), len(video), len(windows))
    return 0


def cmd_blur(cfg: RunConfig) -> int:
    _require(cfg, "frames", "window", "out")
    video = io.load_video(cfg.frames)
    _write_frames(cfg, [synthesize_blur(video, parse_window(cfg.window))])
    return 0


def cmd_deblur(cfg: RunConfig) -> int:
    _require(cfg, "frames", "events")
    frames = io.load_frames(cfg.frames)
    if not 1 <= len(frames) <= 2:
        raise ConfigError(f"deblur takes 1 or 2 blurry frames, found {len(frames)}")
    win = frames[0].exposure
    if win.T <= 0:
        raise ConfigError("deblur needs a blurry reference (exposure > 0)")
    queries = _resolve_queries(cfg, win.t_s, win.t_e, lambda n: list(np.linspace(win.t_s, win.t_e, n)))
    hi = frames[-1].exposure.t_e
    stream = _load_stream(cfg, frames[0].shape, win.t_s, hi)
    if len(frames) == 2:
        c = _resolve_c(cfg, frames[0], frames[1], stream)
        out = enhance(frames[0], frames[1], stream, queries, c)
    else:
        c = cfg.threshold()
        if c is None:
            raise ConfigError("--c auto needs two blurry frames")
        out = [reconstruct_latent(frames[0], integral_map(stream, m, win, c)) for m in queries]
    _write_frames(cfg, out)
    return 0


def cmd_interpolate(cfg: RunConfig) -> int:
    _require(cfg, "frames", "events")
    I_i, I_j = _pair(cfg)
    if not (I_i.exposure.is_sharp and I_j.exposure.is_sharp):
        raise ConfigError("interpolate needs sharp reference frames (exposure 0)")
    lo, hi = I_i.exposure.t_s, I_j.exposure.t_s
    queries = _resolve_queries(cfg, lo, hi, lambda n: list(np.linspace(lo, hi, n + 2)[1:-1]))
    stream = _load_stream(cfg, I_i.shape, lo, hi)
    _write_frames(cfg, enhance(I_i, I_j, stream, queries, _resolve_c(cfg, I_i, I_j, stream)))
    return 0


def cmd_enhance(cfg: RunConfig) -> int:
    _require(cfg, "frames", "events")
    F_i, F_j = _pair(cfg)
    lo, hi = F_i.exposure.t_s, F_j.exposure.t_e
    queries = _resolve_queries(cfg, lo, hi, lambda n: list(np.linspace(lo, hi, n)))
    stream = _load_stream(cfg, F_i.shape, lo, hi)
    _write_frames(cfg, enhance(F_i, F_j, stream, queries, _resolve_c(cfg, F_i, F_j, stream)))
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    _require(cfg, "frames", "events")
    B_i, B_j = _pair(cfg)
    lo, hi = B_i.exposure.t_s, B_j.exposure.t_e
    queries = _resolve_queries(cfg, lo, hi, lambda n: default_queries(B_i.exposure, B_j.exposure, n))
    stream = _load_stream(cfg, B_i.shape, lo, hi)
    c = cfg.threshold()
    if c is None:
        c = estimate_threshold(B_i, B_j, stream, queries, cfg.c_range, cfg.loss_weights())
    line = total_loss(B_i, B_j, stream, queries, c, cfg.loss_weights()).to_json()
    print(line)
    if cfg.out:
        Path(cfg.out).write_text(line + "\n")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg, "frames", "test")
    ref = io.load_frames(cfg.frames)
    test = io.load_frames(cfg.test)
    ref_t = np.array([f.exposure.t_s for f in ref])
    lines, ps, ss = [], [], []
    for k, f in enumerate(test):
        j = int(np.argmin(np.abs(ref_t - f.exposure.t_s)))
        if abs(ref_t[j] - f.exposure.t_s) > cfg.match_tol:
            raise ConfigError(f"no reference frame within {cfg.match_tol} s of t={f.exposure.t_s}")
        p, s = psnr(ref[j], f), ssim(ref[j], f)
        ps.append(p)
        ss.append(s)
        lines.append(json.dumps({"frame": k, "psnr": p, "ssim": s}))
    lines.append(json.dumps({"mean_psnr": float(np.mean(ps)) if ps else None,
                             "mean_ssim": float(np.mean(ss)) if ss else None, "frames": len(ps)}))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.out:
        Path(cfg.out).write_text(text)
    return 0


def cmd_dump_integral(cfg: RunConfig) -> int:
    _require(cfg, "events", "window", "m", "out")
    c = cfg.threshold()
    if c is None:
        raise ConfigError("dump-integral needs a numeric --c")
    win = parse_window(cfg.window)
    stream = io.load_events(cfg.events, polarity_sign=cfg.polarity_sign)
    stream = stream.with_span(min(cfg.m, win.t_s), max(cfg.m, win.t_e))
    io.save_integral(cfg.out, integral_map(stream, cfg.m, win, c))
    if cfg.bins_out:
        grids = [to_bins(preprocess(stream, cfg.m, t_r), cfg.bins).data for t_r in (win.t_s, win.t_e)]
        np.save(cfg.bins_out, np.stack(grids))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "blur": cmd_blur,
    "deblur": cmd_deblur,
    "interpolate": cmd_interpolate,
    "enhance": cmd_enhance,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "dump-integral": cmd_dump_integral,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evrecon", description="Event-based latent frame reconstruction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="task", required=True)
    for name in TASKS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--events", help="event file (EVS1 binary or t,x,y,p CSV)")
        p.add_argument("--frames", help="frame directory with manifest.txt")
        p.add_argument("--out", help="output path")
        p.add_argument("--c", help="threshold, or 'auto' to estimate it")
        p.add_argument("--c-range", help="search range lo,hi for --c auto")
        p.add_argument("--queries", help="query count n or explicit times t1,t2,...")
        p.add_argument("--bins", help="temporal bins N (default 16)")
        p.add_argument("--weights", help="loss weights a,b,g (default 1,0.5,1)")
        p.add_argument("--format", help="output frame format pgm|raw")
        p.add_argument("--polarity-sign", help="1, or -1 to flip polarities on load")
        if name == "evaluate":
            p.add_argument("--test", help="frame directory to score against --frames")
            p.add_argument("--match-tol", help="timestamp matching tolerance in seconds")
        if name in ("blur", "dump-integral"):
            p.add_argument("--window", help="exposure as start:duration")
        if name == "dump-integral":
            p.add_argument("--m", help="query time")
            p.add_argument("--bins-out", help="also save the canonical temporal-bin grids (.npy)")
        if name == "simulate":
            p.add_argument("--windows", help="blurry exposures start:T,start:T")
            p.add_argument("--seed", help="synthetic scene seed")
            p.add_argument("--size", help="synthetic scene size WxH")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("task", "verbose")}
    try:
        cfg = build_config(args.task, flags)
        return COMMANDS[cfg.task](cfg)
    except EngineError as exc:
        print(json.dumps({"error": exc.reason, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return IO_ERROR_CODE


if __name__ == "__main__":
    sys.exit(main())
