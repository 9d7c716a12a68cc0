"""Command-line entry point: ``xfmnet synth | train | eval | diagnose | probe``.

Every subcommand resolves its settings as built-in defaults, then an optional
JSON file (``--config``), then command-line flags, and writes the resolved
settings to ``config.json`` beside its outputs. Passing that file back with
``--config`` (plus ``--force``) reproduces the run.

Failures print one JSON object on stderr, e.g.
``{"error": "FormatError", "message": "series.csv: line 7: ..."}``, and exit
with status 2 for bad input or configuration and 1 for anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import io
from .config import TrainConfig
from .data import WindowDataset
from .diagnostics import diagnose_series, feature_evolution, write_csv, write_feature_evolution
from .numerics import no_grad
from .synthetic import SynthConfig, calendar_marks, synthetic_generate
from .training import evaluate, load_model, normalizer_from_meta, seasonal_naive_metrics, train

OUTPUT_ENV = "XFMNET_OUTPUT_DIR"
SPLITS = ("train", "val", "test")

log = logging.getLogger("xfmnet")


class CliError(Exception):
    """Bad usage, configuration or input; exits with status 2."""


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "xfmnet-output")


def _parse_bool(text: str) -> bool:
    lowered = str(text).lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# -- settings per subcommand ----------------------------------------------------------


def _dataclass_keys(cls) -> dict[str, Any]:
    return {f.name: f.default for f in dataclasses.fields(cls)}


SYNTH_DEFAULTS = {**_dataclass_keys(SynthConfig), "seed": 0}
TRAIN_DEFAULTS = {**_dataclass_keys(TrainConfig), "series_csv": None, "image_blob": None, "eval_stride": 1}
EVAL_DEFAULTS = {"checkpoint": None, "series_csv": None, "image_blob": None, "split": "test", "batch_size": 32}
DIAGNOSE_DEFAULTS = {"series_csv": None, "svg": False}
PROBE_DEFAULTS = {
    "checkpoint": None,
    "series_csv": None,
    "image_blob": None,
    "split": "test",
    "sample": 0,
    "probe_windows": 8,
}


def _flag_type(default: Any) -> Callable | None:
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, (int, float)):
        return type(default)
    if default is None or isinstance(default, str):
        return str
    return None  # tuples are JSON-only


def resolve(defaults: dict, file_values: dict, flag_values: dict) -> dict:
    """Merge defaults, JSON values and flags (later wins); unknown keys are an error."""
    allowed = set(defaults) | {"output_dir"}
    unknown = sorted(set(file_values) - allowed)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    merged = {**defaults, "output_dir": _default_output_dir()}
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    for key, default in defaults.items():
        if isinstance(default, tuple) and isinstance(merged[key], list):
            merged[key] = tuple(merged[key])
    return merged


def _load_json_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        values = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(values, dict):
        raise CliError(f"{path}: config must be a JSON object")
    return values


# -- path checks ---------------------------------------------------------------------


def _require_file(settings: dict, key: str) -> Path:
    value = settings.get(key)
    if not value:
        raise CliError(f"missing required setting {key}")
    path = Path(value)
    if not path.is_file():
        raise CliError(f"{key}: file not found: {path}")
    return path


def _require_checkpoint(settings: dict) -> Path:
    value = settings.get("checkpoint")
    if not value:
        raise CliError("missing required setting checkpoint")
    path = Path(value)
    if not (path / "manifest.json").is_file():
        raise CliError(f"checkpoint: no manifest.json in {path}")
    return path


def _prepare_output(settings: dict, names: list[str], force: bool) -> Path:
    out = Path(settings["output_dir"])
    if out.exists() and not out.is_dir():
        raise CliError(f"output_dir is not a directory: {out}")
    clashes = [n for n in names + ["config.json"] if (out / n).exists()]
    if clashes and not force:
        raise CliError(f"refusing to overwrite {', '.join(str(out / n) for n in clashes)}; pass --force")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output_dir {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise CliError(f"output_dir is not writable: {out}")
    return out


def _echo(out: Path, command: str, settings: dict) -> None:
    values = {k: (list(v) if isinstance(v, tuple) else v) for k, v in settings.items()}
    (out / "config.json").write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    log.info("%s: resolved config written to %s", command, out / "config.json")


# -- data loading ----------------------------------------------------------------------


def load_inputs(series_csv: Path, image_blob: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Series, frames and calendar marks; the two files must have equal length."""
    stamps, series = io.read_series_csv(series_csv)
    frames = io.read_image_blob(image_blob)
    if frames.shape[0] != series.shape[0]:
        raise io.FormatError(
            f"length mismatch: {series_csv} has {series.shape[0]} rows but {image_blob} has {frames.shape[0]} frames"
        )
    return series, frames, calendar_marks(stamps)


def _checkpoint_dataset(settings: dict) -> tuple[Any, dict, WindowDataset]:
    ckpt = _require_checkpoint(settings)
    series, frames, marks = load_inputs(_require_file(settings, "series_csv"), _require_file(settings, "image_blob"))
    model, meta = load_model(ckpt)
    if series.shape[1] != meta["n_stations"] or frames.shape[1] != meta["channels"]:
        raise CliError(
            f"data has {series.shape[1]} stations and {frames.shape[1]} channels; "
            f"checkpoint expects {meta['n_stations']} and {meta['channels']}"
        )
    cfg = model.cfg
    ds = WindowDataset(series, frames, marks, cfg.lookback, cfg.horizon, normalizer_from_meta(meta))
    return model, meta, ds


# -- subcommands ------------------------------------------------------------------------


def cmd_synth(settings: dict, force: bool) -> list[Path]:
    out = _prepare_output(settings, ["series.csv", "images.bin", "images.json"], force)
    cfg = SynthConfig(**{k: settings[k] for k in _dataclass_keys(SynthConfig)})
    data = synthetic_generate(int(settings["seed"]), cfg)
    written = [
        io.write_series_csv(out / "series.csv", data.timestamps, data.series),
        io.write_image_blob(out / "images.bin", data.frames),
        out / "images.json",
    ]
    _echo(out, "synth", settings)
    return written


def cmd_train(settings: dict, force: bool) -> list[Path]:
    cfg_values = {k: settings[k] for k in _dataclass_keys(TrainConfig)}
    try:
        cfg = TrainConfig(**cfg_values)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from None
    series_csv, image_blob = _require_file(settings, "series_csv"), _require_file(settings, "image_blob")
    out = _prepare_output(settings, ["metrics.csv", "checkpoint", "summary.json"], force)
    series, frames, marks = load_inputs(series_csv, image_blob)
    try:
        ds = WindowDataset(series, frames, marks, cfg.lookback, cfg.horizon)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _echo(out, "train", settings)
    result = train(cfg, ds, out_dir=out, eval_stride=int(settings["eval_stride"]))
    naive = seasonal_naive_metrics(ds, "val", cfg.season_period, int(settings["eval_stride"]))
    summary = {
        "best_epoch": result.best_epoch,
        "best_val_mse": result.best_val_mse,
        "steps": result.steps,
        "seasonal_naive_val_mse": naive[0],
        "seasonal_naive_val_mae": naive[1],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [out / "metrics.csv", out / "checkpoint", out / "summary.json"]


def cmd_eval(settings: dict, force: bool) -> list[Path]:
    if settings["split"] not in SPLITS:
        raise CliError(f"split must be one of {', '.join(SPLITS)}")
    _require_checkpoint(settings)
    _require_file(settings, "series_csv")
    _require_file(settings, "image_blob")
    out = _prepare_output(settings, ["eval.csv"], force)
    model, _, ds = _checkpoint_dataset(settings)
    split = settings["split"]
    model_mse, model_mae = evaluate(model, ds, split, int(settings["batch_size"]))
    naive_mse, naive_mae = seasonal_naive_metrics(ds, split, model.cfg.season_period)
    path = write_csv(
        out / "eval.csv",
        ["split", "predictor", "mse", "mae", "windows"],
        [
            (split, "model", model_mse, model_mae, len(ds.starts(split))),
            (split, "seasonal_naive", naive_mse, naive_mae, len(ds.starts(split))),
        ],
    )
    _echo(out, "eval", settings)
    return [path]


def cmd_diagnose(settings: dict, force: bool) -> list[Path]:
    series_csv = _require_file(settings, "series_csv")
    names = ["periodogram.csv", "envelope_daily.csv", "envelope_midterm.csv", "acf.csv", "volatility.csv", "anomalies.csv"]
    out = _prepare_output(settings, names + (["periodogram.svg"] if settings["svg"] else []), force)
    _, series = io.read_series_csv(series_csv)
    written = diagnose_series(series, out, svg=bool(settings["svg"]))
    _echo(out, "diagnose", settings)
    return written


def cmd_probe(settings: dict, force: bool) -> list[Path]:
    if settings["split"] not in SPLITS:
        raise CliError(f"split must be one of {', '.join(SPLITS)}")
    _require_checkpoint(settings)
    _require_file(settings, "series_csv")
    _require_file(settings, "image_blob")
    out = _prepare_output(settings, [], force)
    model, _, ds = _checkpoint_dataset(settings)
    starts = ds.starts(settings["split"])
    sample, n = int(settings["sample"]), int(settings["probe_windows"])
    if not 0 <= sample < len(starts) or n < 1:
        raise CliError(f"sample must lie in [0, {len(starts) - 1}] and probe_windows must be positive")
    x, f, m, _ = ds.batch(starts[sample : sample + n])
    probes: list[dict] = []
    model.eval()
    with no_grad():
        model(x, f, m, probes=probes)
    written = []
    for level, stage_probes in enumerate(probes):
        arrays = {k: np.asarray(getattr(v, "data", v)) for k, v in stage_probes.items()}
        written += write_feature_evolution(out, feature_evolution(arrays, sample=0), level=level)
    _echo(out, "probe", settings)
    return written


COMMANDS = {
    "synth": (cmd_synth, SYNTH_DEFAULTS, "generate the seeded synthetic dataset"),
    "train": (cmd_train, TRAIN_DEFAULTS, "train a model and keep the best validation checkpoint"),
    "eval": (cmd_eval, EVAL_DEFAULTS, "score a checkpoint and the seasonal-naive baseline on a split"),
    "diagnose": (cmd_diagnose, DIAGNOSE_DEFAULTS, "spectral, envelope, ACF and volatility diagnostics"),
    "probe": (cmd_probe, PROBE_DEFAULTS, "export fusion-stage channel correlations and activations"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # keep failures on one machine-parsable line
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xfmnet", description="Multimodal multiscale water-quality forecasting.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, defaults, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of settings; flags take precedence")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--output-dir", dest="output_dir", help=f"defaults to ${OUTPUT_ENV} or ./xfmnet-output")
        for key, default in defaults.items():
            kind = _flag_type(default)
            if kind is None:
                continue
            shown = "" if default is None else f" (default {default})"
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=kind, default=None, help=f"{key}{shown}")
    return parser


def _fail(kind: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": " ".join(str(message).split())}) + "\n")
    return status


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        return _fail("UsageError", str(exc), 2)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handler, defaults, _ = COMMANDS[args.command]
    flags = {k: getattr(args, k, None) for k in list(defaults) + ["output_dir"]}
    try:
        settings = resolve(defaults, _load_json_config(args.config), flags)
        written = handler(settings, args.force)
    except CliError as exc:
        return _fail("ConfigError", str(exc), 2)
    except io.FormatError as exc:
        return _fail("FormatError", str(exc), 2)
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - the single-line contract covers every failure
        return _fail(type(exc).__name__, str(exc), 1)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
