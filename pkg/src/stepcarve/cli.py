"""Command-line front end.

Five commands share one configuration surface (defaults, optional JSON
config file with nested per-module sections, kebab-case flag overrides):

* ``ss-cache``     stride-cached structure stage vs its oracle
* ``slat-carve``   carved, tangent-cached refinement stage vs its oracle
* ``mesh-agg``     spectral profiling and token aggregation for one instance
* ``end2end``      the three stages chained on linked synthetic state
* ``sweep``        one named parameter varied over a list of values

Each run writes one metrics row per (seed, config point) as CSV or JSON.
Outputs are byte-identical across reruns with the same config and seeds;
an optional timestamp column is appended only when ``--timestamp`` is
given. When ``--output`` is omitted, files land in ``$STEPCARVE_OUTPUT_DIR``
(or the working directory) as ``<command>_metrics.<format>``.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 file IO
or file format error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .carve import CarveConfig, run_slat_stage
from .cvxg import CvxgError, read_mask, read_voxel_grid
from .fixtures import FIXTURES, tokens_from_voxels
from .records import counters_from, relative_frobenius
from .sim import SimConfig, make_backbone, run_oracle, compare_runs
from .spectralagg import AggSchedule, TokenSet, analyze_and_aggregate
from .stepcache import StepCacheConfig, run_ss_stage

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "run_experiment", "main"]

OUTPUT_DIR_ENV = "STEPCARVE_OUTPUT_DIR"
STAGES = ("ss-cache", "slat-carve", "mesh-agg", "end2end")
COMMANDS = STAGES + ("sweep",)

# seed offset decoupling the refinement stage's streams from the structure
# stage's when both run inside one chained experiment
_CHAIN_SEED_OFFSET = 7919
_LINK_SCALE = 0.5


class ConfigError(ValueError):
    """Bad configuration: unknown key, unparsable value, or violated bound."""


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise ValueError(f"expected true/false, got {value!r}")


def _parse_grid_dims(value) -> tuple[int, int, int]:
    if isinstance(value, str):
        parts = value.split(",")
    else:
        parts = list(value)
    dims = tuple(int(p) for p in parts)
    if len(dims) != 3:
        raise ValueError(f"grid_dims needs exactly 3 extents, got {value!r}")
    return dims


# section -> field -> parser; this is also the whitelist for config files
_SECTIONS: dict[str, dict[str, object]] = {
    "sim": {
        "total_steps": int,
        "token_count": int,
        "feature_dim": int,
        "grid_dims": _parse_grid_dims,
        "shape_smoothness": int,
        "shape_drift": float,
        "layout_oscillation_amp": float,
        "layout_oscillation_freq": float,
        "layout_trend_slope": float,
        "layout_fraction": float,
        "active_fraction": float,
        "noise_sigma": float,
    },
    "stepcache": {
        "stride_k": int,
        "momentum_beta": float,
        "warmup_steps": int,
    },
    "carve": {
        "gamma": float,
        "keep_ratio": float,
        "error_threshold": float,
        "warmup_steps": int,
        "freq_cutoff": float,
        "refresh_freq_scores": _parse_bool,
    },
    "agg": {
        "tau_low": float,
        "tau_high": float,
        "weight_w": float,
        "hfer_cutoff": float,
    },
}

_TOP_LEVEL_KEYS = ("seeds", "output", "format", "timestamp")

# kebab-case flag -> (section, field); "warmup-steps" fans out to both stages
_FLAG_TARGETS: dict[str, list[tuple[str, str]]] = {
    field_name.replace("_", "-"): [(section, field_name)]
    for section, table in _SECTIONS.items()
    for field_name in table
    if field_name != "warmup_steps"
}
_FLAG_TARGETS["warmup-steps"] = [("stepcache", "warmup_steps"), ("carve", "warmup_steps")]

_SWEEP_ALIASES = {
    "beta": "momentum-beta",
    "k": "stride-k",
    "keep": "keep-ratio",
    "w": "weight-w",
}


def _default_sections() -> dict[str, dict]:
    sim_defaults = {f.name: getattr(SimConfig(), f.name) for f in fields(SimConfig)}
    carve_defaults = {f.name: getattr(CarveConfig(), f.name) for f in fields(CarveConfig)}
    step_defaults = {
        f.name: getattr(StepCacheConfig(), f.name) for f in fields(StepCacheConfig)
    }
    agg = AggSchedule()
    return {
        "sim": {k: sim_defaults[k] for k in _SECTIONS["sim"]},
        "stepcache": {k: step_defaults[k] for k in _SECTIONS["stepcache"]},
        "carve": {k: carve_defaults[k] for k in _SECTIONS["carve"]},
        "agg": {
            "tau_low": agg.tau_low,
            "tau_high": agg.tau_high,
            "weight_w": 0.9,
            "hfer_cutoff": 0.5,
        },
    }


@dataclass
class ExperimentConfig:
    command: str
    sim: SimConfig
    stepcache: StepCacheConfig
    carve: CarveConfig
    agg: AggSchedule
    weight_w: float = 0.9
    hfer_cutoff: float = 0.5
    seeds: tuple[int, ...] = (0,)
    output_path: str | None = None
    output_format: str = "csv"
    timestamp: bool = False
    fixture: str | None = None
    mask_path: str | None = None
    voxels_path: str | None = None
    sweep_param: str | None = None
    sweep_values: tuple = ()
    sweep_stage: str = "end2end"
    sections: dict = field(default_factory=dict, repr=False)


def _coerce(section: str, key: str, value):
    parser = _SECTIONS[section][key]
    try:
        return parser(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc


def _apply_file(sections: dict, path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    top = {}
    for section, content in data.items():
        if section in _TOP_LEVEL_KEYS:
            top[section] = content
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section: {section}")
        if not isinstance(content, dict):
            raise ConfigError(f"config section {section} must hold an object")
        for key, value in content.items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown config key: {section}.{key}")
            sections[section][key] = _coerce(section, key, value)
    return top


def _build_config(command: str, sections: dict, **extras) -> ExperimentConfig:
    try:
        sim = SimConfig(seed=0, **sections["sim"])
        stepcache = StepCacheConfig(
            total_steps=sections["sim"]["total_steps"], **sections["stepcache"]
        )
        carve = CarveConfig(**sections["carve"])
        agg = AggSchedule(
            tau_low=sections["agg"]["tau_low"], tau_high=sections["agg"]["tau_high"]
        )
        weight_w = float(sections["agg"]["weight_w"])
        hfer_cutoff = float(sections["agg"]["hfer_cutoff"])
        if not 0.0 <= weight_w <= 1.0:
            raise ValueError(f"weight_w must lie in [0, 1], got {weight_w}")
        if not 0.0 < hfer_cutoff < 1.0:
            raise ValueError(f"hfer_cutoff must lie in (0, 1), got {hfer_cutoff}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        command=command,
        sim=sim,
        stepcache=stepcache,
        carve=carve,
        agg=agg,
        weight_w=weight_w,
        hfer_cutoff=hfer_cutoff,
        sections=sections,
        **extras,
    )


def parse_config(
    command: str,
    config_file: str | None = None,
    overrides: dict | None = None,
    **extras,
) -> ExperimentConfig:
    """Merge defaults, an optional JSON config file, and flag overrides.

    ``overrides`` maps kebab-case flag names to raw values. Precedence is
    flags over file over defaults. Unknown sections, keys or flags raise
    :class:`ConfigError` naming the offender; so do violated bounds.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command: {command}")
    sections = _default_sections()
    top: dict = {}
    if config_file is not None:
        top = _apply_file(sections, config_file)
    for flag, value in (overrides or {}).items():
        if flag not in _FLAG_TARGETS:
            raise ConfigError(f"unknown parameter: {flag}")
        for section, key in _FLAG_TARGETS[flag]:
            sections[section][key] = _coerce(section, key, value)

    if "seeds" in top:
        raw_seeds = top["seeds"]
        if not isinstance(raw_seeds, list) or not all(
            isinstance(s, int) for s in raw_seeds
        ):
            raise ConfigError("seeds must be a list of integers")
        extras.setdefault("seeds", tuple(raw_seeds))
    if "output" in top:
        extras.setdefault("output_path", str(top["output"]))
    if "format" in top:
        extras.setdefault("output_format", str(top["format"]))
    if "timestamp" in top:
        try:
            extras.setdefault("timestamp", _parse_bool(top["timestamp"]))
        except ValueError as exc:
            raise ConfigError(f"bad value for timestamp: {exc}") from exc

    cfg = _build_config(command, sections, **extras)
    if cfg.output_format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.output_format!r}")
    if cfg.fixture is not None and cfg.fixture not in FIXTURES:
        known = ", ".join(sorted(FIXTURES))
        raise ConfigError(f"unknown fixture {cfg.fixture!r} (available: {known})")
    if (cfg.mask_path is None) != (cfg.voxels_path is None):
        raise ConfigError("--mask and --voxels must be given together")
    if not cfg.seeds:
        raise ConfigError("at least one seed is required")
    return cfg


# ---------------------------------------------------------------------------
# stage runners

COLUMNS = [
    "command",
    "stage",
    "seed",
    "sweep_param",
    "sweep_value",
    "full_eval_count",
    "token_evals",
    "flops_proxy",
    "flops_ratio",
    "fallback_count",
    "final_error",
    "layout_drift",
    "per_step_error",
    "hfer_2d",
    "hfer_3d",
    "h_joint",
    "factor",
    "tokens_in",
    "tokens_out",
]


def _metrics_cells(metrics, oracle_flops: float) -> dict:
    return {
        "full_eval_count": metrics.full_eval_count,
        "token_evals": metrics.token_evals,
        "flops_proxy": metrics.flops_proxy,
        "flops_ratio": metrics.flops_proxy / oracle_flops if oracle_flops else None,
        "fallback_count": metrics.fallback_count,
        "final_error": metrics.final_error,
        "layout_drift": metrics.layout_drift,
        "per_step_error": [float(e) for e in metrics.per_step_error],
    }


def _run_ss_point(cfg: ExperimentConfig, seed: int):
    sim_cfg = replace(cfg.sim, seed=seed, dynamics="stream")
    backbone = make_backbone(sim_cfg)
    record, _ = run_ss_stage(backbone, backbone.partition, cfg.stepcache)
    oracle = run_oracle(backbone, sim_cfg.total_steps)
    metrics = compare_runs(record, oracle)
    return record, oracle, metrics


def _run_slat_point(cfg: ExperimentConfig, seed: int, link: tuple | None = None):
    sim_cfg = replace(cfg.sim, seed=seed, dynamics="residual")
    base = make_backbone(sim_cfg)
    if link is None:
        accel_backbone = oracle_backbone = base
    else:
        accel_backbone = base.with_initial_state(link[0])
        oracle_backbone = base.with_initial_state(link[1])
    record, _ = run_slat_stage(accel_backbone, cfg.carve, sim_cfg.total_steps)
    oracle = run_oracle(oracle_backbone, sim_cfg.total_steps)
    metrics = compare_runs(record, oracle)
    return record, oracle, metrics, accel_backbone


def _link_state(state: np.ndarray, token_count: int, feature_dim: int) -> np.ndarray:
    """Derive the refinement stage's starting latent from a structure state."""
    flat = np.resize(np.asarray(state, dtype=np.float64), (token_count, feature_dim))
    rms = float(np.sqrt(np.mean(flat**2)))
    if rms > 0.0:
        flat = flat / rms
    return _LINK_SCALE * flat


def _instance_from_state(backbone, state: np.ndarray):
    """Project a token field into (mask, voxels, tokens) for the decode stage."""
    norms = np.linalg.norm(state, axis=1)
    grid = np.zeros(backbone.grid_dims, dtype=np.float64)
    grid[tuple(backbone.positions.T)] = norms
    peak = grid.max()
    if peak > 0.0:
        grid = grid / peak
    silhouette = grid.max(axis=2)
    mask = (silhouette > 0.5 * silhouette.max()).astype(np.float64) if silhouette.max() > 0 else silhouette
    tokens = TokenSet(positions=backbone.positions, features=state)
    return mask, grid, tokens


def _agg_cells(cfg: ExperimentConfig, mask, voxels, tokens) -> dict:
    profile, factor, merged = analyze_and_aggregate(
        mask, voxels, tokens, cfg.agg, cfg.hfer_cutoff, cfg.weight_w
    )
    return {
        "hfer_2d": profile.hfer_2d,
        "hfer_3d": profile.hfer_3d,
        "h_joint": profile.joint,
        "factor": factor,
        "tokens_in": len(tokens),
        "tokens_out": len(merged),
    }


def _run_stage_row(cfg: ExperimentConfig, stage: str, seed: int) -> dict:
    row = {c: None for c in COLUMNS}
    row["stage"] = stage
    row["seed"] = seed
    if stage == "ss-cache":
        _, oracle, metrics = _run_ss_point(cfg, seed)
        row.update(_metrics_cells(metrics, counters_from(oracle).flops_proxy))
    elif stage == "slat-carve":
        _, oracle, metrics, _ = _run_slat_point(cfg, seed)
        row.update(_metrics_cells(metrics, counters_from(oracle).flops_proxy))
    elif stage == "mesh-agg":
        if cfg.mask_path is not None:
            mask = read_mask(cfg.mask_path)
            voxels = read_voxel_grid(cfg.voxels_path)
            tokens = tokens_from_voxels(voxels)
        else:
            mask, voxels, tokens = FIXTURES[cfg.fixture or "smooth-ellipsoid"]()
        row.update(_agg_cells(cfg, mask, voxels, tokens))
    elif stage == "end2end":
        ss_record, ss_oracle, ss_metrics = _run_ss_point(cfg, seed)
        n, f = cfg.sim.token_count, cfg.sim.feature_dim
        link = (
            _link_state(ss_record.final_state, n, f),
            _link_state(ss_oracle.final_state, n, f),
        )
        slat_record, slat_oracle, slat_metrics, slat_backbone = _run_slat_point(
            cfg, seed + _CHAIN_SEED_OFFSET, link
        )
        oracle_flops = (
            counters_from(ss_oracle).flops_proxy + counters_from(slat_oracle).flops_proxy
        )
        row.update(
            {
                "full_eval_count": ss_metrics.full_eval_count + slat_metrics.full_eval_count,
                "token_evals": ss_metrics.token_evals + slat_metrics.token_evals,
                "flops_proxy": ss_metrics.flops_proxy + slat_metrics.flops_proxy,
                "flops_ratio": (ss_metrics.flops_proxy + slat_metrics.flops_proxy)
                / oracle_flops,
                "fallback_count": ss_metrics.fallback_count + slat_metrics.fallback_count,
                "final_error": slat_metrics.final_error,
                "layout_drift": ss_metrics.layout_drift,
                "per_step_error": [float(e) for e in slat_metrics.per_step_error],
            }
        )
        mask, voxels, tokens = _instance_from_state(slat_backbone, slat_record.final_state)
        row.update(_agg_cells(cfg, mask, voxels, tokens))
    else:  # pragma: no cover - commands are validated in parse_config
        raise ConfigError(f"unknown stage: {stage}")
    return row


def _sweep_target(param: str) -> tuple[str, list[tuple[str, str]]]:
    name = param.lstrip("-").replace("_", "-")
    name = _SWEEP_ALIASES.get(name, name)
    if name not in _FLAG_TARGETS:
        known = ", ".join(sorted(_FLAG_TARGETS))
        raise ConfigError(f"unknown sweep parameter {param!r} (available: {known})")
    return name, _FLAG_TARGETS[name]


def run_experiment(cfg: ExperimentConfig) -> tuple[list[dict], Path]:
    """Execute the configured command and write its metrics file.

    Returns the rows (dicts keyed by column) and the written path. Row
    order is deterministic: sweep values in the order listed, then seeds in
    the order listed.
    """
    rows: list[dict] = []
    if cfg.command == "sweep":
        if cfg.sweep_param is None or not cfg.sweep_values:
            raise ConfigError("sweep needs --param and --values")
        if cfg.sweep_stage not in STAGES:
            raise ConfigError(f"sweep stage must be one of {STAGES}")
        name, targets = _sweep_target(cfg.sweep_param)
        for value in cfg.sweep_values:
            sections = copy.deepcopy(cfg.sections)
            for section, key in targets:
                sections[section][key] = _coerce(section, key, value)
            point = _build_config(
                cfg.command,
                sections,
                seeds=cfg.seeds,
                fixture=cfg.fixture,
                mask_path=cfg.mask_path,
                voxels_path=cfg.voxels_path,
            )
            for seed in cfg.seeds:
                row = _run_stage_row(point, cfg.sweep_stage, seed)
                row["sweep_param"] = name
                row["sweep_value"] = _coerce(
                    targets[0][0], targets[0][1], value
                )
                rows.append(row)
    else:
        for seed in cfg.seeds:
            rows.append(_run_stage_row(cfg, cfg.command, seed))

    stamp = datetime.now(timezone.utc).isoformat() if cfg.timestamp else None
    for row in rows:
        row["command"] = cfg.command
        if stamp is not None:
            row["timestamp"] = stamp

    path = _output_target(cfg)
    _write_rows(rows, path, cfg.output_format, with_timestamp=cfg.timestamp)
    return rows, path


def _output_target(cfg: ExperimentConfig) -> Path:
    if cfg.output_path:
        return Path(cfg.output_path)
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    return base / f"{cfg.command.replace('-', '_')}_metrics.{cfg.output_format}"


def _cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join(repr(float(v)) for v in value)
    return str(value)


def _write_rows(rows: list[dict], path: Path, fmt: str, with_timestamp: bool) -> None:
    columns = COLUMNS + (["timestamp"] if with_timestamp else [])
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell_text(row.get(c)) for c in columns])
        path.write_text(buf.getvalue())
    else:
        payload = [{c: row.get(c) for c in columns} for row in rows]
        path.write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# argument parsing


def _add_shared_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file with per-module sections")
    sub.add_argument("--seeds", help="comma-separated seed list (default: 0)")
    sub.add_argument("--output", help="output file path")
    sub.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    sub.add_argument(
        "--timestamp",
        action="store_const",
        const=True,
        help="append a UTC timestamp column (off by default, breaks byte-identical reruns)",
    )
    for flag in sorted(_FLAG_TARGETS):
        if flag == "refresh-freq-scores":
            sub.add_argument(f"--{flag}", action="store_const", const=True)
        else:
            sub.add_argument(f"--{flag}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepcarve",
        description="Cached-sampler experiments against exact synthetic oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "ss-cache": "run the stride-cached structure stage",
        "slat-carve": "run the carved, tangent-cached refinement stage",
        "mesh-agg": "profile an instance's spectra and aggregate its tokens",
        "end2end": "chain ss-cache, slat-carve and mesh-agg on linked state",
        "sweep": "vary one parameter over a list of values",
    }
    for command in COMMANDS:
        p = sub.add_parser(command, help=descriptions[command])
        _add_shared_flags(p)
        if command == "mesh-agg":
            p.add_argument("--fixture", help="bundled instance name")
            p.add_argument("--mask", help="CVXG mask file (Z=1)")
            p.add_argument("--voxels", help="CVXG voxel grid file")
        if command == "sweep":
            p.add_argument("--param", help="parameter to vary (flag name)")
            p.add_argument("--values", help="comma-separated values")
            p.add_argument(
                "--stage", default="end2end", help="stage to run per value (default end2end)"
            )
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    for flag in _FLAG_TARGETS:
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            overrides[flag] = value
    extras: dict = {}
    if args.seeds is not None:
        try:
            extras["seeds"] = tuple(int(s) for s in args.seeds.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --seeds value {args.seeds!r}: {exc}") from exc
    if args.output is not None:
        extras["output_path"] = args.output
    if args.format is not None:
        extras["output_format"] = args.format
    if args.timestamp:
        extras["timestamp"] = True
    if args.command == "mesh-agg":
        extras["fixture"] = args.fixture
        extras["mask_path"] = args.mask
        extras["voxels_path"] = args.voxels
    if args.command == "sweep":
        if args.param is None or args.values is None:
            raise ConfigError("sweep needs --param and --values")
        extras["sweep_param"] = args.param
        extras["sweep_values"] = tuple(args.values.split(","))
        extras["sweep_stage"] = args.stage
    return parse_config(args.command, config_file=args.config, overrides=overrides, **extras)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        rows, path = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CvxgError as exc:
        print(f"file format error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    print(f"{len(rows)} row(s) written to {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
