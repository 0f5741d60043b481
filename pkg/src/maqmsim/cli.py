"""Batch front-end: config loading, full pipeline runs, sweeps, compilation.

Reports are deterministic: all randomness flows from the config seed through
named substreams, floats are serialized at 6 significant digits, and the
report embeds the config hash so every number is traceable to its inputs.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .detect import sample_counts, tomography_settings, w_settings
from .memory import CellAddress, MemoryId, MemorySpec, memory_spec_from_dict
from .protocol import PhaseLedger, ProtocolConfig, project_w, run_protocol
from .schedule import (
    Schedule,
    ScheduleConstraints,
    compile_schedule,
    schedule_to_jsonl,
)
from .tomo import (
    bell_target,
    mle_reconstruct,
    monte_carlo_fidelity,
    monte_carlo_w_fidelity,
)
from .qstate import DensityMatrix, state_fidelity

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_experiment_config",
    "run_experiment",
    "run_sweep",
    "sweepable_paths",
    "report_to_json",
    "sweep_to_csv",
    "main",
]


class ConfigError(ValueError):
    """Config problem with a field-path or line-precise location prefix."""


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    spec1: MemorySpec
    spec2: MemorySpec
    protocol: ProtocolConfig
    constraints: ScheduleConstraints
    eta_det: float
    dark_rate: float
    heralds_per_setting: int
    n_resamples: int
    tol: float
    max_iter: int
    sha256: str


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return doc[key]


def _number(value, path: str, positive=False, non_negative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: must be a number")
    value = float(value)
    if positive and value <= 0:
        raise ConfigError(f"{path}: must be positive")
    if non_negative and value < 0:
        raise ConfigError(f"{path}: must be non-negative")
    return value


def _integer(value, path: str, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be at least {minimum}")
    return value


def _cells(doc, memory: MemoryId, path: str):
    if not isinstance(doc, list) or not doc:
        raise ConfigError(f"{path}: must be a non-empty list of [x, y] pairs")
    out = []
    for i, pair in enumerate(doc):
        if (not isinstance(pair, list) or len(pair) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) for v in pair)):
            raise ConfigError(f"{path}[{i}]: must be an [x, y] integer pair")
        out.append(CellAddress(memory, pair[0], pair[1]))
    return tuple(out)


def _memory_spec(doc, name: str, path: str) -> MemorySpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: must be an object")
    doc = dict(doc)
    doc.setdefault("memory", name)
    if doc["memory"] != name:
        raise ConfigError(f"{path}.memory: must be {name!r} to match its key")
    try:
        return memory_spec_from_dict(doc)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(f"{path}: {err}") from err


def parse_experiment_config(doc: dict, seed_override: int | None = None,
                            sha256: str = "") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    if seed_override is None and "seed" not in doc:
        raise ConfigError("seed: required field is missing (no implicit entropy)")
    seed = seed_override if seed_override is not None else _integer(doc["seed"], "seed",
                                                                   minimum=0)

    memories = _need(doc, "memories", "config")
    if not isinstance(memories, dict):
        raise ConfigError("memories: must be an object with MAQM1 and MAQM2 entries")
    spec1 = _memory_spec(_need(memories, "MAQM1", "memories"), "MAQM1", "memories.MAQM1")
    spec2 = _memory_spec(_need(memories, "MAQM2", "memories"), "MAQM2", "memories.MAQM2")

    proto = _need(doc, "protocol", "config")
    if not isinstance(proto, dict):
        raise ConfigError("protocol: must be an object")
    dim = _integer(_need(proto, "dimension", "protocol"), "protocol.dimension", minimum=2)
    source = _cells(_need(proto, "source_cells", "protocol"), MemoryId.MAQM1,
                    "protocol.source_cells")
    target = _cells(_need(proto, "target_cells", "protocol"), MemoryId.MAQM2,
                    "protocol.target_cells")
    t1 = _number(_need(proto, "t1", "protocol"), "protocol.t1", positive=True)
    tau = _number(_need(proto, "tau", "protocol"), "protocol.tau", positive=True)
    t2 = _number(_need(proto, "t2", "protocol"), "protocol.t2", non_negative=True)

    phases = proto.get("write_phases", [0.0] * dim)
    if not isinstance(phases, list) or len(phases) != dim:
        raise ConfigError("protocol.write_phases: need one number per branch")
    phases = tuple(_number(p, f"protocol.write_phases[{i}]") for i, p in enumerate(phases))

    drift = proto.get("drift", 0.0)
    if isinstance(drift, list):
        if len(drift) != dim:
            raise ConfigError("protocol.drift: need one entry per bin")
        drifts = [_number(v, f"protocol.drift[{i}]") for i, v in enumerate(drift)]
    else:
        # scalar shorthand: the first bin is the phase reference
        value = _number(drift, "protocol.drift")
        drifts = [0.0] + [value] * (dim - 1)

    order = proto.get("retrieval_order", list(range(dim)))
    if (not isinstance(order, list)
            or any(isinstance(v, bool) or not isinstance(v, int) for v in order)):
        raise ConfigError("protocol.retrieval_order: must be a list of bin indices")

    try:
        protocol = ProtocolConfig(
            dimension=dim, spec1=spec1, spec2=spec2,
            source_cells=source, target_cells=target,
            t1=t1, tau=tau, t2=t2,
            write_phases=phases,
            ledger=PhaseLedger.common([0.0] * dim, drifts=drifts),
            retrieval_order=tuple(order),
        )
    except ValueError as err:
        raise ConfigError(f"protocol: {err}") from err

    cons = doc.get("constraints", {})
    if not isinstance(cons, dict):
        raise ConfigError("constraints: must be an object")
    periods = cons.get("larmor_periods", [spec1.t_larmor, spec2.t_larmor])
    mem_times = cons.get("memory_times", [spec1.tau_mem, spec2.tau_mem])
    try:
        constraints = ScheduleConstraints(
            larmor_periods=tuple(periods),
            memory_times=tuple(mem_times),
            aod_switch_time=_number(cons.get("aod_switch_time", 2.0),
                                    "constraints.aod_switch_time", positive=True),
            min_guard=_number(cons.get("min_guard", 0.05),
                              "constraints.min_guard", positive=True),
        )
    except ValueError as err:
        raise ConfigError(f"constraints: {err}") from err

    det = doc.get("detection", {})
    if not isinstance(det, dict):
        raise ConfigError("detection: must be an object")
    eta_det = _number(det.get("eta_det", 1.0), "detection.eta_det", positive=True)
    if eta_det > 1.0:
        raise ConfigError("detection.eta_det: must be at most 1")
    dark = _number(det.get("dark_rate", 0.0), "detection.dark_rate", non_negative=True)
    heralds = _integer(det.get("heralds_per_setting", 1000),
                       "detection.heralds_per_setting", minimum=1)

    est = doc.get("estimation", {})
    if not isinstance(est, dict):
        raise ConfigError("estimation: must be an object")
    n_res = _integer(est.get("n_resamples", 100), "estimation.n_resamples", minimum=2)
    tol = _number(est.get("tol", 1e-9), "estimation.tol", positive=True)
    max_iter = _integer(est.get("max_iter", 1000), "estimation.max_iter", minimum=1)

    return ExperimentConfig(
        seed=seed, spec1=spec1, spec2=spec2, protocol=protocol,
        constraints=constraints, eta_det=eta_det, dark_rate=dark,
        heralds_per_setting=heralds, n_resamples=n_res, tol=tol,
        max_iter=max_iter, sha256=sha256,
    )


def load_experiment_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err
    sha = hashlib.sha256(raw).hexdigest()
    return parse_experiment_config(doc, seed_override=seed_override, sha256=sha)


def derive_seed(*parts: int) -> int:
    """Deterministic integer substream seed from (seed, index, ...) parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def _stage_report_qubit(outcome, cfg: ExperimentConfig,
                        stage_index: int) -> tuple[dict, DensityMatrix]:
    settings = tomography_settings(2)
    table = sample_counts(outcome, settings, cfg.heralds_per_setting,
                          cfg.eta_det, cfg.dark_rate,
                          seed=derive_seed(cfg.seed, stage_index, 0))
    target = bell_target(cfg.protocol.write_phases[1] - cfg.protocol.write_phases[0])
    est = monte_carlo_fidelity(table, target, cfg.n_resamples,
                               seed=derive_seed(cfg.seed, stage_index, 1),
                               tol=cfg.tol, max_iter=cfg.max_iter)
    rho = mle_reconstruct(table, tol=cfg.tol, max_iter=cfg.max_iter).rho
    return {
        "predicted_fidelity": outcome.predicted_fidelity,
        "survival_probability": outcome.survival_probability,
        "fidelity": est.value,
        "sigma": est.sigma,
        "n_resamples": est.n_resamples,
    }, rho


def _stage_report_qudit(outcome, cfg: ExperimentConfig, stage_index: int) -> dict:
    d = cfg.protocol.dimension
    table = sample_counts(outcome, w_settings(d), cfg.heralds_per_setting,
                          cfg.eta_det, cfg.dark_rate,
                          seed=derive_seed(cfg.seed, stage_index, 0))
    est = monte_carlo_w_fidelity(table, d, cfg.n_resamples,
                                 seed=derive_seed(cfg.seed, stage_index, 1))
    return {
        "predicted_w_fidelity": project_w(outcome).fidelity,
        "survival_probability": outcome.survival_probability,
        "w_fidelity": est.value,
        "sigma": est.sigma,
        "n_resamples": est.n_resamples,
        "warnings": list(est.warnings),
    }


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Full pipeline: compile, run both stages, measure, estimate.

    The source-only stage retrieves directly from the first memory (the
    transfer leg disabled); the transfer stage runs the whole chain.  Qubit
    runs get tomography fidelities against the Bell target plus the
    transmission fidelity between the two reconstructions; qudit runs get
    W-state fidelities for both stages.
    """
    schedule = compile_schedule(cfg.protocol, cfg.constraints)
    stage1 = run_protocol(cfg.protocol, transfer=False)
    stage2 = run_protocol(cfg.protocol, transfer=True)

    report = {
        "package_version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.sha256,
        "dimension": cfg.protocol.dimension,
        "herald_probability": stage1.herald_probability,
        "schedule": {
            "valid": schedule.valid,
            "violations": [
                {"severity": v.severity, "code": v.code, "message": v.message}
                for v in schedule.violations
            ],
        },
    }
    if cfg.protocol.dimension == 2:
        block1, rho1 = _stage_report_qubit(stage1, cfg, 1)
        block2, rho2 = _stage_report_qubit(stage2, cfg, 2)
        report["maqm1_stage"] = block1
        report["maqm2_stage"] = block2
        report["transmission_fidelity"] = state_fidelity(rho1, rho2)
    else:
        report["maqm1_stage"] = _stage_report_qudit(stage1, cfg, 1)
        report["maqm2_stage"] = _stage_report_qudit(stage2, cfg, 2)
    return report


def _round_floats(node):
    if isinstance(node, bool):
        return node
    if isinstance(node, float):
        return float(f"{node:.6g}")
    if isinstance(node, dict):
        return {k: _round_floats(v) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_round_floats(v) for v in node]
    return node


def report_to_json(report: dict) -> str:
    return json.dumps(_round_floats(report), indent=2) + "\n"


def _flatten(node, prefix=""):
    if isinstance(node, dict):
        for k, v in node.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(node, list):
        yield prefix.rstrip("."), json.dumps(_round_floats(node))
    else:
        yield prefix.rstrip("."), node


def report_to_csv(report: dict) -> str:
    lines = ["key,value"]
    for key, value in _flatten(report):
        value = _round_floats(value)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key},{value}")
    return "\n".join(lines) + "\n"


# sweepable paths: plain entries overwrite the raw config value; the two
# virtual entries expand a scalar into the structured field they stand for
_SWEEP_NUMERIC = {
    "protocol.t1", "protocol.tau", "protocol.t2", "protocol.drift",
    "detection.eta_det", "detection.dark_rate",
    "memories.MAQM1.eta_read", "memories.MAQM1.eta_write",
    "memories.MAQM1.tau_mem", "memories.MAQM1.t_larmor",
    "memories.MAQM2.eta_eit", "memories.MAQM2.tau_mem",
    "memories.MAQM2.t_larmor",
}
_SWEEP_INTEGER = {"detection.heralds_per_setting", "estimation.n_resamples"}
_SWEEP_VIRTUAL = {"memories.MAQM1.eta_read_ratio"}


def sweepable_paths() -> tuple[str, ...]:
    return tuple(sorted(_SWEEP_NUMERIC | _SWEEP_INTEGER | _SWEEP_VIRTUAL))


def _apply_sweep_value(doc: dict, path: str, value: float) -> dict:
    doc = copy.deepcopy(doc)
    if path in _SWEEP_VIRTUAL:
        return _apply_ratio(doc, value)
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: cannot descend into a non-object")
    node[keys[-1]] = int(value) if path in _SWEEP_INTEGER else value
    return doc


def _apply_ratio(doc: dict, ratio: float) -> dict:
    """Scale the read efficiency of every non-reference branch by ``ratio``."""
    mem = doc.get("memories", {}).get("MAQM1", {})
    base = mem.get("eta_read")
    if not isinstance(base, (int, float)) or isinstance(base, bool):
        raise ConfigError("memories.MAQM1.eta_read_ratio: requires a scalar eta_read")
    n_x = mem.get("n_x", 0)
    n_y = mem.get("n_y", 0)
    cells = doc.get("protocol", {}).get("source_cells", [])
    if not cells or not n_x or not n_y:
        raise ConfigError("memories.MAQM1.eta_read_ratio: config lacks cells to scale")
    values = [float(base)] * (n_x * n_y)
    for x, y in cells[1:]:
        values[y * n_x + x] = float(base) * ratio
    mem["eta_read"] = values
    return doc


_SWEEP_COLUMNS = [
    "param", "value", "seed", "dimension", "schedule_valid", "herald_probability",
    "maqm1_fidelity", "maqm1_sigma", "maqm2_fidelity", "maqm2_sigma",
    "transmission_fidelity",
    "maqm1_w_fidelity", "maqm1_w_sigma", "maqm2_w_fidelity", "maqm2_w_sigma",
]


def run_sweep(doc: dict, param: str, values, base_seed: int | None = None) -> list[dict]:
    """One pipeline run per value; row i runs with seed derived from (seed, i)."""
    if param not in (_SWEEP_NUMERIC | _SWEEP_INTEGER | _SWEEP_VIRTUAL):
        raise ConfigError(f"{param}: not a sweepable parameter "
                          f"(choose from {', '.join(sweepable_paths())})")
    if base_seed is None:
        if "seed" not in doc:
            raise ConfigError("seed: required field is missing (no implicit entropy)")
        base_seed = doc["seed"]
    rows = []
    for i, value in enumerate(values):
        varied = _apply_sweep_value(doc, param, value)
        cfg = parse_experiment_config(varied, seed_override=derive_seed(base_seed, i))
        report = run_experiment(cfg)
        row = {
            "param": param,
            "value": value,
            "seed": report["seed"],
            "dimension": report["dimension"],
            "schedule_valid": report["schedule"]["valid"],
            "herald_probability": report["herald_probability"],
        }
        if report["dimension"] == 2:
            row["maqm1_fidelity"] = report["maqm1_stage"]["fidelity"]
            row["maqm1_sigma"] = report["maqm1_stage"]["sigma"]
            row["maqm2_fidelity"] = report["maqm2_stage"]["fidelity"]
            row["maqm2_sigma"] = report["maqm2_stage"]["sigma"]
            row["transmission_fidelity"] = report["transmission_fidelity"]
        else:
            row["maqm1_w_fidelity"] = report["maqm1_stage"]["w_fidelity"]
            row["maqm1_w_sigma"] = report["maqm1_stage"]["sigma"]
            row["maqm2_w_fidelity"] = report["maqm2_stage"]["w_fidelity"]
            row["maqm2_w_sigma"] = report["maqm2_stage"]["sigma"]
        rows.append(row)
    return rows


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{float(f'{value:.6g}'):g}"
    return str(value)


def sweep_to_csv(rows: list[dict]) -> str:
    lines = [",".join(_SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(col)) for col in _SWEEP_COLUMNS))
    return "\n".join(lines) + "\n"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    cfg = load_experiment_config(args.config, seed_override=args.seed)
    report = run_experiment(cfg)
    text = report_to_csv(report) if args.format == "csv" else report_to_json(report)
    _emit(text, args.out)
    return 0


def _cmd_compile(args) -> int:
    cfg = load_experiment_config(args.config, seed_override=args.seed)
    schedule = compile_schedule(cfg.protocol, cfg.constraints)
    _emit(schedule_to_jsonl(schedule), args.out)
    for v in schedule.violations:
        print(f"{v.severity}: {v.code}: {v.message}", file=sys.stderr)
    return 0 if schedule.valid else 1


def _cmd_sweep(args) -> int:
    with open(args.config, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{args.config}:{err.lineno}:{err.colno}: {err.msg}") from err
    values = [float(v) for v in args.values.split(",")] if args.values else []
    rows = run_sweep(doc, args.param, values, base_seed=args.seed)
    if args.format == "json":
        text = json.dumps(_round_floats(rows), indent=2) + "\n"
    else:
        text = sweep_to_csv(rows)
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maqmsim",
        description="Simulate entanglement transfer between multiplexed memories "
                    "and compile control schedules.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--format", choices=("json", "csv"), default=None)

    p_run = sub.add_parser("run", help="run the full pipeline and emit a report")
    common(p_run)
    p_compile = sub.add_parser("compile", help="compile the control schedule")
    common(p_compile)
    p_sweep = sub.add_parser("sweep", help="rerun the pipeline over parameter values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="parameter path, e.g. protocol.drift")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated numeric values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "sweep" else "json"
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compile":
            return _cmd_compile(args)
        return _cmd_sweep(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
