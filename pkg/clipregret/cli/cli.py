# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import argparse
import csv
import dataclasses
import json
import math
import sys
import typing as tp
from pathlib import Path

import numpy as np

from ..core import logger, utils
from ..core.mdp import solve
from ..diagnostics.diagnostics import bound_terms, detect_benign, interpolated_bound_terms
from ..simulator import simulator
from ..simulator.simulator import EpisodeRecord, RunConfig, RunLedger
from .config import SweepPlan, build_run_config, parse_config, parse_document

CSV_COLUMNS = (
    "episode",
    "episode_regret",
    "cum_regret",
    "optimism_ok",
    "strong_optimism_ok",
    "clip_ok_general",
    "clip_ok_alpha",
    "half_clip_ok",
    "clip_bound_general",
)


def _format(value: tp.Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool | np.bool_):
        return "1" if value else "0"
    if isinstance(value, int | np.integer):
        return str(int(value))
    return f"{float(value):.12g}"


def csv_row(record: EpisodeRecord) -> list[str]:
    values = [record.k] + [getattr(record, column) for column in CSV_COLUMNS[1:]]
    return [_format(value) for value in values]


def emit_csv(ledger: RunLedger, path: Path | str) -> Path:
    """Writes one row per episode (LF line endings, trailing newline), atomically"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with utils.temporary_save_path(path) as tmp:
        with tmp.open("w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            writer.writerows(csv_row(record) for record in ledger.records)
    return path


def _write_text(path: Path, text: str) -> None:
    with utils.temporary_save_path(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


def _config_as_dict(config: RunConfig) -> dict[str, tp.Any]:
    content = dataclasses.asdict(config)
    content["instance"] = {"kind": config.instance.kind, **config.instance.params}
    return content


def write_provenance(
    out: Path, config_text: str, overrides: tp.Sequence[str], configs: tp.Sequence[RunConfig]
) -> None:
    """Copies the configuration bytes, the overrides and the resolved values into the output directory"""
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "config.toml", config_text)
    _write_text(out / "overrides.txt", "".join(f"{o}\n" for o in overrides))
    resolved = [_config_as_dict(config) for config in configs]
    _write_text(out / "resolved_config.json", json.dumps(resolved, sort_keys=True, indent=2) + "\n")


def _summary_json(summary: tp.Mapping[str, tp.Any]) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def format_summary(ledger: RunLedger) -> str:
    s = ledger.summary
    lines = [
        f"episodes: {s['episodes']}",
        f"final cum_regret: {s['final_cum_regret']:.12g}",
        f"optimism rate: {s['optimism_rate']:.4f}",
        f"strong optimism ever violated: {s['strong_optimism_ever_violated']}",
        f"sampling event held: {s['sampling_ok']}",
        f"max clip bound (general): {s['max_clip_bound']:.12g}",
        "violations: " + ", ".join(f"{k}={v}" for k, v in s["violations"].items()),
    ]
    if s["n_at_probe"] is not None:
        lines.append(f"final count at probe {ledger.config.probe}: {s['n_at_probe']}")
    return "\n".join(lines)


def _read_config(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _single_config(parsed: RunConfig | SweepPlan, command: str) -> RunConfig:
    if isinstance(parsed, SweepPlan):
        raise utils.ConfigError("sweep", f"'{command}' runs a single configuration, use the 'sweep' subcommand")
    return parsed


def command_run(args: argparse.Namespace) -> int:
    text = _read_config(args.config)
    config = _single_config(parse_config(text, args.set), "run")
    ledger = simulator.run(config)
    out = Path(args.out)
    write_provenance(out, text, args.set, [config])
    emit_csv(ledger, out / "ledger.csv")
    _write_text(out / "summary.json", _summary_json(ledger.summary))
    print(format_summary(ledger))
    return 0


def command_sweep(args: argparse.Namespace) -> int:
    text = _read_config(args.config)
    parsed = parse_config(text, args.set)
    plan = parsed if isinstance(parsed, SweepPlan) else SweepPlan((parsed,))
    parallel = args.parallel or plan.parallel
    result = simulator.sweep(plan.configs, parallelism=parallel, checkpoints=plan.checkpoints)
    out = Path(args.out)
    write_provenance(out, text, args.set, plan.configs)
    for index, ledger in enumerate(result.ledgers):
        if ledger is not None:
            emit_csv(ledger, out / f"run_{index:04d}.csv")
    _write_text(out / "aggregate.json", result.aggregate_json())
    failed = [(index, error) for index, error in enumerate(result.errors) if error is not None]
    if failed:
        _write_text(out / "errors.txt", "".join(f"run {index}:\n{error}\n" for index, error in failed))
        print(f"{len(failed)} of {len(plan.configs)} runs failed, see {out / 'errors.txt'}")
        return 1
    print(f"{len(plan.configs)} runs completed, aggregate written to {out / 'aggregate.json'}")
    return 0


def solve_report(config: RunConfig, episodes: int, delta: float) -> dict[str, tp.Any]:
    """Oracle summary of the configured instance, with bound terms for the given K and delta"""
    mdp = config.instance.build()
    oracle = solve(mdp)
    S, A, H = mdp.shape
    assert oracle.gap is not None and oracle.alpha is not None and oracle.z_opt is not None
    benign = detect_benign(mdp, oracle)
    terms = bound_terms(oracle, episodes, delta, S, A, H, benign=benign)
    interpolated = interpolated_bound_terms(oracle, episodes, delta, S, A)
    gap_min = oracle.gap_min
    return {
        "instance": {"kind": config.instance.kind, **config.instance.params},
        "S": S,
        "A": A,
        "H": H,
        "v_star_0": oracle.initial_value(mdp),
        "gap": oracle.gap.tolist(),
        "gap_min": None if gap_min is None or math.isinf(gap_min) else gap_min,
        "degenerate": oracle.degenerate,
        "z_opt": int(oracle.z_opt.sum()),
        "z_sub": int((~oracle.z_opt).sum()),
        "var_bar": oracle.var_bar,
        "alpha_max": float(oracle.alpha.max()),
        "alpha_mean": float(oracle.alpha.mean()),
        "g_bound": oracle.g_bound,
        "eff_horizon": oracle.eff_horizon(episodes * H),
        "benign": benign,
        "bound_terms": {
            "episodes": episodes,
            "delta": delta,
            "note": "up to universal constant",
            "term_gap_sum": terms.term_gap_sum,
            "term_opt": terms.term_opt,
            "term_burnin": terms.term_burnin,
            "interpolated_gap": interpolated.term_gap,
            "interpolated_opt": interpolated.term_opt,
            "interpolated_burnin": interpolated.term_burnin,
        },
    }


def format_report(report: dict[str, tp.Any]) -> str:
    lines = [f"instance: {report['instance']}", f"S={report['S']} A={report['A']} H={report['H']}"]
    lines.append(f"V*_0: {report['v_star_0']:.12g}")
    if report["degenerate"]:
        lines.append("gap_min: degenerate (no positive gap, every action is optimal)")
    else:
        lines.append(f"gap_min: {report['gap_min']:.12g}")
    lines.append("gap table (state x action):")
    lines.extend("  " + " ".join(f"{g:.6g}" for g in row) for row in report["gap"])
    for key in ["z_opt", "z_sub", "var_bar", "alpha_max", "alpha_mean", "g_bound", "eff_horizon", "benign"]:
        lines.append(f"{key}: {report[key]}")
    bounds = report["bound_terms"]
    lines.append(f"bound terms for K={bounds['episodes']}, delta={bounds['delta']} ({bounds['note']}):")
    floats = {key: value for key, value in bounds.items() if isinstance(value, float) and key != "delta"}
    lines.extend(f"  {key}: {value:.6g}" for key, value in floats.items())
    return "\n".join(lines)


def command_solve(args: argparse.Namespace) -> int:
    text = _read_config(args.config)
    doc = parse_document(text, args.set)
    # solve only reads the instance, a sweep section is ignored
    doc.pop("sweep", None)
    config = build_run_config(doc)
    report_section = doc.get("report", {})
    episodes = report_section.get("episodes", config.episodes)
    delta = float(report_section.get("delta", config.delta))
    report = solve_report(config, episodes, delta)
    if args.json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print(format_report(report))
    return 0


def command_verify(args: argparse.Namespace) -> int:
    text = _read_config(args.config)
    config = _single_config(parse_config(text, args.set), "verify")
    ledger = simulator.run(config)
    if args.out:
        out = Path(args.out)
        write_provenance(out, text, args.set, [config])
        emit_csv(ledger, out / "ledger.csv")
        _write_text(out / "summary.json", _summary_json(ledger.summary))
    failure = ledger.first_failure()
    if failure is not None:
        episode, check = failure
        counts = ", ".join(f"{k}={v}" for k, v in ledger.summary["violations"].items() if v)
        print(f"verify FAILED: first failure at episode {episode}, check {check} ({counts})")
        return 1
    print(f"verify OK: {config.episodes} episodes, all checks passed")
    return 0


COMMANDS: dict[str, tp.Callable[[argparse.Namespace], int]] = {
    "run": command_run,
    "sweep": command_sweep,
    "solve": command_solve,
    "verify": command_verify,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clipregret", description="Tabular episodic MDP regret laboratory")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "run a single configuration and write its ledger",
        "sweep": "run a sweep of configurations and aggregate them",
        "solve": "print the oracle report of the configured instance",
        "verify": "run and exit with status 1 if any check failed",
    }
    for name, help_ in helps.items():
        sub = subparsers.add_parser(name, help=help_)
        sub.add_argument("--config", required=True, help="path to the TOML configuration")
        sub.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration value"
        )
        if name in ("run", "sweep"):
            sub.add_argument("--out", required=True, help="output directory")
        if name == "verify":
            sub.add_argument("--out", default=None, help="optional output directory")
        if name == "sweep":
            sub.add_argument("--parallel", type=int, default=None, help="number of worker processes")
        if name == "solve":
            sub.add_argument("--json", action="store_true", help="machine readable output")
    return parser


def main(argv: tp.Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except utils.ConfigError as e:
        logger.get_logger().error(f"Invalid configuration: {e}")
        print(f"configuration error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
