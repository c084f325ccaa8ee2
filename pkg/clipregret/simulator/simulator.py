# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import dataclasses
import json
import typing as tp

from typing_extensions import TypedDict

from ..core import logger
from ..core.core import Executor
from ..core.mdp import evaluate_policy, occupancy, solve
from ..core.utils import ConfigError, make_rng
from ..diagnostics.diagnostics import DiagnosticSet, EpisodeDiagnostics, IdealizedCounts, diagnose
from ..instances.instances import InstanceSpec
from ..learner.learner import (
    LFACTOR_VARIANTS,
    LearnerState,
    OptimisticPlan,
    plan_strong_euler,
    plan_ucbvi_ch,
    rollout_and_update,
)
from ..local.debug import DebugExecutor
from ..local.local import LocalExecutor

CHECKS = (
    "optimism",
    "strong_optimism",
    "gap_identity",
    "decomposition_identity",
    "occupancy_normalization",
    "clip_general",
    "clip_alpha",
    "half_clip",
    "sampling",
)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    instance: InstanceSpec
    episodes: int
    algo: str = "strong_euler"
    delta: float = 0.1
    seed: int = 0
    run_index: int = 0
    lfactor_variant: str = "appendix_c"
    diagnostics: DiagnosticSet = DiagnosticSet()
    probe: tuple[int, int] | None = None
    ucb_episodes: int | None = None
    require_optimism: bool = True

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ConfigError("episodes", f"must be at least 1, got {self.episodes}")
        if not 0 < self.delta < 0.5:
            raise ConfigError("delta", f"must lie in (0, 1/2), got {self.delta}")
        if self.algo not in PLANNERS:
            raise ConfigError("algo", f"unknown algorithm {self.algo!r}, expected one of {sorted(PLANNERS)}")
        if self.lfactor_variant not in LFACTOR_VARIANTS:
            raise ConfigError("lfactor_variant", f"expected one of {LFACTOR_VARIANTS}, got {self.lfactor_variant!r}")

    def label(self) -> str:
        """Identifies the configuration up to its seed and run index"""
        content = {
            "instance": {"kind": self.instance.kind, **self.instance.params},
            "episodes": self.episodes,
            "algo": self.algo,
            "delta": self.delta,
            "lfactor_variant": self.lfactor_variant,
            "probe": self.probe,
            "ucb_episodes": self.ucb_episodes,
        }
        return json.dumps(content, sort_keys=True)


@dataclasses.dataclass(frozen=True)
class EpisodeRecord:
    """One episode of a run. Diagnostic fields are None on episodes that were not diagnosed."""

    k: int
    episode_regret: float
    cum_regret: float
    optimism_ok: bool | None = None
    strong_optimism_ok: bool | None = None
    clip_ok_general: bool | None = None
    clip_ok_alpha: bool | None = None
    half_clip_ok: bool | None = None
    clip_bound_general: float | None = None
    clip_bound_alpha: float | None = None
    half_clip_value: float | None = None
    v_up_0: float | None = None
    gap_residual: float | None = None
    decomposition_residual: float | None = None
    occupancy_residual: float | None = None
    sampling_ok: bool | None = None
    surplus_ratio_max: float | None = None
    n_at_probe: int | None = None
    failures: tuple[str, ...] = ()


class RunSummary(TypedDict):
    episodes: int
    final_cum_regret: float
    violations: dict[str, int]
    first_failure: tuple[int, str] | None
    max_clip_bound: float
    sampling_ok: bool
    optimism_rate: float
    strong_optimism_ever_violated: bool
    n_at_probe: int | None
    surplus_ratio_max_first_half: float | None
    surplus_ratio_max_second_half: float | None


@dataclasses.dataclass(frozen=True)
class RunLedger:
    config: RunConfig
    records: tuple[EpisodeRecord, ...]
    summary: RunSummary

    def cum_regret_at(self, episode: int) -> float:
        return self.records[min(episode, len(self.records)) - 1].cum_regret

    def first_failure(self) -> tuple[int, str] | None:
        return self.summary["first_failure"]


def _plan_strong_euler(state: LearnerState, config: RunConfig) -> OptimisticPlan:
    return plan_strong_euler(state)


def _plan_ucbvi_ch(state: LearnerState, config: RunConfig) -> OptimisticPlan:
    return plan_ucbvi_ch(state, config.ucb_episodes or config.episodes)


PLANNERS: dict[str, tp.Callable[[LearnerState, RunConfig], OptimisticPlan]] = {
    "strong_euler": _plan_strong_euler,
    "ucbvi_ch": _plan_ucbvi_ch,
}


def _record_failures(diag: EpisodeDiagnostics, require_optimism: bool) -> tuple[str, ...]:
    failed = diag.failures()
    if require_optimism and not diag.optimism_ok:
        failed.insert(0, "optimism")
    return tuple(failed)


def run(config: RunConfig) -> RunLedger:
    """Plays config.episodes episodes, computing the exact regret of every played policy.

    Each episode plans from the statistics of previous episodes only, diagnoses the plan
    against the oracle, then rolls it out and updates the statistics.
    """
    log = logger.get_logger()
    mdp = config.instance.build()
    oracle = solve(mdp)
    v_star_0 = oracle.initial_value(mdp)
    state = LearnerState.for_mdp(mdp, config.delta, config.lfactor_variant)
    rng = make_rng(config.seed, config.run_index)
    counts = IdealizedCounts(mdp.num_states, mdp.num_actions)
    planner = PLANNERS[config.algo]
    log.info(
        f"Starting {config.algo} run on {config.instance.kind} {mdp.shape} "
        f"for {config.episodes} episodes (seed={config.seed}, run_index={config.run_index})"
    )
    records = []
    cum_regret = 0.0
    for k in range(1, config.episodes + 1):
        plan = planner(state, config)
        policy_value = evaluate_policy(mdp, plan.policy)
        regret = v_star_0 - policy_value.initial
        cum_regret += regret
        occ = occupancy(mdp, plan.policy)
        nbar = counts.update(occ)
        fields: dict[str, tp.Any] = {}
        if config.diagnostics.due(k):
            diag = diagnose(mdp, oracle, plan, state, policy_value, occ, nbar, config.diagnostics)
            fields = {
                "optimism_ok": diag.optimism_ok,
                "strong_optimism_ok": diag.strong_optimism_ok,
                "v_up_0": diag.v_up_0,
                "gap_residual": diag.gap_residual,
                "decomposition_residual": diag.decomposition_residual,
                "occupancy_residual": diag.occupancy_residual,
                "sampling_ok": diag.sampling_ok,
                "surplus_ratio_max": diag.surplus_ratio_max,
                "failures": _record_failures(diag, config.require_optimism),
            }
            if diag.clip_general is not None and diag.clip_alpha is not None:
                fields.update(
                    clip_ok_general=diag.clip_general.ok,
                    clip_ok_alpha=diag.clip_alpha.ok,
                    clip_bound_general=diag.clip_general.bound,
                    clip_bound_alpha=diag.clip_alpha.bound,
                )
            if diag.half_clip is not None:
                fields.update(half_clip_ok=diag.half_clip.ok, half_clip_value=diag.half_clip.value)
        if config.probe is not None:
            fields["n_at_probe"] = int(state.n[config.probe])
        records.append(EpisodeRecord(k=k, episode_regret=regret, cum_regret=cum_regret, **fields))
        log.debug(f"Episode {k}: regret={regret:.6g} cum_regret={cum_regret:.6g}")
        rollout_and_update(state, mdp, plan, rng)
    summary = summarize(records, int(state.n[config.probe]) if config.probe is not None else None)
    log.info(f"Finished run: cum_regret={summary['final_cum_regret']:.6g}, violations={summary['violations']}")
    return RunLedger(config, tuple(records), summary)


def _max_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return max(present) if present else None


def summarize(records: tp.Sequence[EpisodeRecord], n_at_probe: int | None = None) -> RunSummary:
    """Summary of a run; n_at_probe is the final count at the probe, after the last rollout"""
    violations = dict.fromkeys(CHECKS, 0)
    first_failure = None
    for record in records:
        for check in record.failures:
            violations[check] += 1
            if first_failure is None:
                first_failure = (record.k, check)
        violations["strong_optimism"] += record.strong_optimism_ok is False
        violations["sampling"] += record.sampling_ok is False
        if "optimism" not in record.failures:
            violations["optimism"] += record.optimism_ok is False
    diagnosed = [r for r in records if r.optimism_ok is not None]
    half = len(records) // 2
    return RunSummary(
        episodes=len(records),
        final_cum_regret=records[-1].cum_regret if records else 0.0,
        violations=violations,
        first_failure=first_failure,
        max_clip_bound=max((r.clip_bound_general or 0.0 for r in records), default=0.0),
        sampling_ok=violations["sampling"] == 0,
        optimism_rate=sum(bool(r.optimism_ok) for r in diagnosed) / len(diagnosed) if diagnosed else 1.0,
        strong_optimism_ever_violated=violations["strong_optimism"] > 0,
        n_at_probe=n_at_probe,
        surplus_ratio_max_first_half=_max_or_none([r.surplus_ratio_max for r in records[:half]]),
        surplus_ratio_max_second_half=_max_or_none([r.surplus_ratio_max for r in records[half:]]),
    )


@dataclasses.dataclass(frozen=True)
class SweepResult:
    """Ledgers and errors in config order, and the aggregate keyed by config label"""

    configs: tuple[RunConfig, ...]
    ledgers: tuple[RunLedger | None, ...]
    errors: tuple[str | None, ...]
    aggregate: dict[str, tp.Any]

    def aggregate_json(self) -> str:
        return json.dumps(self.aggregate, sort_keys=True, indent=2) + "\n"


def default_checkpoints(episodes: int) -> list[int]:
    return sorted({max(1, episodes * q // 4) for q in range(1, 5)})


def aggregate_ledgers(
    configs: tp.Sequence[RunConfig],
    ledgers: tp.Sequence[RunLedger | None],
    checkpoints: tp.Sequence[int] | None = None,
) -> dict[str, tp.Any]:
    """Pure fold over the ledgers, grouped by config label (seeds and run indices pooled)"""
    groups: dict[str, list[int]] = {}
    for index, config in enumerate(configs):
        groups.setdefault(config.label(), []).append(index)
    aggregate: dict[str, tp.Any] = {}
    for label, indices in groups.items():
        done = [ledgers[i] for i in indices if ledgers[i] is not None]
        episodes = configs[indices[0]].episodes
        points = [k for k in (checkpoints or default_checkpoints(episodes)) if 1 <= k <= episodes]
        entry: dict[str, tp.Any] = {"runs": len(indices), "failed_runs": len(indices) - len(done)}
        if done:
            curves = {}
            for k in points:
                values = [ledger.cum_regret_at(k) for ledger in done]  # type: ignore
                curves[str(k)] = {"mean": sum(values) / len(values), "max": max(values)}
            entry["cum_regret"] = curves
            entry["violation_rates"] = {
                check: sum(ledger.summary["violations"][check] > 0 for ledger in done) / len(done)  # type: ignore
                for check in CHECKS
            }
            entry["optimism_rate"] = sum(ledger.summary["optimism_rate"] for ledger in done) / len(done)  # type: ignore
            probes = [ledger.summary["n_at_probe"] for ledger in done]  # type: ignore
            if all(p is not None for p in probes):
                entry["mean_n_at_probe"] = sum(probes) / len(probes)  # type: ignore
        aggregate[label] = entry
    return aggregate


def make_executor(parallelism: int) -> Executor:
    if parallelism <= 1:
        return DebugExecutor()
    return LocalExecutor(max_workers=parallelism)


def sweep(
    configs: tp.Sequence[RunConfig], parallelism: int = 1, checkpoints: tp.Sequence[int] | None = None
) -> SweepResult:
    """Runs every config, possibly in parallel worker processes.

    Results are collected in config order, so neither ledgers nor aggregate depend on the
    completion order or the parallelism level. A failing run leaves a None ledger and an error
    message, its siblings still complete.
    """
    if not configs:
        raise ValueError("sweep needs at least one configuration")
    log = logger.get_logger()
    executor = make_executor(parallelism)
    jobs = executor.map_array(run, configs)
    ledgers: list[RunLedger | None] = []
    errors: list[str | None] = []
    for index, job in enumerate(jobs):
        error = job.exception()
        if error is None:
            ledgers.append(job.result())
            errors.append(None)
        else:
            log.error(f"Run {index} ({configs[index].label()}, seed={configs[index].seed}) failed in {job!r}:\n{error}")
            ledgers.append(None)
            errors.append(str(error))
    aggregate = aggregate_ledgers(configs, ledgers, checkpoints)
    return SweepResult(tuple(configs), tuple(ledgers), tuple(errors), aggregate)
