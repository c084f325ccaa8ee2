# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

"""Per-episode checks of optimistic learners against the exact oracle.

Diagnostics read the true model; learners never do. Violations are returned as flags
and never raised.
"""

import dataclasses
import math
import typing as tp

import numpy as np

from ..core import logger
from ..core.mdp import (
    Occupancy,
    OracleTables,
    PolicyValue,
    TabularMDP,
    clip,
    clipped_gaps,
    compute_variances,
    evaluate_policy,
    is_contextual_bandit,
)
from ..learner.learner import LearnerState, OptimisticPlan

TOL = 1e-9
CLIP_MODES = ("general", "alpha")


def surpluses(mdp: TabularMDP, plan: OptimisticPlan) -> np.ndarray:
    """E(h, x, a) = Q̄(h, x, a) - r(x, a) - p(x, a) · V̄(h + 1), with the true r and p"""
    next_values = np.einsum("xay,hy->hxa", mdp.trans, plan.v_up[1:])
    return plan.q_up - mdp.r[None] - next_values


def optimism_holds(oracle: OracleTables, plan: OptimisticPlan) -> bool:
    return bool(np.all(plan.q_up >= oracle.q_star - TOL))


def strong_optimism_holds(surplus: np.ndarray) -> bool:
    return bool(np.all(surplus >= -TOL))


class ClipCheck(tp.NamedTuple):
    """Clipped decomposition verdict.

    ``holds`` is the raw inequality, ``applicable`` tells whether its precondition was met.
    """

    mode: str
    bound: float
    holds: bool
    applicable: bool

    @property
    def ok(self) -> bool:
        return self.holds or not self.applicable


def clip_thresholds(oracle: OracleTables, mode: str) -> np.ndarray:
    """gap_min / 2H ∨ gap_h / 4H in general mode, gap_h / 4(Hα ∨ 1) in alpha mode"""
    if mode == "general":
        return clipped_gaps(oracle)
    if mode == "alpha":
        oracle.require("alpha")
        return clipped_gaps(oracle, oracle.alpha)
    raise ValueError(f"Unknown clipping mode {mode!r}, expected one of {CLIP_MODES}")


def check_clipped_decomposition(
    oracle: OracleTables,
    omega: np.ndarray,
    surplus: np.ndarray,
    regret: float,
    mode: str,
    optimistic: bool,
    strongly_optimistic: bool = False,
) -> ClipCheck:
    """regret <= 2e Σ ω clip(ǧap, E).

    General mode needs optimism, alpha mode additionally needs all surpluses nonnegative.
    The bound is computed even when the precondition fails.
    """
    thresholds = clip_thresholds(oracle, mode)
    bound = 2 * math.e * float(np.sum(omega * clip(thresholds, surplus)))
    applicable = optimistic and (mode == "general" or strongly_optimistic)
    return ClipCheck(mode, bound, regret <= bound + TOL, applicable)


class HalfClipCheck(tp.NamedTuple):
    value: float
    holds: bool
    applicable: bool

    @property
    def ok(self) -> bool:
        return self.holds or not self.applicable


def half_clipped_check(
    mdp: TabularMDP,
    oracle: OracleTables,
    plan: OptimisticPlan,
    surplus: np.ndarray,
    policy_value: PolicyValue,
    regret: float,
    optimistic: bool,
) -> HalfClipCheck:
    """Value of the plan's policy with rewards r + clip(gap_min / 2H, E) against the regret.

    The half-clipped value must exceed V^π_0 by at least half the regret under optimism.
    """
    oracle.require("eps_clip")
    half_clipped = clip(oracle.eps_clip, surplus)
    value = evaluate_policy(mdp, plan.policy, extra_reward=half_clipped).initial
    holds = value - policy_value.initial >= 0.5 * regret - TOL
    return HalfClipCheck(value, holds, optimistic)


def sampling_threshold(num_states: int, num_actions: int, horizon: int, delta: float) -> float:
    """H_sample = 4H log(2HSA / delta)"""
    return 4 * horizon * math.log(2 * horizon * num_states * num_actions / delta)


def sampling_check(n: np.ndarray, nbar: np.ndarray, h_sample: float) -> bool:
    """n >= nbar / 4 on every pair whose idealized count reached h_sample"""
    mature = nbar >= h_sample
    return bool(np.all(n[mature] >= nbar[mature] / 4))


class IdealizedCounts:
    """Running sum of the occupancy measures of the played policies"""

    def __init__(self, num_states: int, num_actions: int) -> None:
        self.nbar = np.zeros((num_states, num_actions))
        self.episodes = 0

    def update(self, occupancy: Occupancy) -> np.ndarray:
        self.nbar = self.nbar + occupancy.total
        self.episodes += 1
        return self.nbar


def track_idealized_counts(occupancies: tp.Iterable[Occupancy], num_states: int, num_actions: int) -> np.ndarray:
    counts = IdealizedCounts(num_states, num_actions)
    for occ in occupancies:
        counts.update(occ)
    return counts.nbar


class BoundTerms(tp.NamedTuple):
    """Regret bound terms, up to universal constant"""

    term_gap_sum: float
    term_opt: float
    term_burnin: float
    degenerate: bool
    benign: str | None

    @property
    def total(self) -> float:
        return self.term_gap_sum + self.term_opt + self.term_burnin


BENIGN_KINDS = ("contextual_bandit", "g_bounded")


def detect_benign(mdp: TabularMDP, oracle: OracleTables) -> str | None:
    if is_contextual_bandit(mdp):
        return "contextual_bandit"
    if oracle.g_bound is not None and oracle.g_bound <= 1 + TOL:
        return "g_bounded"
    return None


def bound_terms(
    oracle: OracleTables,
    episodes: int,
    delta: float,
    num_states: int,
    num_actions: int,
    horizon: int,
    benign: str | None = None,
) -> BoundTerms:
    """Gap-dependent regret bound terms with M = (SAH)² and T = KH.

    term_gap_sum = Σ_{Z_sub} c_sub / gap · log(MT/δ), term_opt = c_opt |Z_opt| / gap_min · log(MT/δ),
    term_burnin = H⁴SA(S ∨ H) log(MH / gap_min) log(MT/δ), where c_sub = c_opt = H³ in general,
    c_sub = 1, c_opt = H for contextual bandits and c_sub = c_opt = H for rewards bounded by 1 per
    trajectory. A degenerate oracle (no positive gap) has no regret and gets zero terms.
    """
    if benign is not None and benign not in BENIGN_KINDS:
        raise ValueError(f"Unknown benign kind {benign!r}, expected one of {BENIGN_KINDS}")
    oracle.require("gap", "gap_min", "z_opt", "z_sub")
    assert oracle.gap is not None and oracle.gap_min is not None
    if oracle.degenerate:
        return BoundTerms(0.0, 0.0, 0.0, True, benign)
    S, A, H = num_states, num_actions, horizon
    M = float(S * A * H) ** 2
    T = episodes * H
    log_mt = math.log(M * T / delta)
    c_sub, c_opt = {None: (H**3, H**3), "contextual_bandit": (1, H), "g_bounded": (H, H)}[benign]
    sub_gaps = oracle.gap[oracle.z_sub]
    term_gap_sum = float(np.sum(c_sub / sub_gaps)) * log_mt
    term_opt = c_opt * int(np.sum(oracle.z_opt)) / oracle.gap_min * log_mt
    term_burnin = H**4 * S * A * max(S, H) * math.log(M * H / oracle.gap_min) * log_mt
    return BoundTerms(term_gap_sum, term_opt, term_burnin, False, benign)


class InterpolatedBound(tp.NamedTuple):
    """Gap-interpolating form of the regret bound, up to universal constant"""

    term_gap: float
    term_opt: float
    term_burnin: float
    best_eps: float

    @property
    def total(self) -> float:
        return self.term_gap + self.term_opt + self.term_burnin


def interpolated_bound_terms(
    oracle: OracleTables, episodes: int, delta: float, num_states: int, num_actions: int
) -> InterpolatedBound:
    """Bound that trades the gap sum against a sqrt(T) term.

    term_gap = min over eps of sqrt(H |Z_sub(eps)| T log T log(MT/δ)) + Σ_{gap >= eps} H³/gap log(M/(δ gap)),
    where Z_sub(eps) holds the suboptimal pairs with gap < eps. The optimal-pair term and the
    burn-in term take the smaller of their gap-dependent and gap-free forms.
    """
    oracle.require("gap", "gap_min", "z_opt", "z_sub")
    assert oracle.gap is not None and oracle.gap_min is not None
    H = oracle.horizon
    S, A = num_states, num_actions
    M = float(S * A * H) ** 2
    T = episodes * H
    log_t = math.log(max(T, 2))
    log_mt = math.log(M * T / delta)
    gaps = np.sort(oracle.gap[oracle.z_sub])
    per_gap = H**3 / gaps * np.log(M / (delta * gaps))
    # suffix sums: candidates eps = gaps[i] keep gaps[i:] in the sum, eps = inf keeps none
    tails = np.concatenate([np.cumsum(per_gap[::-1])[::-1], [0.0]])
    below = np.arange(gaps.size + 1)
    candidates = np.sqrt(H * below * T * log_t * log_mt) + tails
    best = int(np.argmin(candidates))
    best_eps = float(gaps[best]) if best < gaps.size else math.inf
    num_opt = int(np.sum(oracle.z_opt))
    gap_free_opt = math.sqrt(H * num_opt * T * log_t * log_mt)
    if oracle.degenerate:
        return InterpolatedBound(float(candidates[best]), gap_free_opt, 0.0, best_eps)
    gap_min = oracle.gap_min
    term_opt = min(gap_free_opt, num_opt * H**3 / gap_min * math.log(M / (delta * gap_min)))
    burnin = H**4 * S * A * max(S, H) * min(
        math.log(M / gap_min) * math.log(M / min(gap_min, delta)), math.log(T * M / delta) ** 2
    )
    return InterpolatedBound(float(candidates[best]), term_opt, burnin, best_eps)


class SurplusReport(tp.NamedTuple):
    ratio: np.ndarray  # (H, S, A)
    lead: np.ndarray  # (H, S, A)
    future: np.ndarray  # (H, S, A)

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max())


def surplus_bound_report(
    mdp: TabularMDP, state: LearnerState, oracle: OracleTables, plan: OptimisticPlan, surplus: np.ndarray
) -> SurplusReport:
    """Ratio of each surplus to B_lead + E^π[Σ_{t >= h} B_fut | (x_h, a_h) = (x, a)].

    B_lead = H ∧ sqrt(Var_k log(Mn/δ) / n) with Var_k = min(Var*, Var^π), and
    B_fut = H³ ∧ H³ (sqrt(S log(Mn/δ) / n) + S log(Mn/δ) / n)², M = SAH. Unvisited pairs take
    the caps. The future sum is accumulated backward along the plan's policy with the true kernel.
    """
    S, A, H = mdp.shape
    var_k = compute_variances(mdp, oracle, plan.policy).var_k
    assert var_k is not None
    n = state.n.astype(np.float64)
    n_eff = np.maximum(n, 1.0)
    log_term = np.log(S * A * H * n_eff / state.delta)
    visited = n > 0
    lead = np.where(visited[None], np.minimum(H, np.sqrt(var_k * log_term / n_eff)), float(H))
    spread = np.sqrt(S * log_term / n_eff) + S * log_term / n_eff
    fut_pair = np.where(visited, np.minimum(H**3, H**3 * spread**2), float(H**3))
    future = np.zeros((H, S, A))
    states = np.arange(S)
    following = np.zeros(S)
    for h in reversed(range(H)):
        future[h] = fut_pair + mdp.trans @ following
        following = future[h][states, plan.policy.actions[h]]
    ratio = surplus / (lead + future)
    return SurplusReport(ratio, lead, future)


@dataclasses.dataclass(frozen=True)
class DiagnosticSet:
    """Which per-episode diagnostics to compute, and how often"""

    every: int = 1
    clip: bool = True
    half_clip: bool = True
    sampling: bool = True
    surplus_report: bool = False

    def __post_init__(self) -> None:
        if self.every < 1:
            raise ValueError(f"Diagnostics frequency must be at least 1, got {self.every}")

    def due(self, episode: int) -> bool:
        """Episodes are 1-based, the first one is always diagnosed"""
        return (episode - 1) % self.every == 0


@dataclasses.dataclass(frozen=True)
class EpisodeDiagnostics:
    surplus: np.ndarray
    optimism_ok: bool
    strong_optimism_ok: bool
    v_up_0: float
    regret_exact: float
    clip_general: ClipCheck | None
    clip_alpha: ClipCheck | None
    half_clip: HalfClipCheck | None
    gap_residual: float
    decomposition_residual: float
    occupancy_residual: float
    sampling_ok: bool | None
    surplus_ratio_max: float | None

    def failures(self) -> list[str]:
        """Names of the exact identities and conditional checks that failed"""
        failed = []
        if self.gap_residual > TOL:
            failed.append("gap_identity")
        if self.decomposition_residual > TOL:
            failed.append("decomposition_identity")
        if self.occupancy_residual > TOL:
            failed.append("occupancy_normalization")
        checks: dict[str, ClipCheck | HalfClipCheck | None] = {
            "clip_general": self.clip_general,
            "clip_alpha": self.clip_alpha,
            "half_clip": self.half_clip,
        }
        for name, check in checks.items():
            if check is not None and not check.ok:
                failed.append(name)
        return failed


def diagnose(
    mdp: TabularMDP,
    oracle: OracleTables,
    plan: OptimisticPlan,
    state: LearnerState,
    policy_value: PolicyValue,
    occ: Occupancy,
    nbar: np.ndarray,
    checks: DiagnosticSet,
) -> EpisodeDiagnostics:
    """Runs every enabled diagnostic on one episode's plan, before its rollout"""
    v_star_0 = oracle.initial_value(mdp)
    regret = v_star_0 - policy_value.initial
    surplus = surpluses(mdp, plan)
    optimistic = optimism_holds(oracle, plan)
    strong = strong_optimism_holds(surplus)
    v_up_0 = plan.v_up_0(mdp.p0)
    assert oracle.gap_h is not None
    gap_residual = abs(float(np.sum(occ.per_stage * oracle.gap_h)) - regret)
    decomposition_residual = abs(float(np.sum(occ.per_stage * surplus)) - (v_up_0 - policy_value.initial))
    occupancy_residual = float(np.max(np.abs(occ.per_stage.sum(axis=(1, 2)) - 1.0)))
    clip_general = clip_alpha = None
    if checks.clip:
        clip_general = check_clipped_decomposition(oracle, occ.per_stage, surplus, regret, "general", optimistic)
        clip_alpha = check_clipped_decomposition(oracle, occ.per_stage, surplus, regret, "alpha", optimistic, strong)
    half = None
    if checks.half_clip:
        half = half_clipped_check(mdp, oracle, plan, surplus, policy_value, regret, optimistic)
    sampling_ok = None
    if checks.sampling:
        S, A, H = mdp.shape
        sampling_ok = sampling_check(state.n, nbar, sampling_threshold(S, A, H, state.delta))
    ratio = None
    if checks.surplus_report and optimistic:
        ratio = surplus_bound_report(mdp, state, oracle, plan, surplus).max_ratio
    diagnostics = EpisodeDiagnostics(
        surplus=surplus,
        optimism_ok=optimistic,
        strong_optimism_ok=strong,
        v_up_0=v_up_0,
        regret_exact=regret,
        clip_general=clip_general,
        clip_alpha=clip_alpha,
        half_clip=half,
        gap_residual=gap_residual,
        decomposition_residual=decomposition_residual,
        occupancy_residual=occupancy_residual,
        sampling_ok=sampling_ok,
        surplus_ratio_max=ratio,
    )
    logger.check_failures(
        state.k + 1,
        diagnostics.failures(),
        regret=regret,
        gap_residual=gap_residual,
        decomposition_residual=decomposition_residual,
    )
    return diagnostics
