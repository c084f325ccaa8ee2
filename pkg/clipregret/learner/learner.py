# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

"""Optimistic learners operating only on observed data.

The planners never see the true model: they read a LearnerState, and only
rollout_and_update touches the environment (to sample a trajectory).
"""

import dataclasses
import math
import typing as tp

import numpy as np

from ..core.mdp import Policy, TabularMDP

LFactorVariant = tp.Literal["appendix_c", "appendix_a_table"]
LFACTOR_VARIANTS = ("appendix_c", "appendix_a_table")


@dataclasses.dataclass
class LearnerState:
    """Sufficient statistics of an optimistic learner, owned by a single run.

    ``k`` counts completed episodes, so the episode being planned is ``k + 1``.
    """

    num_states: int
    num_actions: int
    horizon: int
    delta: float
    lfactor_variant: str = "appendix_c"
    k: int = 0
    n: np.ndarray = dataclasses.field(init=False)
    n_next: np.ndarray = dataclasses.field(init=False)
    rsum: np.ndarray = dataclasses.field(init=False)
    rsumsq: np.ndarray = dataclasses.field(init=False)
    p_hat: np.ndarray = dataclasses.field(init=False)
    r_hat: np.ndarray = dataclasses.field(init=False)
    var_hat: np.ndarray = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.lfactor_variant not in LFACTOR_VARIANTS:
            raise ValueError(f"Unknown lfactor variant {self.lfactor_variant!r}, expected one of {LFACTOR_VARIANTS}")
        S, A = self.num_states, self.num_actions
        self.n = np.zeros((S, A), dtype=np.int64)
        self.n_next = np.zeros((S, A, S), dtype=np.int64)
        self.rsum = np.zeros((S, A))
        self.rsumsq = np.zeros((S, A))
        self.p_hat = np.zeros((S, A, S))
        self.r_hat = np.zeros((S, A))
        self.var_hat = np.zeros((S, A))

    @classmethod
    def for_mdp(cls, mdp: TabularMDP, delta: float, lfactor_variant: str = "appendix_c") -> "LearnerState":
        """Empty statistics sized for an MDP (only its dimensions are read)"""
        S, A, H = mdp.shape
        return cls(S, A, H, delta, lfactor_variant)

    def log_factor(self, u: tp.Any) -> tp.Any:
        return log_factor(u, self.num_states, self.num_actions, self.horizon, self.delta, self.lfactor_variant)

    def refresh(self, pairs: tp.Iterable[tuple[int, int]] | None = None) -> None:
        """Recomputes the empirical tables from the raw counts (all pairs by default)"""
        if pairs is None:
            index: tp.Any = (slice(None), slice(None))
        else:
            xs, as_ = zip(*pairs, strict=True)
            index = (np.array(xs), np.array(as_))
        n = self.n[index]
        safe = np.maximum(n, 1)
        visited = n > 0
        self.r_hat[index] = np.where(visited, self.rsum[index] / safe, 0.0)
        self.p_hat[index] = np.where(visited[..., None], self.n_next[index] / safe[..., None], 0.0)
        second = np.where(visited, self.rsumsq[index] / safe, 0.0)
        self.var_hat[index] = np.maximum(second - self.r_hat[index] ** 2, 0.0)


def log_factor(
    u: tp.Any, num_states: int, num_actions: int, horizon: int, delta: float, variant: str = "appendix_c"
) -> tp.Any:
    """L(u) = sqrt(2 log(10 M² max(u, 1) / delta)) with M = SAH.

    The ``appendix_a_table`` variant squares max(u, 1) inside the logarithm.
    Works elementwise on arrays of counts.
    """
    M = num_states * num_actions * horizon
    floor = np.maximum(u, 1)
    if variant == "appendix_a_table":
        floor = floor**2
    elif variant != "appendix_c":
        raise ValueError(f"Unknown lfactor variant {variant!r}")
    return np.sqrt(2.0 * np.log(10.0 * M**2 * floor / delta))


class Bonuses(tp.NamedTuple):
    rew: np.ndarray
    prob: np.ndarray
    strong: np.ndarray


def bonus_tables(state: LearnerState, v_up_next: np.ndarray, v_low_next: np.ndarray) -> Bonuses:
    """Reward, transition and correction bonuses for every (x, a) at one stage.

    Pairs with fewer than two visits get the capped values 1 and H for the first two
    bonuses; the correction bonus uses one visit when there is none.
    """
    S, H = state.num_states, state.horizon
    n = state.n
    n_eff = np.maximum(n, 1).astype(np.float64)
    n_minus = np.maximum(n - 1, 1).astype(np.float64)
    L = state.log_factor(n)
    var_next = np.maximum(state.p_hat @ v_up_next**2 - (state.p_hat @ v_up_next) ** 2, 0.0)
    width_sq = state.p_hat @ (v_up_next - v_low_next) ** 2
    rew = np.minimum(1.0, np.sqrt(2 * state.var_hat * L / n_eff) + 8 * L / (3 * n_minus))
    prob = np.minimum(
        H,
        np.sqrt(2 * var_next * L / n_eff) + 8 * H * L / (3 * n_minus) + np.sqrt(2 * L * width_sq / n_eff),
    )
    scarce = n <= 1
    rew = np.where(scarce, 1.0, rew)
    prob = np.where(scarce, float(H), prob)
    strength = np.sqrt(width_sq) * np.sqrt(S * L / n_eff) + 8 / 3 * S * H * L / n_eff
    return Bonuses(rew, prob, strength)


def construct_bonuses(
    state: LearnerState, x: int, a: int, h: int, v_up_next: np.ndarray, v_low_next: np.ndarray
) -> tuple[float, float, float]:
    """Bonuses (b_rew, b_prob, b_str) of a single (x, a) at stage h.

    The stage only enters through the next-stage value vectors.
    """
    del h
    tables = bonus_tables(state, np.asarray(v_up_next, dtype=np.float64), np.asarray(v_low_next, dtype=np.float64))
    return float(tables.rew[x, a]), float(tables.prob[x, a]), float(tables.strong[x, a])


@dataclasses.dataclass(frozen=True)
class OptimisticPlan:
    """One episode's optimistic tables.

    ``bonuses[h, x, a]`` holds (b_rew, b_prob, b_str); the UCBVI-CH planner stores its single
    bonus in the b_prob slot.
    """

    q_up: np.ndarray
    v_up: np.ndarray
    v_low: np.ndarray
    policy: Policy
    bonuses: np.ndarray

    def v_up_0(self, p0: np.ndarray) -> float:
        return float(p0 @ self.v_up[0])

    def shifted(self, offset: float) -> "OptimisticPlan":
        """Same plan with ``offset`` added to the optimistic Q table (fault injection)"""
        return dataclasses.replace(self, q_up=self.q_up + offset)


def _greedy_backup(
    q_up: np.ndarray, v_up: np.ndarray, actions: np.ndarray, h: int, candidates: np.ndarray
) -> None:
    cap = q_up.shape[0] - h
    q_up[h] = np.minimum(cap, candidates)
    actions[h] = np.argmax(q_up[h], axis=-1)
    v_up[h] = q_up[h][np.arange(q_up.shape[1]), actions[h]]


def plan_strong_euler(state: LearnerState) -> OptimisticPlan:
    """Backward induction with the three bonuses.

    Q̄_h = min(H - h + 1, r̂ + p̂ V̄_{h+1} + b_rew + b_prob + b_str), V̄_h = Q̄_h at the greedy
    action, and V̲_h = max(0, r̂ - b_rew + p̂ V̲_{h+1} - b_prob - b_str) at the same action.
    """
    S, A, H = state.num_states, state.num_actions, state.horizon
    q_up = np.zeros((H, S, A))
    v_up = np.zeros((H + 1, S))
    v_low = np.zeros((H + 1, S))
    actions = np.zeros((H, S), dtype=np.int64)
    bonuses = np.zeros((H, S, A, 3))
    states = np.arange(S)
    for h in reversed(range(H)):
        b = bonus_tables(state, v_up[h + 1], v_low[h + 1])
        bonuses[h] = np.stack(b, axis=-1)
        total = b.rew + b.prob + b.strong
        _greedy_backup(q_up, v_up, actions, h, state.r_hat + state.p_hat @ v_up[h + 1] + total)
        lower = state.r_hat + state.p_hat @ v_low[h + 1] - total
        v_low[h] = np.maximum(0.0, lower[states, actions[h]])
    return OptimisticPlan(q_up, v_up, v_low, Policy(actions), bonuses)


def ucbvi_bonus(n: tp.Any, num_states: int, num_actions: int, horizon: int, episodes: int, delta: float) -> tp.Any:
    """sqrt(H log(SAHK / delta) / n), with leading constant 1 and +inf at n = 0"""
    log_term = math.log(num_states * num_actions * horizon * episodes / delta)
    n = np.asarray(n, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.sqrt(horizon * log_term / n)


def plan_ucbvi_ch(state: LearnerState, episodes: int) -> OptimisticPlan:
    """Same induction with a single Hoeffding bonus; the lower value is 0"""
    S, A, H = state.num_states, state.num_actions, state.horizon
    q_up = np.zeros((H, S, A))
    v_up = np.zeros((H + 1, S))
    actions = np.zeros((H, S), dtype=np.int64)
    bonus = np.minimum(ucbvi_bonus(state.n, S, A, H, episodes, state.delta), float(H))
    bonuses = np.zeros((H, S, A, 3))
    bonuses[..., 1] = bonus
    for h in reversed(range(H)):
        _greedy_backup(q_up, v_up, actions, h, state.r_hat + state.p_hat @ v_up[h + 1] + bonus)
    return OptimisticPlan(q_up, v_up, np.zeros((H + 1, S)), Policy(actions), bonuses)


def forced_exploration_policy(num_states: int, num_actions: int, horizon: int, episode: int) -> Policy:
    """Round-robin policy cycling through actions across episodes, stages and states"""
    h, x = np.meshgrid(np.arange(horizon), np.arange(num_states), indexing="ij")
    return Policy((episode + h + x) % num_actions)


class Step(tp.NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    index = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    return min(index, probs.size - 1)


def rollout_and_update(
    state: LearnerState, mdp: TabularMDP, plan: OptimisticPlan | Policy, rng: np.random.Generator
) -> list[Step]:
    """Plays one episode with the plan's policy and folds the observations into the statistics.

    Draw order: initial state, then for every stage the reward followed by the next state.
    """
    policy = plan.policy if isinstance(plan, OptimisticPlan) else plan
    x = _sample_index(mdp.p0, rng)
    trajectory = []
    for h in range(mdp.horizon):
        a = policy(h, x)
        reward = float(mdp.rewards[x][a].sample(rng))
        x_next = _sample_index(mdp.trans[x, a], rng)
        trajectory.append(Step(x, a, reward, x_next))
        state.n[x, a] += 1
        state.n_next[x, a, x_next] += 1
        state.rsum[x, a] += reward
        state.rsumsq[x, a] += reward**2
        x = x_next
    state.refresh({(step.state, step.action) for step in trajectory})
    state.k += 1
    return trajectory
