# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

"""Exact representation of stationary episodic MDPs and the dynamic-programming oracle.

Stages are 0-based in every array: stage index ``h`` in ``[0, H)`` is stage ``h + 1`` in
the usual 1-based notation, and value tables carry an extra row ``H`` fixed at zero.
Shapes: values ``(H + 1, S)``, Q tables and per-stage tables ``(H, S, A)``, transitions
``(S, A, S)``.
"""

import dataclasses
import itertools
import math
import typing as tp

import numpy as np

from .utils import InstanceTooLargeError, InvalidInstanceError

SIMPLEX_TOL = 1e-12
TIE_TOL = 1e-9
MAX_BRUTE_FORCE_POLICIES = 10**7

RewardKind = tp.Literal["deterministic", "bernoulli", "two_point"]


def _frozen(array: tp.Any, dtype: tp.Any = np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclasses.dataclass(frozen=True)
class RewardModel:
    """Two-point reward law: ``hi`` with probability ``p_hi``, ``lo`` otherwise.

    Deterministic and Bernoulli rewards are the special cases built by the classmethods.
    """

    kind: RewardKind
    lo: float
    hi: float
    p_hi: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise InvalidInstanceError(f"Reward support [{self.lo}, {self.hi}] is not contained in [0, 1]")
        if not 0.0 <= self.p_hi <= 1.0:
            raise InvalidInstanceError(f"Reward probability {self.p_hi} is not in [0, 1]")

    @classmethod
    def deterministic(cls, value: float) -> "RewardModel":
        return cls("deterministic", float(value), float(value), 1.0)

    @classmethod
    def bernoulli(cls, p: float) -> "RewardModel":
        return cls("bernoulli", 0.0, 1.0, float(p))

    @classmethod
    def two_point(cls, lo: float, hi: float, p_hi: float) -> "RewardModel":
        return cls("two_point", float(lo), float(hi), float(p_hi))

    @property
    def mean(self) -> float:
        return self.lo + (self.hi - self.lo) * self.p_hi

    @property
    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 * self.p_hi * (1.0 - self.p_hi)

    @property
    def support_max(self) -> float:
        return self.hi if self.p_hi > 0 else self.lo

    def sample(self, rng: np.random.Generator, size: int | None = None) -> tp.Any:
        return self.lo + (self.hi - self.lo) * (rng.random(size) < self.p_hi)


@dataclasses.dataclass(frozen=True)
class TabularMDP:
    """Stationary episodic MDP with a full generative model.

    Parameters
    ----------
    horizon: int
        number of stages H per episode
    p0: array (S,)
        initial state distribution
    trans: array (S, A, S)
        transition kernel, ``trans[x, a]`` is the next state distribution
    rewards: nested sequence (S, A) of RewardModel
        reward law of each state-action pair
    """

    horizon: int
    p0: np.ndarray
    trans: np.ndarray
    rewards: tuple[tuple[RewardModel, ...], ...]
    r: np.ndarray = dataclasses.field(init=False, repr=False, compare=False)
    r_var: np.ndarray = dataclasses.field(init=False, repr=False, compare=False)
    r_max: np.ndarray = dataclasses.field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise InvalidInstanceError(f"Horizon must be at least 1, got {self.horizon}")
        p0 = _frozen(self.p0)
        trans = _frozen(self.trans)
        rewards = tuple(tuple(row) for row in self.rewards)
        if p0.ndim != 1 or not p0.size:
            raise InvalidInstanceError(f"p0 must be a non-empty vector, got shape {p0.shape}")
        num_states = p0.size
        if trans.ndim != 3 or trans.shape[0] != num_states or trans.shape[2] != num_states:
            raise InvalidInstanceError(f"trans must have shape (S, A, S) with S={num_states}, got {trans.shape}")
        if not trans.shape[1]:
            raise InvalidInstanceError("At least one action is required")
        if len(rewards) != num_states or any(len(row) != trans.shape[1] for row in rewards):
            raise InvalidInstanceError("rewards must be a (S, A) table of RewardModel")
        _check_simplex(p0, "p0")
        _check_simplex(trans, "trans")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "rewards", rewards)
        for name, attr in [("r", "mean"), ("r_var", "variance"), ("r_max", "support_max")]:
            table = [[getattr(model, attr) for model in row] for row in rewards]
            object.__setattr__(self, name, _frozen(table))

    @property
    def num_states(self) -> int:
        return self.p0.size

    @property
    def num_actions(self) -> int:
        return self.trans.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        """(S, A, H)"""
        return self.num_states, self.num_actions, self.horizon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TabularMDP):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.p0, other.p0)
            and np.array_equal(self.trans, other.trans)
            and self.rewards == other.rewards
        )

    __hash__ = None  # type: ignore


def _check_simplex(probs: np.ndarray, name: str) -> None:
    if np.any(probs < 0) or np.any(probs > 1):
        raise InvalidInstanceError(f"{name} has entries outside [0, 1]")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
        raise InvalidInstanceError(f"{name} rows do not sum to 1 (max deviation {np.abs(sums - 1).max():.3g})")


@dataclasses.dataclass(frozen=True)
class Policy:
    """Deterministic nonstationary policy, ``actions[h, x]`` is the action at stage h in state x."""

    actions: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.actions)
        if not np.issubdtype(raw.dtype, np.integer):
            raise InvalidInstanceError(f"Policy actions must be integers, got dtype {raw.dtype}")
        actions = _frozen(raw, dtype=np.int64)
        if actions.ndim != 2:
            raise InvalidInstanceError(f"Policy actions must have shape (H, S), got {actions.shape}")
        if np.any(actions < 0):
            raise InvalidInstanceError("Policy actions must be nonnegative")
        object.__setattr__(self, "actions", actions)

    @classmethod
    def greedy(cls, q: np.ndarray) -> "Policy":
        """Argmax of a (H, S, A) table, ties broken by lowest action index"""
        return cls(np.argmax(q, axis=-1))

    @classmethod
    def constant(cls, horizon: int, num_states: int, action: int = 0) -> "Policy":
        return cls(np.full((horizon, num_states), action, dtype=np.int64))

    def __call__(self, h: int, x: int) -> int:
        return int(self.actions[h, x])

    def check(self, mdp: TabularMDP) -> None:
        if self.actions.shape != (mdp.horizon, mdp.num_states):
            raise InvalidInstanceError(
                f"Policy shape {self.actions.shape} does not match (H, S) = {(mdp.horizon, mdp.num_states)}"
            )
        if np.any(self.actions >= mdp.num_actions):
            raise InvalidInstanceError(f"Policy plays actions outside [0, {mdp.num_actions})")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.actions, other.actions)

    __hash__ = None  # type: ignore


@dataclasses.dataclass(frozen=True)
class OracleTables:
    """Exact oracle quantities of an MDP.

    Only ``v_star``, ``q_star`` and ``opt_mask`` are set by value_iteration; the other
    fields are filled by compute_gaps, compute_alpha, compute_variances and compute_g_bound
    (see ``solve``).
    """

    horizon: int
    v_star: np.ndarray
    q_star: np.ndarray
    opt_mask: np.ndarray
    gap_h: np.ndarray | None = None
    gap: np.ndarray | None = None
    gap_min: float | None = None
    degenerate: bool = False
    z_opt: np.ndarray | None = None
    z_sub: np.ndarray | None = None
    gap_clipped: np.ndarray | None = None
    eps_clip: float | None = None
    alpha: np.ndarray | None = None
    var_star: np.ndarray | None = None
    var_star_max: np.ndarray | None = None
    var_bar: float | None = None
    var_policy: np.ndarray | None = None
    var_k: np.ndarray | None = None
    g_bound: float | None = None

    def initial_value(self, mdp: TabularMDP) -> float:
        return float(mdp.p0 @ self.v_star[0])

    def opt_actions(self, h: int, x: int) -> set[int]:
        return {int(a) for a in np.flatnonzero(self.opt_mask[h, x])}

    def eff_horizon(self, num_steps: int) -> float:
        """min(var_bar, G² log(T) / H) for T = num_steps"""
        if self.var_bar is None or self.g_bound is None:
            raise RuntimeError("Variances and g_bound must be computed first (see solve)")
        return min(self.var_bar, self.g_bound**2 * math.log(num_steps) / self.horizon)

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise RuntimeError(f"Oracle fields {missing} are not computed yet (see solve)")


class PolicyValue(tp.NamedTuple):
    values: np.ndarray  # (H + 1, S)
    initial: float


class Occupancy(tp.NamedTuple):
    per_stage: np.ndarray  # (H, S, A)
    total: np.ndarray  # (S, A)


def _optimal_mask(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return q >= v[..., None] - TIE_TOL * np.maximum(1.0, np.abs(v[..., None]))


def value_iteration(mdp: TabularMDP) -> OracleTables:
    S, A, H = mdp.shape
    v = np.zeros((H + 1, S))
    q = np.zeros((H, S, A))
    for h in reversed(range(H)):
        q[h] = mdp.r + mdp.trans @ v[h + 1]
        v[h] = q[h].max(axis=-1)
    opt_mask = _frozen(_optimal_mask(q, v[:H]), bool)
    return OracleTables(horizon=H, v_star=_frozen(v), q_star=_frozen(q), opt_mask=opt_mask)


def _stage_tables(mdp: TabularMDP, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Per stage reward (H, S) and transition matrix (H, S, S) under the policy"""
    states = np.arange(mdp.num_states)
    rewards = mdp.r[states, policy.actions]
    kernels = mdp.trans[states, policy.actions]
    return rewards, kernels


def evaluate_policy(mdp: TabularMDP, policy: Policy, extra_reward: np.ndarray | None = None) -> PolicyValue:
    """Exact value of a policy by backward recursion.

    Parameters
    ----------
    mdp: TabularMDP
        the model
    policy: Policy
        deterministic nonstationary policy
    extra_reward: array (H, S, A), optional
        added to the mean reward at each stage (used for half-clipped values)

    Returns
    -------
    PolicyValue
        value table of shape (H + 1, S) and the initial value p0 · V_1
    """
    policy.check(mdp)
    rewards, kernels = _stage_tables(mdp, policy)
    if extra_reward is not None:
        states = np.arange(mdp.num_states)
        rewards = rewards + extra_reward[np.arange(mdp.horizon)[:, None], states, policy.actions]
    values = np.zeros((mdp.horizon + 1, mdp.num_states))
    for h in reversed(range(mdp.horizon)):
        values[h] = rewards[h] + kernels[h] @ values[h + 1]
    return PolicyValue(values, float(mdp.p0 @ values[0]))


def occupancy(mdp: TabularMDP, policy: Policy) -> Occupancy:
    policy.check(mdp)
    S, A, H = mdp.shape
    _, kernels = _stage_tables(mdp, policy)
    omega = np.zeros((H, S, A))
    dist = mdp.p0.copy()
    states = np.arange(S)
    for h in range(H):
        omega[h, states, policy.actions[h]] = dist
        dist = dist @ kernels[h]
    return Occupancy(omega, omega.sum(axis=0))


def clipped_gaps(oracle: OracleTables, alpha: np.ndarray | None = None) -> np.ndarray:
    """max(gap_min / 2H, gap_h / (4 max(H alpha, 1))); alpha None means alpha = 1 everywhere"""
    oracle.require("gap_h", "eps_clip")
    assert oracle.gap_h is not None and oracle.eps_clip is not None
    H = oracle.horizon
    scale = float(H) if alpha is None else np.maximum(H * alpha, 1.0)
    return np.maximum(oracle.eps_clip, oracle.gap_h / (4.0 * scale))


def compute_gaps(oracle: OracleTables) -> OracleTables:
    """Fills gap_h, gap, gap_min, z_opt, z_sub, eps_clip and gap_clipped.

    gap_clipped uses the oracle's alpha table when present, else alpha = 1.
    When no positive gap exists, gap_min is +inf, eps_clip is 0 and the degenerate flag is set.
    """
    H = oracle.horizon
    gap_h = np.where(oracle.opt_mask, 0.0, np.maximum(oracle.v_star[:H, :, None] - oracle.q_star, 0.0))
    positive = gap_h[~oracle.opt_mask]
    positive = positive[positive > 0]
    degenerate = not positive.size
    gap_min = math.inf if degenerate else float(positive.min())
    gap = gap_h.min(axis=0)
    z_opt = oracle.opt_mask.any(axis=0)
    partial = dataclasses.replace(
        oracle,
        gap_h=_frozen(gap_h),
        gap=_frozen(gap),
        gap_min=gap_min,
        degenerate=degenerate,
        z_opt=_frozen(z_opt, bool),
        z_sub=_frozen(~z_opt, bool),
        eps_clip=0.0 if degenerate else gap_min / (2 * H),
    )
    return dataclasses.replace(partial, gap_clipped=_frozen(clipped_gaps(partial, oracle.alpha)))


def _next_variance(trans: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Var_{x' ~ trans[x, a]}[values(x')] for every (x, a)"""
    mean = trans @ values
    return np.maximum(trans @ values**2 - mean**2, 0.0)


def compute_variances(mdp: TabularMDP, oracle: OracleTables, policy: Policy | None = None) -> OracleTables:
    """Var*_{h,x,a} = Var[R(x,a)] + Var_{p(x,a)}[V*_{h+1}], and its maximum over stages / triples.

    If a policy is given, also fills var_policy (same formula with V^pi) and
    var_k = min(var_star, var_policy).
    """
    H = mdp.horizon
    var_star = np.stack([mdp.r_var + _next_variance(mdp.trans, oracle.v_star[h + 1]) for h in range(H)])
    var_star_max = var_star.max(axis=0)
    updates: dict[str, tp.Any] = {
        "var_star": _frozen(var_star),
        "var_star_max": _frozen(var_star_max),
        "var_bar": float(var_star_max.max()),
    }
    if policy is not None:
        values = evaluate_policy(mdp, policy).values
        var_policy = np.stack([mdp.r_var + _next_variance(mdp.trans, values[h + 1]) for h in range(H)])
        updates["var_policy"] = _frozen(var_policy)
        updates["var_k"] = _frozen(np.minimum(var_star, var_policy))
    return dataclasses.replace(oracle, **updates)


def transition_ratios(mdp: TabularMDP) -> np.ndarray:
    """ratios[x, a, b] = max over x' in supp p(x, a) of max(0, 1 - p(x'|x,b) / p(x'|x,a))"""
    pa = mdp.trans[:, :, None, :]
    pb = mdp.trans[:, None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pa > 0, 1.0 - pb / np.where(pa > 0, pa, 1.0), -np.inf)
    return np.maximum(terms.max(axis=-1), 0.0)


def compute_alpha(mdp: TabularMDP, oracle: OracleTables) -> OracleTables:
    ratios = transition_ratios(mdp)
    # min over optimal actions b of ratios[x, a, b], per stage
    candidates = np.where(oracle.opt_mask[:, :, None, :], ratios[None], np.inf)
    alpha = np.clip(candidates.min(axis=-1), 0.0, 1.0)
    return dataclasses.replace(oracle, alpha=_frozen(alpha))


def compute_g_bound(mdp: TabularMDP, oracle: OracleTables) -> OracleTables:
    """Largest cumulative reward any feasible trajectory can collect"""
    reachable = mdp.trans > 0
    best = np.zeros(mdp.num_states)
    for _ in range(mdp.horizon):
        future = np.where(reachable, best[None, None, :], -np.inf).max(axis=-1)
        best = (mdp.r_max + future).max(axis=-1)
    g_bound = float(best[mdp.p0 > 0].max())
    return dataclasses.replace(oracle, g_bound=g_bound)


def solve(mdp: TabularMDP, policy: Policy | None = None) -> OracleTables:
    """All oracle tables of an MDP"""
    oracle = value_iteration(mdp)
    oracle = compute_alpha(mdp, oracle)
    oracle = compute_gaps(oracle)
    oracle = compute_variances(mdp, oracle, policy)
    return compute_g_bound(mdp, oracle)


def clip(eps: tp.Any, x: tp.Any) -> tp.Any:
    """clip_eps(x) = x if x >= eps else 0, elementwise for arrays (thresholds broadcast)"""
    if np.any(np.asarray(eps) < 0):
        raise ValueError(f"Clipping threshold must be nonnegative, got {eps}")
    if np.isscalar(x) and np.isscalar(eps):
        return x if x >= eps else 0.0
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= eps, x, 0.0)


def clip_distribution_check(eps: float, values: tp.Sequence[float]) -> bool:
    """clip(eps, sum a_i) <= 2 sum clip(eps / 2m, a_i) for nonnegative a_1..a_m"""
    values = np.asarray(values, dtype=np.float64)
    m = values.size
    if not m:
        return True
    lhs = clip(eps, float(values.sum()))
    rhs = 2.0 * float(clip(eps / (2 * m), values).sum())
    return bool(lhs <= rhs + TIE_TOL)


def is_contextual_bandit(mdp: TabularMDP) -> bool:
    return bool(np.all(np.abs(mdp.trans - mdp.trans[0, 0]) <= SIMPLEX_TOL))


def brute_force_optimal(mdp: TabularMDP) -> tuple[float, Policy]:
    """Exhaustive search over deterministic nonstationary policies.

    Raises
    ------
    InstanceTooLargeError
        if A^(S·H) exceeds MAX_BRUTE_FORCE_POLICIES
    """
    S, A, H = mdp.shape
    if A ** (S * H) > MAX_BRUTE_FORCE_POLICIES:
        raise InstanceTooLargeError(
            f"{A}^({S}*{H}) policies exceed the enumeration budget of {MAX_BRUTE_FORCE_POLICIES}"
        )
    best_value = -math.inf
    best_policy: Policy | None = None
    for choice in itertools.product(range(A), repeat=S * H):
        policy = Policy(np.reshape(choice, (H, S)))
        value = evaluate_policy(mdp, policy).initial
        if value > best_value:
            best_value, best_policy = value, policy
    assert best_policy is not None
    return best_value, best_policy
