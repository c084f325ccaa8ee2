# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import dataclasses
import typing as tp

import numpy as np

from ..core.mdp import RewardModel, TabularMDP
from ..core.utils import InvalidInstanceError, make_instance_rng

InstanceKind = tp.Literal["info_lb", "mingap_lb", "contextual_bandit", "random", "chain"]


def _info_lb_gaps(num_states: int, num_actions: int, horizon: int, gap: tp.Any) -> np.ndarray:
    """Normalizes the gap parameter to a (S, A) matrix.

    A scalar means action 0 is optimal everywhere and every other action has that gap.
    """
    if np.isscalar(gap):
        if num_actions > 1 and not 0 < float(gap) < horizon / 8:  # type: ignore
            raise InvalidInstanceError(f"gap must lie in (0, H/8) = (0, {horizon / 8}), got {gap}")
        gaps = np.full((num_states, num_actions), float(gap))  # type: ignore
        gaps[:, 0] = 0.0
    else:
        gaps = np.array(gap, dtype=np.float64)
        if gaps.shape != (num_states, num_actions):
            raise InvalidInstanceError(f"gap matrix must have shape {(num_states, num_actions)}, got {gaps.shape}")
    if np.any(gaps.min(axis=1) != 0):
        raise InvalidInstanceError("Every state needs an optimal action with zero gap")
    positive = gaps[gaps != 0]
    if np.any(positive <= 0) or np.any(positive >= horizon / 8):
        raise InvalidInstanceError(f"gaps must lie in (0, H/8) = (0, {horizon / 8})")
    return gaps


def make_info_lb(num_states: int, num_actions: int, horizon: int, gap: tp.Any) -> TabularMDP:
    """Two-outcome lower-bound instance.

    States ``0..S-1`` start the episode uniformly; every action moves to the good absorbing
    state ``S`` with probability ``3/4 - 2 gap / (H - 1)`` and to the bad absorbing state
    ``S + 1`` otherwise. In the absorbing states, action 0 pays 1 (good) or 1/2 (bad) at every
    remaining step and the other actions pay 0. The gap at stage 1 of ``(x, a)`` is ``gap[x, a]``.

    With ``H = 1`` the game is a contextual bandit over ``S`` states with
    Bernoulli(3/4 - gap) rewards.
    """
    if num_states < 1 or num_actions < 1 or horizon < 1:
        raise InvalidInstanceError("S, A and H must be positive")
    gaps = _info_lb_gaps(num_states, num_actions, horizon, gap)
    if horizon == 1:
        trans = np.broadcast_to(np.eye(num_states)[:, None, :], (num_states, num_actions, num_states))
        rewards = [[RewardModel.bernoulli(3 / 4 - g) for g in row] for row in gaps]
        return TabularMDP(1, np.full(num_states, 1 / num_states), trans, rewards)  # type: ignore
    good, bad = num_states, num_states + 1
    total = num_states + 2
    p0 = np.zeros(total)
    p0[:num_states] = 1 / num_states
    trans = np.zeros((total, num_actions, total))
    p_good = 3 / 4 - 2 * gaps / (horizon - 1)
    trans[:num_states, :, good] = p_good
    trans[:num_states, :, bad] = 1 - p_good
    trans[good, :, good] = 1.0
    trans[bad, :, bad] = 1.0
    zero = RewardModel.deterministic(0.0)
    rewards = [[zero] * num_actions for _ in range(total)]
    rewards[good] = [RewardModel.deterministic(1.0)] + [zero] * (num_actions - 1)
    rewards[bad] = [RewardModel.deterministic(0.5)] + [zero] * (num_actions - 1)
    return TabularMDP(horizon, p0, trans, rewards)  # type: ignore


def center_state(num_side_states: int) -> int:
    """Index of the starting state of the min-gap game"""
    return num_side_states


def make_mingap_lb(num_side_states: int, eps: float) -> TabularMDP:
    """Two-stage signed-state game where a single triple has a small gap.

    States ``-S..S`` are stored at indices ``0..2S``, the center (start) at index ``S``.
    Action index 0 is "-1" and index 1 is "+1". From the center, "+1" moves uniformly to a
    positive state and "-1" to a negative one; other states loop on themselves. Playing "+1"
    outside the center pays ``1/2 + D/4 + eps`` on positive states and ``1/2 + D/4`` on negative
    ones, with D a Rademacher variable. Every other reward is 0.
    """
    if num_side_states < 1:
        raise InvalidInstanceError(f"S must be positive, got {num_side_states}")
    if not 0 < eps < 1 / 8:
        raise InvalidInstanceError(f"eps must lie in (0, 1/8), got {eps}")
    S = num_side_states
    total = 2 * S + 1
    center = center_state(S)
    trans = np.zeros((total, 2, total))
    for x in range(total):
        trans[x, :, x] = 1.0
    trans[center] = 0.0
    trans[center, 0, :S] = 1 / S
    trans[center, 1, S + 1 :] = 1 / S
    zero = RewardModel.deterministic(0.0)
    rewards = [[zero, zero] for _ in range(total)]
    for x in range(S):
        rewards[x][1] = RewardModel.two_point(1 / 4, 3 / 4, 1 / 2)
        rewards[S + 1 + x][1] = RewardModel.two_point(1 / 4 + eps, 3 / 4 + eps, 1 / 2)
    p0 = np.zeros(total)
    p0[center] = 1.0
    return TabularMDP(2, p0, trans, rewards)  # type: ignore


def make_contextual_bandit(
    num_states: int,
    num_actions: int,
    horizon: int,
    means: tp.Any,
    next_dist: tp.Any | None = None,
) -> TabularMDP:
    """MDP whose next state ignores the current state and action.

    Rewards are Bernoulli with the given means, contexts (including the first one) are
    drawn from ``next_dist`` (uniform by default).
    """
    means = np.array(means, dtype=np.float64)
    if means.shape != (num_states, num_actions):
        raise InvalidInstanceError(f"means must have shape {(num_states, num_actions)}, got {means.shape}")
    if next_dist is None:
        next_dist = np.full(num_states, 1 / num_states)
    next_dist = np.array(next_dist, dtype=np.float64)
    if next_dist.shape != (num_states,):
        raise InvalidInstanceError(f"next_dist must have length {num_states}")
    trans = np.broadcast_to(next_dist, (num_states, num_actions, num_states))
    rewards = [[RewardModel.bernoulli(m) for m in row] for row in means]
    return TabularMDP(horizon, next_dist, trans, rewards)  # type: ignore


def make_random(
    num_states: int, num_actions: int, horizon: int, seed: int = 0, concentration: float = 1.0
) -> TabularMDP:
    """Seeded random MDP: Dirichlet transitions, uniform reward means, Bernoulli rewards"""
    if min(num_states, num_actions, horizon) < 1:
        raise InvalidInstanceError("S, A and H must be positive")
    if concentration <= 0:
        raise InvalidInstanceError(f"concentration must be positive, got {concentration}")
    rng = make_instance_rng(seed)
    alphas = np.full(num_states, float(concentration))
    trans = rng.dirichlet(alphas, size=(num_states, num_actions))
    # renormalize, dirichlet rows may be off by a few ulps
    trans /= trans.sum(axis=-1, keepdims=True)
    means = rng.random((num_states, num_actions))
    p0 = rng.dirichlet(np.ones(num_states))
    p0 /= p0.sum()
    rewards = [[RewardModel.bernoulli(m) for m in row] for row in means]
    return TabularMDP(horizon, p0, trans, rewards)  # type: ignore


def make_chain(num_states: int, num_actions: int, horizon: int) -> TabularMDP:
    """Deterministic chain starting at state 0.

    Action 0 moves one step right (staying at the end) and pays ``(x + 1) / S``; any other
    action resets to state 0 and pays half of that. With a single action the optimal policy
    is forced.
    """
    if min(num_states, num_actions, horizon) < 1:
        raise InvalidInstanceError("S, A and H must be positive")
    trans = np.zeros((num_states, num_actions, num_states))
    rewards = []
    for x in range(num_states):
        trans[x, 0, min(x + 1, num_states - 1)] = 1.0
        trans[x, 1:, 0] = 1.0
        pay = (x + 1) / num_states
        rewards.append([RewardModel.deterministic(pay)] + [RewardModel.deterministic(pay / 2)] * (num_actions - 1))
    p0 = np.zeros(num_states)
    p0[0] = 1.0
    return TabularMDP(horizon, p0, trans, rewards)  # type: ignore


_BUILDERS: dict[str, tp.Callable[..., TabularMDP]] = {
    "info_lb": make_info_lb,
    "mingap_lb": make_mingap_lb,
    "contextual_bandit": make_contextual_bandit,
    "random": make_random,
    "chain": make_chain,
}

# configuration key -> constructor argument
_PARAMETERS: dict[str, dict[str, str]] = {
    "info_lb": {"S": "num_states", "A": "num_actions", "H": "horizon", "gap": "gap"},
    "mingap_lb": {"S": "num_side_states", "eps": "eps"},
    "contextual_bandit": {
        "S": "num_states",
        "A": "num_actions",
        "H": "horizon",
        "means": "means",
        "next_dist": "next_dist",
    },
    "random": {"S": "num_states", "A": "num_actions", "H": "horizon", "seed": "seed", "concentration": "concentration"},
    "chain": {"S": "num_states", "A": "num_actions", "H": "horizon"},
}

_REQUIRED: dict[str, set[str]] = {
    "info_lb": {"S", "A", "H", "gap"},
    "mingap_lb": {"S", "eps"},
    "contextual_bandit": {"S", "A", "H", "means"},
    "random": {"S", "A", "H"},
    "chain": {"S", "A", "H"},
}


@dataclasses.dataclass(frozen=True)
class InstanceSpec:
    """Serializable recipe for an MDP family member, as found in configuration files"""

    kind: str
    params: dict[str, tp.Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _BUILDERS:
            raise InvalidInstanceError(f"Unknown instance kind {self.kind!r}, expected one of {sorted(_BUILDERS)}")
        unknown = set(self.params) - set(_PARAMETERS[self.kind])
        if unknown:
            raise InvalidInstanceError(f"Unknown parameters {sorted(unknown)} for instance kind {self.kind!r}")
        missing = _REQUIRED[self.kind] - set(self.params)
        if missing:
            raise InvalidInstanceError(f"Missing parameters {sorted(missing)} for instance kind {self.kind!r}")

    @staticmethod
    def valid_parameters(kind: str) -> set[str]:
        return set(_PARAMETERS.get(kind, {}))

    def build(self) -> TabularMDP:
        names = _PARAMETERS[self.kind]
        return _BUILDERS[self.kind](**{names[key]: value for key, value in self.params.items()})
