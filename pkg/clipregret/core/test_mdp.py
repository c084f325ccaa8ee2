# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import math

import numpy as np
import pytest

from ..instances import instances
from . import mdp as mdp_lib
from .mdp import Policy, RewardModel, TabularMDP
from .utils import InstanceTooLargeError, InvalidInstanceError, make_rng


def _zero_reward_mdp(num_states: int = 2, num_actions: int = 2, horizon: int = 3) -> TabularMDP:
    trans = np.full((num_states, num_actions, num_states), 1 / num_states)
    rewards = [[RewardModel.deterministic(0.0)] * num_actions for _ in range(num_states)]
    return TabularMDP(horizon, np.full(num_states, 1 / num_states), trans, rewards)  # type: ignore


def test_reward_model() -> None:
    model = RewardModel.two_point(0.25, 0.75, 0.5)
    assert model.mean == pytest.approx(0.5)
    assert model.variance == pytest.approx(1 / 16)
    assert RewardModel.bernoulli(0.3).variance == pytest.approx(0.21)
    assert RewardModel.deterministic(0.4).variance == 0
    with pytest.raises(InvalidInstanceError, match="support"):
        RewardModel.two_point(0.5, 1.5, 0.5)
    samples = model.sample(np.random.default_rng(0), 1000)
    assert set(np.unique(samples)) <= {0.25, 0.75}


@pytest.mark.parametrize(  # type: ignore
    "model",
    [
        RewardModel.bernoulli(0.3),
        RewardModel.two_point(0.25, 0.75, 0.5),
        RewardModel.two_point(0.1, 0.9, 0.85),
        RewardModel.deterministic(0.4),
    ],
)
def test_reward_model_moments_match_sampling(model: RewardModel) -> None:
    n = 100_000
    samples = model.sample(make_rng(11), n)
    assert samples.min() >= model.lo and samples.max() <= model.support_max
    assert abs(samples.mean() - model.mean) <= 3 * math.sqrt(model.variance / n) + 1e-12
    centered = samples - samples.mean()
    fourth = float((centered**4).mean())
    var_se = math.sqrt(max(fourth - model.variance**2, 0.0) / n)
    assert abs(samples.var() - model.variance) <= 3 * var_se + 1e-12


def test_reward_support_max() -> None:
    assert RewardModel.two_point(0.2, 0.6, 0.0).support_max == 0.2
    assert RewardModel.two_point(0.2, 0.6, 0.1).support_max == 0.6
    game = instances.make_mingap_lb(2, 0.05)
    assert game.r_max[-1, 1] == pytest.approx(0.8)
    assert game.r_max[0, 0] == 0.0


def test_mdp_validation() -> None:
    reward = [[RewardModel.deterministic(0.0)]]
    with pytest.raises(InvalidInstanceError, match="sum to 1"):
        TabularMDP(1, np.array([1.0]), np.array([[[0.9]]]), reward)  # type: ignore
    with pytest.raises(InvalidInstanceError, match="Horizon"):
        TabularMDP(0, np.array([1.0]), np.array([[[1.0]]]), reward)  # type: ignore
    with pytest.raises(InvalidInstanceError, match="shape"):
        TabularMDP(1, np.array([0.5, 0.5]), np.array([[[1.0]]]), reward)  # type: ignore
    mdp = TabularMDP(1, np.array([1.0]), np.array([[[1.0]]]), reward)  # type: ignore
    assert mdp.shape == (1, 1, 1)
    assert not mdp.trans.flags.writeable


def test_value_iteration_info_lb(info_lb: TabularMDP) -> None:
    oracle = mdp_lib.value_iteration(info_lb)
    H = info_lb.horizon
    good, bad = 2, 3
    for h in range(H):
        assert oracle.v_star[h, good] == pytest.approx(H - h)
        assert oracle.v_star[h, bad] == pytest.approx((H - h) / 2)
    np.testing.assert_array_equal(oracle.v_star[H], 0)


def test_value_iteration_zero_rewards() -> None:
    oracle = mdp_lib.solve(_zero_reward_mdp())
    np.testing.assert_array_equal(oracle.v_star, 0)
    assert oracle.opt_mask.all()
    assert oracle.degenerate
    assert math.isinf(oracle.gap_min)  # type: ignore
    assert oracle.eps_clip == 0


def test_value_iteration_matches_brute_force(random_mdp: TabularMDP) -> None:
    oracle = mdp_lib.value_iteration(random_mdp)
    value, policy = mdp_lib.brute_force_optimal(random_mdp)
    assert oracle.initial_value(random_mdp) == pytest.approx(value, abs=1e-10)
    assert mdp_lib.evaluate_policy(random_mdp, policy).initial == pytest.approx(value, abs=1e-10)


def test_brute_force_small_cases() -> None:
    single = TabularMDP(4, np.array([1.0]), np.array([[[1.0]]]), [[RewardModel.deterministic(0.3)]])  # type: ignore
    assert mdp_lib.brute_force_optimal(single)[0] == pytest.approx(1.2)
    assert mdp_lib.brute_force_optimal(_zero_reward_mdp())[0] == 0
    small = instances.make_random(2, 2, 2, seed=3)
    assert mdp_lib.brute_force_optimal(small)[0] == pytest.approx(mdp_lib.solve(small).initial_value(small), abs=1e-10)
    with pytest.raises(InstanceTooLargeError):
        mdp_lib.brute_force_optimal(instances.make_random(5, 2, 5))


def test_evaluate_policy(random_mdp: TabularMDP, random_oracle: mdp_lib.OracleTables) -> None:
    greedy = Policy.greedy(random_oracle.q_star)
    value = mdp_lib.evaluate_policy(random_mdp, greedy)
    assert value.initial == pytest.approx(random_oracle.initial_value(random_mdp), abs=1e-12)
    assert value.values.shape == (4, 3)
    zero = _zero_reward_mdp()
    assert mdp_lib.evaluate_policy(zero, Policy.constant(3, 2, 1)).initial == 0
    with pytest.raises(InvalidInstanceError, match="outside"):
        mdp_lib.evaluate_policy(random_mdp, Policy.constant(3, 3, 2))


def test_evaluate_policy_mingap() -> None:
    eps = 0.05
    game = instances.make_mingap_lb(3, eps)
    plus = Policy.constant(2, 7, 1)
    assert mdp_lib.evaluate_policy(game, plus).initial == pytest.approx(0.5 + eps)


def test_occupancy_single_stage() -> None:
    bandit = instances.make_random(4, 3, 1, seed=2)
    policy = Policy(np.array([[0, 2, 1, 1]]))
    occ = mdp_lib.occupancy(bandit, policy)
    for x in range(4):
        assert occ.per_stage[0, x, policy(0, x)] == pytest.approx(bandit.p0[x])
    np.testing.assert_allclose(occ.per_stage.sum(axis=(1, 2)), 1.0)
    np.testing.assert_allclose(occ.total, occ.per_stage.sum(axis=0))


def test_occupancy_mingap() -> None:
    S = 3
    game = instances.make_mingap_lb(S, 0.05)
    occ = mdp_lib.occupancy(game, Policy.constant(2, 2 * S + 1, 0))
    marginal = occ.per_stage[1].sum(axis=-1)
    np.testing.assert_allclose(marginal[:S], 1 / S)
    np.testing.assert_allclose(marginal[S:], 0.0)


def test_occupancy_contextual_bandit() -> None:
    means = [[0.2, 0.7], [0.5, 0.1], [0.9, 0.4]]
    bandit = instances.make_contextual_bandit(3, 2, 4, means, next_dist=[0.2, 0.3, 0.5])
    marginals = [
        mdp_lib.occupancy(bandit, Policy(np.random.default_rng(seed).integers(0, 2, size=(4, 3)))).per_stage.sum(-1)
        for seed in range(3)
    ]
    for marginal in marginals:
        np.testing.assert_allclose(marginal, marginals[0], atol=1e-12)


def test_gaps_info_lb() -> None:
    gap = 0.2
    game = instances.make_info_lb(2, 2, 3, gap)
    oracle = mdp_lib.solve(game)
    assert oracle.gap_h is not None
    np.testing.assert_allclose(oracle.gap_h[0, :2, 1], gap, atol=1e-9)
    np.testing.assert_array_equal(oracle.gap_h[0, :2, 0], 0)
    # the zero-reward action in the good absorbing state loses exactly one per stage
    np.testing.assert_allclose(oracle.gap_h[:, 2, 1], 1.0)
    np.testing.assert_allclose(oracle.gap_h[:, 3, 1], 0.5)


def test_gaps_mingap() -> None:
    eps = 0.05
    game = instances.make_mingap_lb(4, eps)
    oracle = mdp_lib.solve(game)
    center = instances.center_state(4)
    assert oracle.gap_h is not None and oracle.gap is not None
    assert oracle.gap_h[0, center, 0] == pytest.approx(eps)
    assert oracle.gap_min == pytest.approx(eps)
    assert oracle.eps_clip == pytest.approx(eps / 4)
    others = oracle.gap_h.copy()
    others[0, center, 0] = 0
    assert others[others > 0].min() >= 0.5


def test_unique_optimal_actions(random_oracle: mdp_lib.OracleTables) -> None:
    for h in range(3):
        for x in range(3):
            assert len(random_oracle.opt_actions(h, x)) == 1


def test_greedy_policy_ties() -> None:
    q = np.zeros((2, 3, 4))
    q[1, 2, 3] = 1.0
    policy = Policy.greedy(q)
    assert policy(0, 0) == 0
    assert policy(1, 2) == 3


def test_policy_rejects_non_integer_actions() -> None:
    with pytest.raises(InvalidInstanceError, match="integers"):
        Policy(np.array([[0.0, 1.7]]))
    with pytest.raises(InvalidInstanceError, match="integers"):
        Policy(np.array([[True, False]]))
    with pytest.raises(InvalidInstanceError, match="nonnegative"):
        Policy(np.array([[0, -1]]))
    policy = Policy(np.array([[0, 1]], dtype=np.int32))
    assert policy.actions.dtype == np.int64


def test_variances() -> None:
    chain = instances.make_chain(3, 2, 4)
    oracle = mdp_lib.solve(chain)
    np.testing.assert_array_equal(oracle.var_star, 0)
    assert oracle.var_bar == 0
    game = instances.make_mingap_lb(2, 0.05)
    assert game.r_var[3, 1] == pytest.approx(1 / 16)
    assert game.r_var[0, 1] == pytest.approx(1 / 16)


def test_variances_terminal_stage(random_mdp: TabularMDP, random_oracle: mdp_lib.OracleTables) -> None:
    assert random_oracle.var_star is not None
    np.testing.assert_allclose(random_oracle.var_star[-1], random_mdp.r_var)
    assert random_oracle.var_bar == pytest.approx(float(random_oracle.var_star.max()))


def test_variances_with_policy(random_mdp: TabularMDP) -> None:
    policy = Policy.constant(3, 3, 1)
    oracle = mdp_lib.solve(random_mdp, policy)
    assert oracle.var_k is not None and oracle.var_star is not None and oracle.var_policy is not None
    np.testing.assert_array_equal(oracle.var_k, np.minimum(oracle.var_star, oracle.var_policy))


def test_alpha() -> None:
    bandit = instances.make_contextual_bandit(3, 2, 3, [[0.1, 0.6], [0.4, 0.2], [0.3, 0.3]])
    np.testing.assert_array_equal(mdp_lib.solve(bandit).alpha, 0)
    chain = instances.make_chain(3, 2, 3)
    oracle = mdp_lib.solve(chain)
    assert oracle.alpha is not None
    np.testing.assert_array_equal(oracle.alpha[..., 1], 1.0)
    np.testing.assert_array_equal(oracle.alpha[..., 0], 0.0)


def test_alpha_unchanged_by_reward_scaling(random_mdp: TabularMDP, random_oracle: mdp_lib.OracleTables) -> None:
    # halving every Bernoulli mean halves every gap and keeps the optimal actions
    rewards = [[RewardModel.bernoulli(model.mean / 2) for model in row] for row in random_mdp.rewards]
    scaled = TabularMDP(random_mdp.horizon, random_mdp.p0, random_mdp.trans, rewards)  # type: ignore
    oracle = mdp_lib.solve(scaled)
    assert oracle.gap_h is not None and random_oracle.gap_h is not None
    np.testing.assert_allclose(oracle.gap_h, random_oracle.gap_h / 2, atol=1e-12)
    np.testing.assert_array_equal(oracle.opt_mask, random_oracle.opt_mask)
    np.testing.assert_array_equal(oracle.alpha, random_oracle.alpha)
    assert oracle.alpha is not None
    assert np.any((oracle.alpha > 0) & (oracle.alpha < 1))


def test_g_bound_and_eff_horizon() -> None:
    chain = instances.make_chain(3, 2, 3)
    oracle = mdp_lib.solve(chain)
    assert oracle.g_bound == pytest.approx(2.0)
    assert oracle.eff_horizon(300) == 0
    game = instances.make_info_lb(2, 2, 4, 0.2)
    oracle = mdp_lib.solve(game)
    assert oracle.g_bound == pytest.approx(3.0)
    with pytest.raises(RuntimeError, match="solve"):
        mdp_lib.value_iteration(game).eff_horizon(10)


@pytest.mark.parametrize(  # type: ignore
    "eps,x,expected", [(0.5, 0.3, 0.0), (0.5, 0.7, 0.7), (0.0, 0.2, 0.2), (0.0, 0.0, 0.0)]
)
def test_clip(eps: float, x: float, expected: float) -> None:
    assert mdp_lib.clip(eps, x) == expected


def test_clip_arrays() -> None:
    out = mdp_lib.clip(np.array([0.1, 0.5, 0.2]), np.array([0.2, 0.3, 0.2]))
    np.testing.assert_array_equal(out, [0.2, 0.0, 0.2])
    with pytest.raises(ValueError, match="nonnegative"):
        mdp_lib.clip(-1.0, 0.5)


def test_clip_distribution_check() -> None:
    rng = make_rng(0)
    for _ in range(1000):
        m = int(rng.integers(1, 10, endpoint=True))
        scale = float(rng.choice([0.01, 0.1, 1.0, 10.0]))
        values = scale * rng.random(m)
        assert mdp_lib.clip_distribution_check(float(rng.random()), values)
    assert mdp_lib.clip_distribution_check(1.0, [])


def test_is_contextual_bandit(random_mdp: TabularMDP) -> None:
    assert not mdp_lib.is_contextual_bandit(random_mdp)
    bandit = instances.make_contextual_bandit(2, 2, 2, [[0.1, 0.2], [0.3, 0.4]])
    assert mdp_lib.is_contextual_bandit(bandit)
