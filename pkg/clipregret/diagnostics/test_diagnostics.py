# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import math

import numpy as np
import pytest

from ..core import mdp as mdp_lib
from ..core.mdp import OracleTables, Policy, TabularMDP
from ..core.utils import make_rng
from ..instances import instances
from ..learner import learner
from ..learner.learner import LearnerState, OptimisticPlan
from . import diagnostics


def _exact_plan(oracle: OracleTables) -> OptimisticPlan:
    H, S, A = oracle.q_star.shape
    return OptimisticPlan(
        oracle.q_star, oracle.v_star, oracle.v_star, Policy.greedy(oracle.q_star), np.zeros((H, S, A, 3))
    )


def test_surpluses_exact_plan(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    surplus = diagnostics.surpluses(random_mdp, _exact_plan(random_oracle))
    np.testing.assert_allclose(surplus, 0.0, atol=1e-12)
    assert diagnostics.optimism_holds(random_oracle, _exact_plan(random_oracle))
    assert diagnostics.strong_optimism_holds(surplus)


def test_surpluses_first_episode(random_mdp: TabularMDP) -> None:
    plan = learner.plan_strong_euler(LearnerState.for_mdp(random_mdp, 0.1))
    surplus = diagnostics.surpluses(random_mdp, plan)
    np.testing.assert_allclose(surplus[-1], 1.0 - random_mdp.r)
    assert diagnostics.strong_optimism_holds(surplus)


def test_decomposition_identity(random_mdp: TabularMDP) -> None:
    state = LearnerState.for_mdp(random_mdp, 0.1)
    rng = make_rng(3)
    for _ in range(100):
        plan = learner.plan_strong_euler(state)
        value = mdp_lib.evaluate_policy(random_mdp, plan.policy)
        occ = mdp_lib.occupancy(random_mdp, plan.policy)
        surplus = diagnostics.surpluses(random_mdp, plan)
        lhs = plan.v_up_0(random_mdp.p0) - value.initial
        assert float(np.sum(occ.per_stage * surplus)) == pytest.approx(lhs, abs=1e-9)
        learner.rollout_and_update(state, random_mdp, plan, rng)


def test_clipped_decomposition_zero_surplus(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    plan = _exact_plan(random_oracle)
    occ = mdp_lib.occupancy(random_mdp, plan.policy)
    regret = random_oracle.initial_value(random_mdp) - mdp_lib.evaluate_policy(random_mdp, plan.policy).initial
    assert regret == pytest.approx(0.0, abs=1e-12)
    surplus = diagnostics.surpluses(random_mdp, plan)
    for mode in diagnostics.CLIP_MODES:
        check = diagnostics.check_clipped_decomposition(random_oracle, occ.per_stage, surplus, regret, mode, True, True)
        assert check.bound == 0.0
        assert check.holds and check.ok


def test_clipped_decomposition_not_applicable(random_oracle: OracleTables) -> None:
    omega = np.zeros(random_oracle.q_star.shape)
    check = diagnostics.check_clipped_decomposition(random_oracle, omega, omega, 1.0, "alpha", True, False)
    assert not check.holds
    assert not check.applicable
    assert check.ok
    with pytest.raises(ValueError, match="clipping mode"):
        diagnostics.clip_thresholds(random_oracle, "beta")


def test_clip_thresholds_contextual_bandit() -> None:
    bandit = instances.make_contextual_bandit(2, 3, 4, [[0.9, 0.5, 0.2], [0.1, 0.6, 0.3]])
    oracle = mdp_lib.solve(bandit)
    assert oracle.gap_h is not None and oracle.gap_min is not None
    expected = np.maximum(oracle.gap_min / 8, oracle.gap_h / 4)
    np.testing.assert_allclose(diagnostics.clip_thresholds(oracle, "alpha"), expected)
    np.testing.assert_allclose(
        diagnostics.clip_thresholds(oracle, "general"), np.maximum(oracle.gap_min / 8, oracle.gap_h / 16)
    )


def test_clip_thresholds_alpha_dominates_general(random_oracle: OracleTables) -> None:
    alpha = random_oracle.alpha
    assert alpha is not None
    assert np.any((alpha > 0) & (alpha < 1))
    general = diagnostics.clip_thresholds(random_oracle, "general")
    alpha_mode = diagnostics.clip_thresholds(random_oracle, "alpha")
    assert np.all(alpha_mode >= general)
    assert random_oracle.gap_h is not None and random_oracle.gap_min is not None
    H = random_oracle.horizon
    expected = np.maximum(random_oracle.gap_min / (2 * H), random_oracle.gap_h / (4 * np.maximum(H * alpha, 1)))
    np.testing.assert_allclose(alpha_mode, expected)



def test_half_clipped_check(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    plan = _exact_plan(random_oracle)
    surplus = diagnostics.surpluses(random_mdp, plan)
    value = mdp_lib.evaluate_policy(random_mdp, plan.policy)
    check = diagnostics.half_clipped_check(random_mdp, random_oracle, plan, surplus, value, 0.0, True)
    assert check.value == pytest.approx(value.initial)
    assert check.ok
    first = learner.plan_strong_euler(LearnerState.for_mdp(random_mdp, 0.1))
    surplus = diagnostics.surpluses(random_mdp, first)
    value = mdp_lib.evaluate_policy(random_mdp, first.policy)
    regret = random_oracle.initial_value(random_mdp) - value.initial
    check = diagnostics.half_clipped_check(random_mdp, random_oracle, first, surplus, value, regret, True)
    assert check.holds


def test_idealized_counts_deterministic() -> None:
    chain = instances.make_chain(3, 2, 4)
    state = LearnerState.for_mdp(chain, 0.1)
    counts = diagnostics.IdealizedCounts(3, 2)
    policy = Policy.constant(4, 3, 0)
    rng = make_rng(0)
    previous = counts.nbar
    for _ in range(5):
        occ = mdp_lib.occupancy(chain, policy)
        nbar = counts.update(occ)
        np.testing.assert_array_equal(nbar - previous, occ.total)
        previous = nbar
        learner.rollout_and_update(state, chain, policy, rng)
        np.testing.assert_array_equal(state.n, nbar)
    assert counts.episodes == 5
    occupancies = [mdp_lib.occupancy(chain, policy)] * 5
    np.testing.assert_array_equal(diagnostics.track_idealized_counts(occupancies, 3, 2), previous)


def test_sampling_check() -> None:
    threshold = diagnostics.sampling_threshold(2, 2, 2, 0.1)
    assert threshold == pytest.approx(8 * math.log(160))
    nbar = np.array([[100.0, 1.0], [50.0, 0.0]])
    assert diagnostics.sampling_check(np.array([[30, 0], [13, 0]]), nbar, 40.0)
    assert not diagnostics.sampling_check(np.array([[30, 0], [12, 0]]), nbar, 40.0)


def test_bound_terms_equal_gaps() -> None:
    H = 3
    bandit = instances.make_contextual_bandit(1, 2, H, [[0.8, 0.3]])
    oracle = mdp_lib.solve(bandit)
    log_mt = math.log((2 * H) ** 2 * 100 * H / 0.1)
    terms = diagnostics.bound_terms(oracle, 100, 0.1, 1, 2, H)
    assert terms.term_gap_sum == pytest.approx(H**3 / 0.5 * log_mt)
    assert terms.term_opt == pytest.approx(H**3 / 0.5 * log_mt)
    assert not terms.degenerate
    benign = diagnostics.bound_terms(oracle, 100, 0.1, 1, 2, H, benign="contextual_bandit")
    assert benign.term_gap_sum == pytest.approx(1 / 0.5 * log_mt)
    assert benign.term_opt == pytest.approx(H / 0.5 * log_mt)
    assert diagnostics.detect_benign(bandit, oracle) == "contextual_bandit"
    doubled = diagnostics.bound_terms(oracle, 200, 0.1, 1, 2, H)
    ratio = math.log((2 * H) ** 2 * 200 * H / 0.1) / log_mt
    assert doubled.term_gap_sum / terms.term_gap_sum == pytest.approx(ratio)
    assert doubled.term_burnin / terms.term_burnin == pytest.approx(ratio)
    assert doubled.total > terms.total
    with pytest.raises(ValueError, match="benign"):
        diagnostics.bound_terms(oracle, 100, 0.1, 1, 2, H, benign="friendly")


def test_bound_terms_degenerate() -> None:
    forced = instances.make_chain(3, 1, 3)
    oracle = mdp_lib.solve(forced)
    terms = diagnostics.bound_terms(oracle, 100, 0.1, 3, 1, 3)
    assert terms.degenerate
    assert terms.total == 0.0
    interpolated = diagnostics.interpolated_bound_terms(oracle, 100, 0.1, 3, 1)
    assert interpolated.term_burnin == 0.0
    assert math.isinf(interpolated.best_eps)


def test_detect_benign(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    assert diagnostics.detect_benign(random_mdp, random_oracle) is None
    single = instances.make_info_lb(2, 2, 1, 0.1)
    assert diagnostics.detect_benign(single, mdp_lib.solve(single)) == "g_bounded"


def test_interpolated_bound_terms(mingap: TabularMDP) -> None:
    oracle = mdp_lib.solve(mingap)
    S, A, H = mingap.shape
    interpolated = diagnostics.interpolated_bound_terms(oracle, 1000, 0.1, S, A)
    assert oracle.gap is not None and oracle.z_sub is not None
    M = float(S * A * H) ** 2
    gaps = oracle.gap[oracle.z_sub]
    full_sum = float(np.sum(H**3 / gaps * np.log(M / (0.1 * gaps))))
    assert interpolated.term_gap <= full_sum + 1e-9
    assert interpolated.total > 0
    # with a huge horizon count the sqrt(T) branch loses and every gap is kept
    long_run = diagnostics.interpolated_bound_terms(oracle, 10**12, 0.1, S, A)
    assert long_run.best_eps == pytest.approx(float(gaps.min()))


def test_surplus_bound_report(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    state = LearnerState.for_mdp(random_mdp, 0.1)
    exact = _exact_plan(random_oracle)
    report = diagnostics.surplus_bound_report(
        random_mdp, state, random_oracle, exact, diagnostics.surpluses(random_mdp, exact)
    )
    np.testing.assert_allclose(report.ratio, 0.0, atol=1e-12)
    np.testing.assert_array_equal(report.lead, random_mdp.horizon)
    first = learner.plan_strong_euler(state)
    report = diagnostics.surplus_bound_report(
        random_mdp, state, random_oracle, first, diagnostics.surpluses(random_mdp, first)
    )
    assert report.ratio[-1].max() <= 1.0
    assert math.isfinite(report.max_ratio)


def test_diagnostic_set() -> None:
    checks = diagnostics.DiagnosticSet(every=3)
    assert [k for k in range(1, 11) if checks.due(k)] == [1, 4, 7, 10]
    with pytest.raises(ValueError, match="at least 1"):
        diagnostics.DiagnosticSet(every=0)


def test_diagnose_run(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    state = LearnerState.for_mdp(random_mdp, 0.1)
    counts = diagnostics.IdealizedCounts(3, 2)
    checks = diagnostics.DiagnosticSet(surplus_report=True)
    rng = make_rng(0)
    for _ in range(50):
        plan = learner.plan_strong_euler(state)
        value = mdp_lib.evaluate_policy(random_mdp, plan.policy)
        occ = mdp_lib.occupancy(random_mdp, plan.policy)
        nbar = counts.update(occ)
        result = diagnostics.diagnose(random_mdp, random_oracle, plan, state, value, occ, nbar, checks)
        assert result.gap_residual < 1e-9
        assert result.decomposition_residual < 1e-9
        assert result.occupancy_residual < 1e-9
        if result.optimism_ok:
            assert not result.failures()
            assert result.surplus_ratio_max is not None
        learner.rollout_and_update(state, random_mdp, plan, rng)


def test_diagnose_shifted_plan(random_mdp: TabularMDP, random_oracle: OracleTables) -> None:
    state = LearnerState.for_mdp(random_mdp, 0.1)
    plan = learner.plan_strong_euler(state).shifted(-10)
    value = mdp_lib.evaluate_policy(random_mdp, plan.policy)
    occ = mdp_lib.occupancy(random_mdp, plan.policy)
    result = diagnostics.diagnose(
        random_mdp, random_oracle, plan, state, value, occ, occ.total, diagnostics.DiagnosticSet()
    )
    assert not result.optimism_ok
    assert "decomposition_identity" in result.failures()
