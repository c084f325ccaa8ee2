# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

"""Full-scale acceptance experiments, too long for the unit test suite.

Usage: python integration/acceptance.py [--parallel N] [experiment ...]
"""

import argparse
import logging
import os
import time

import numpy as np

from clipregret.core import mdp as mdp_lib
from clipregret.diagnostics.diagnostics import DiagnosticSet
from clipregret.instances import instances
from clipregret.instances.instances import InstanceSpec
from clipregret.simulator import simulator
from clipregret.simulator.simulator import RunConfig

log = logging.getLogger("acceptance_main")
formatter = logging.Formatter("%(name)s %(levelname)s (%(asctime)s) - %(message)s")
handler = logging.StreamHandler()
handler.setFormatter(formatter)
log.setLevel(logging.INFO)
log.addHandler(handler)

RANDOM_534 = {"S": 5, "A": 3, "H": 4}
INFO_LB = InstanceSpec("info_lb", {"S": 2, "A": 2, "H": 3, "gap": 0.2})


def oracle_equivalence(parallel: int) -> None:
    del parallel
    rng = np.random.default_rng(0)
    for seed in range(100):
        S, A, H = (int(v) for v in rng.integers(1, [3, 2, 3], endpoint=True))
        mdp = instances.make_random(S, A, H, seed=seed)
        expected, _ = mdp_lib.brute_force_optimal(mdp)
        assert abs(mdp_lib.solve(mdp).initial_value(mdp) - expected) <= 1e-10, (seed, S, A, H)


def golden_gaps(parallel: int) -> None:
    del parallel
    S, A, H = 4, 3, 4
    gaps = np.zeros((S, A))
    gaps[:, 1:] = np.linspace(0.05, 0.45, S * (A - 1)).reshape(S, A - 1)
    oracle = mdp_lib.solve(instances.make_info_lb(S, A, H, gaps.tolist()))
    assert oracle.gap_h is not None
    assert np.abs(oracle.gap_h[0, :S] - gaps).max() <= 1e-9
    game = mdp_lib.solve(instances.make_mingap_lb(8, 0.05))
    assert game.gap_h is not None
    small = np.argwhere(np.abs(game.gap_h - 0.05) <= 1e-9)
    assert len(small) == 1, small
    others = game.gap_h[(game.gap_h > 0) & (np.abs(game.gap_h - 0.05) > 1e-9)]
    assert others.min() >= 0.5


def exact_identities(parallel: int) -> None:
    del parallel
    config = RunConfig(InstanceSpec("random", {**RANDOM_534, "seed": 0}), episodes=5000)
    ledger = simulator.run(config)
    violations = ledger.summary["violations"]
    for check in ["gap_identity", "decomposition_identity", "occupancy_normalization"]:
        assert violations[check] == 0, (check, violations)
    for check in ["clip_general", "clip_alpha", "half_clip"]:
        assert violations[check] == 0, (check, violations)


def concentration_events(parallel: int) -> None:
    configs = [
        RunConfig(
            InstanceSpec("random", {**RANDOM_534, "seed": 0}),
            episodes=2000,
            seed=seed,
            run_index=seed,
            diagnostics=DiagnosticSet(clip=False, half_clip=False),
        )
        for seed in range(50)
    ]
    result = simulator.sweep(configs, parallelism=parallel)
    ledgers = [ledger for ledger in result.ledgers if ledger is not None]
    assert len(ledgers) == 50
    strong_violated = sum(ledger.summary["strong_optimism_ever_violated"] for ledger in ledgers)
    sampling = sum(ledger.summary["sampling_ok"] for ledger in ledgers)
    log.info(f"strong optimism violated in {strong_violated}/50 runs, sampling event held in {sampling}/50")
    assert strong_violated <= 5
    assert sampling >= 45


def logarithmic_regret(parallel: int) -> None:
    configs = [
        RunConfig(INFO_LB, episodes=40_000, seed=seed, run_index=seed, diagnostics=DiagnosticSet(every=1000))
        for seed in range(5)
    ]
    result = simulator.sweep(configs, parallelism=parallel, checkpoints=[10_000, 40_000])
    (entry,) = result.aggregate.values()
    ratio = entry["cum_regret"]["40000"]["mean"] / entry["cum_regret"]["10000"]["mean"]
    log.info(f"cum_regret(40000) / cum_regret(10000) = {ratio:.3f}")
    assert ratio <= 1.6


def mingap_over_exploration(parallel: int) -> None:
    means = {}
    for S in (8, 16):
        center = instances.center_state(S)
        configs = [
            RunConfig(
                InstanceSpec("mingap_lb", {"S": S, "eps": 0.05}),
                episodes=20_000,
                seed=seed,
                run_index=seed,
                probe=(center, 0),
                diagnostics=DiagnosticSet(every=1000, clip=False, half_clip=False),
            )
            for seed in range(20)
        ]
        (entry,) = simulator.sweep(configs, parallelism=parallel).aggregate.values()
        means[S] = entry["mean_n_at_probe"]
    log.info(f"mean final count at (center, -1): {means}")
    assert means[16] >= 1.5 * means[8]


def clipping_lemma(parallel: int) -> None:
    del parallel
    rng = np.random.default_rng(9)
    for _ in range(1000):
        m = int(rng.integers(1, 10, endpoint=True))
        values = rng.random(m) * rng.choice([0.01, 0.1, 1.0])
        eps = float(rng.random())
        assert mdp_lib.clip_distribution_check(eps, values), (eps, values)


EXPERIMENTS = {
    "oracle_equivalence": oracle_equivalence,
    "golden_gaps": golden_gaps,
    "exact_identities": exact_identities,
    "concentration_events": concentration_events,
    "logarithmic_regret": logarithmic_regret,
    "mingap_over_exploration": mingap_over_exploration,
    "clipping_lemma": clipping_lemma,
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("experiments", nargs="*", default=list(EXPERIMENTS), choices=list(EXPERIMENTS))
    parser.add_argument("--parallel", type=int, default=os.cpu_count() or 1)
    args = parser.parse_args()
    for name in args.experiments:
        log.info(f"Running {name}")
        start = time.time()
        EXPERIMENTS[name](args.parallel)
        log.info(f"{name} passed in {time.time() - start:.1f}s")
    print("Acceptance experiments succeeded ✅")


if __name__ == "__main__":
    main()
