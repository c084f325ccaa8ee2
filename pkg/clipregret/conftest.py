# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import pytest

from .core.mdp import OracleTables, TabularMDP, solve
from .instances import instances
from .local.debug import DebugExecutor


@pytest.fixture()
def random_mdp() -> TabularMDP:
    return instances.make_random(3, 2, 3, seed=7)


@pytest.fixture()
def random_oracle(random_mdp: TabularMDP) -> OracleTables:
    return solve(random_mdp)


@pytest.fixture()
def info_lb() -> TabularMDP:
    return instances.make_info_lb(2, 2, 5, 0.25)


@pytest.fixture()
def mingap() -> TabularMDP:
    return instances.make_mingap_lb(2, 0.05)


@pytest.fixture()
def debug_executor() -> DebugExecutor:
    return DebugExecutor()
