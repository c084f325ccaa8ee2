# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

"""Exact-oracle laboratory for optimistic learners on tabular episodic MDPs"""

# allow explicit reimports (mypy) by renaming all imports
from .core.core import Executor as Executor
from .core.core import Job as Job
from .core.mdp import OracleTables as OracleTables
from .core.mdp import Policy as Policy
from .core.mdp import RewardModel as RewardModel
from .core.mdp import TabularMDP as TabularMDP
from .core.mdp import solve as solve
from .instances.instances import InstanceSpec as InstanceSpec
from .learner.learner import LearnerState as LearnerState
from .learner.learner import plan_strong_euler as plan_strong_euler
from .learner.learner import plan_ucbvi_ch as plan_ucbvi_ch
from .local.debug import DebugExecutor as DebugExecutor
from .local.local import LocalExecutor as LocalExecutor
from .simulator.simulator import RunConfig as RunConfig
from .simulator.simulator import RunLedger as RunLedger
from .simulator.simulator import run as run
from .simulator.simulator import sweep as sweep

__version__ = "1.0.0"
