# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import pytest

from ..core.utils import ConfigError, ConfigParseError
from ..simulator.simulator import RunConfig
from . import config as config_lib

MINIMAL = """
episodes = 100

[instance]
kind = "random"
S = 3
A = 2
H = 3
seed = 1
"""

SWEEP = """
episodes = 50
delta = 0.05
probe = [4, 0]

[instance]
kind = "mingap_lb"
S = 4
eps = 0.05

[sweep]
num_seeds = 3
grid = { "instance.S" = [4, 8] }
checkpoints = [10, 50]
parallel = 2
"""


def test_minimal_config() -> None:
    config = config_lib.parse_config(MINIMAL)
    assert isinstance(config, RunConfig)
    assert config.episodes == 100
    assert config.delta == 0.1
    assert config.algo == "strong_euler"
    assert config.lfactor_variant == "appendix_c"
    assert config.instance.params == {"S": 3, "A": 2, "H": 3, "seed": 1}
    assert config.diagnostics.every == 1
    assert config.require_optimism


def test_unknown_keys() -> None:
    with pytest.raises(ConfigError, match="gamma") as error:
        config_lib.parse_config("gamma = 0.9\n" + MINIMAL)
    assert error.value.key == "gamma"
    with pytest.raises(ConfigError, match="instance.gamma"):
        config_lib.parse_config(MINIMAL + "gamma = 0.9\n")
    with pytest.raises(ConfigError, match="diagnostics.often"):
        config_lib.parse_config(MINIMAL + "[diagnostics]\noften = 2\n")


@pytest.mark.parametrize(  # type: ignore
    "override,key",
    [
        ("delta=0.6", "delta"),
        ("episodes=0", "episodes"),
        ("episodes=true", "episodes"),
        ("delta='small'", "delta"),
        ("algo=q_learning", "algo"),
        ("instance.H=0", "instance"),
        ("probe=[5, 0]", "probe"),
        ("probe=[1]", "probe"),
        ("diagnostics.every=0", "diagnostics.every"),
        ("instance.kind=grid", "instance.kind"),
    ],
)
def test_invalid_values(override: str, key: str) -> None:
    with pytest.raises(ConfigError) as error:
        config_lib.parse_config(MINIMAL, [override])
    assert error.value.key == key


def test_parse_error_position() -> None:
    with pytest.raises(ConfigParseError) as error:
        config_lib.parse_config("episodes = 100\ndelta 0.1\n")
    assert error.value.line == 2
    assert "line 2" in str(error.value)


def test_missing_sections() -> None:
    with pytest.raises(ConfigError, match="instance"):
        config_lib.parse_config("episodes = 10\n")
    with pytest.raises(ConfigError, match="episodes"):
        config_lib.parse_config(MINIMAL.replace("episodes = 100", ""))


def test_overrides() -> None:
    config = config_lib.parse_config(
        MINIMAL, ["delta=0.05", "algo=ucbvi_ch", "instance.S=4", "probe=[3, 1]", "diagnostics.every=10"]
    )
    assert isinstance(config, RunConfig)
    assert config.delta == 0.05
    assert config.algo == "ucbvi_ch"
    assert config.instance.params["S"] == 4
    assert config.probe == (3, 1)
    assert config.diagnostics.every == 10
    with pytest.raises(ConfigError, match="dotted.key=value"):
        config_lib.parse_config(MINIMAL, ["delta"])
    with pytest.raises(ConfigError, match="not a table"):
        config_lib.parse_config(MINIMAL, ["episodes.count=3"])


def test_parse_value() -> None:
    assert config_lib.parse_value("0.05") == 0.05
    assert config_lib.parse_value("[1, 2]") == [1, 2]
    assert config_lib.parse_value("true") is True
    assert config_lib.parse_value("appendix_a_table") == "appendix_a_table"
    assert config_lib.parse_value('"quoted"') == "quoted"


def test_sweep_expansion() -> None:
    plan = config_lib.parse_config(SWEEP)
    assert isinstance(plan, config_lib.SweepPlan)
    assert len(plan.configs) == 6
    assert [c.run_index for c in plan.configs] == list(range(6))
    assert [c.seed for c in plan.configs] == [0, 1, 2, 0, 1, 2]
    assert [c.instance.params["S"] for c in plan.configs] == [4, 4, 4, 8, 8, 8]
    assert plan.parallel == 2
    assert plan.checkpoints == (10, 50)
    assert all(c.delta == 0.05 and c.probe == (4, 0) for c in plan.configs)


def test_sweep_errors() -> None:
    with pytest.raises(ConfigError, match="sweep"):
        config_lib.parse_config(SWEEP, ["sweep.seeds=[1, 2]"])
    with pytest.raises(ConfigError, match="sweep.grid.delta"):
        config_lib.parse_config(SWEEP, ["sweep.grid.delta=[]"])
    with pytest.raises(ConfigError, match="sweep.parallel"):
        config_lib.parse_config(SWEEP, ["sweep.parallel=0"])
    # the grid value itself is validated like any other key
    with pytest.raises(ConfigError, match="delta"):
        config_lib.parse_config(SWEEP, ["sweep.grid.delta=[0.05, 0.7]"])


def test_sweep_explicit_seeds() -> None:
    plan = config_lib.parse_config(SWEEP.replace("num_seeds = 3", "seeds = [7, 9]"))
    assert isinstance(plan, config_lib.SweepPlan)
    assert [c.seed for c in plan.configs] == [7, 9, 7, 9]
