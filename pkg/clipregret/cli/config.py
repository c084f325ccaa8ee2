# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

"""TOML configuration documents.

See docs/config.md for the schema. Every value is validated, unknown keys are rejected
with their dotted path.
"""

import copy
import dataclasses
import itertools
import re
import sys
import typing as tp

from ..core.utils import ConfigError, ConfigParseError, InvalidInstanceError
from ..diagnostics.diagnostics import DiagnosticSet
from ..instances.instances import InstanceSpec
from ..simulator.simulator import RunConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

Document = dict[str, tp.Any]

_NUMBER = (int, float)
_TOP_LEVEL: dict[str, tp.Any] = {
    "algo": str,
    "episodes": int,
    "delta": _NUMBER,
    "seed": int,
    "run_index": int,
    "lfactor_variant": str,
    "probe": list,
    "ucb_episodes": int,
    "instance": dict,
    "diagnostics": dict,
    "verify": dict,
    "sweep": dict,
    "report": dict,
}
_DIAGNOSTICS = {"every": int, "clip": bool, "half_clip": bool, "sampling": bool, "surplus_report": bool}
_VERIFY = {"require_optimism": bool}
_SWEEP = {"seeds": list, "num_seeds": int, "grid": dict, "checkpoints": list, "parallel": int}
_REPORT = {"episodes": int, "delta": _NUMBER}


@dataclasses.dataclass(frozen=True)
class SweepPlan:
    configs: tuple[RunConfig, ...]
    parallel: int = 1
    checkpoints: tuple[int, ...] | None = None


def load_document(text: str) -> Document:
    """Parses TOML text, reporting the line and column of syntax errors"""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        position = re.search(r"line (\d+), column (\d+)", str(e))
        if position is None:
            raise ConfigParseError(str(e)) from e
        raise ConfigParseError(str(e), int(position.group(1)), int(position.group(2))) from e


def parse_value(text: str) -> tp.Any:
    """TOML value if the text is one, the bare string otherwise"""
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def set_dotted(doc: Document, key: str, value: tp.Any) -> None:
    *parents, leaf = key.split(".")
    table = doc
    for index, part in enumerate(parents):
        table = table.setdefault(part, {})
        if not isinstance(table, dict):
            raise ConfigError(".".join(parents[: index + 1]), "is not a table")
    table[leaf] = value


def apply_overrides(doc: Document, overrides: tp.Iterable[str]) -> Document:
    """Returns a copy of the document with ``dotted.key=value`` overrides applied"""
    doc = copy.deepcopy(doc)
    for override in overrides:
        key, sep, value = override.partition("=")
        if not sep or not key.strip():
            raise ConfigError(override, "overrides must look like dotted.key=value")
        set_dotted(doc, key.strip(), parse_value(value.strip()))
    return doc


def _check_table(table: Document, schema: dict[str, tp.Any], prefix: str) -> None:
    for key, value in table.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(path, f"unknown key (valid keys: {', '.join(sorted(schema))})")
        expected = schema[key]
        if isinstance(value, bool) and expected is not bool:
            raise ConfigError(path, f"expected {_type_name(expected)}, got a boolean")
        if not isinstance(value, expected):
            raise ConfigError(path, f"expected {_type_name(expected)}, got {type(value).__name__}")


def _type_name(expected: tp.Any) -> str:
    if isinstance(expected, tuple):
        return "a number"
    return {int: "an integer", str: "a string", bool: "a boolean", list: "an array", dict: "a table"}[expected]


def validate_document(doc: Document) -> None:
    _check_table(doc, _TOP_LEVEL, "")
    for name, schema in [("diagnostics", _DIAGNOSTICS), ("verify", _VERIFY), ("sweep", _SWEEP), ("report", _REPORT)]:
        _check_table(doc.get(name, {}), schema, f"{name}.")
    if "instance" not in doc:
        raise ConfigError("instance", "missing required table")
    if "episodes" not in doc:
        raise ConfigError("episodes", "missing required key")
    instance = doc["instance"]
    kind = instance.get("kind")
    if not isinstance(kind, str):
        raise ConfigError("instance.kind", "missing or not a string")
    valid = InstanceSpec.valid_parameters(kind)
    if not valid:
        raise ConfigError("instance.kind", f"unknown instance kind {kind!r}")
    for key in instance:
        if key != "kind" and key not in valid:
            valid_keys = ", ".join(sorted(valid))
            raise ConfigError(f"instance.{key}", f"unknown key for kind {kind!r} (valid keys: {valid_keys})")
    probe = doc.get("probe")
    if probe is not None and (len(probe) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in probe)):
        raise ConfigError("probe", "expected a pair of integers [state, action]")


def build_run_config(doc: Document, run_index: int | None = None) -> RunConfig:
    """RunConfig from a validated document (without its sweep section)"""
    validate_document(doc)
    instance_table = dict(doc["instance"])
    kind = instance_table.pop("kind")
    try:
        spec = InstanceSpec(kind, instance_table)
        mdp = spec.build()
    except InvalidInstanceError as e:
        raise ConfigError("instance", str(e)) from e
    probe = doc.get("probe")
    if probe is not None and not (0 <= probe[0] < mdp.num_states and 0 <= probe[1] < mdp.num_actions):
        raise ConfigError("probe", f"{probe} is outside the instance's (S, A) = {(mdp.num_states, mdp.num_actions)}")
    try:
        diagnostics = DiagnosticSet(**doc.get("diagnostics", {}))
    except ValueError as e:
        raise ConfigError("diagnostics.every", str(e)) from e
    return RunConfig(
        instance=spec,
        episodes=doc["episodes"],
        algo=doc.get("algo", "strong_euler"),
        delta=float(doc.get("delta", 0.1)),
        seed=doc.get("seed", 0),
        run_index=doc.get("run_index", 0) if run_index is None else run_index,
        lfactor_variant=doc.get("lfactor_variant", "appendix_c"),
        diagnostics=diagnostics,
        probe=None if probe is None else (probe[0], probe[1]),
        ucb_episodes=doc.get("ucb_episodes"),
        require_optimism=doc.get("verify", {}).get("require_optimism", True),
    )


def expand_sweep(doc: Document) -> SweepPlan:
    """Cartesian product of the grid, replicated over seeds; run indices follow that order"""
    validate_document(doc)
    section = doc["sweep"]
    base = {key: value for key, value in doc.items() if key != "sweep"}
    if "seeds" in section and "num_seeds" in section:
        raise ConfigError("sweep", "give either seeds or num_seeds, not both")
    base_seed = base.get("seed", 0)
    seeds = section.get("seeds", [base_seed + i for i in range(section.get("num_seeds", 1))])
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("sweep.seeds", "expected a non-empty array of integers")
    grid = section.get("grid", {})
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.grid.{key}", "expected a non-empty array of values")
    checkpoints = section.get("checkpoints")
    if checkpoints is not None and not all(isinstance(k, int) and k >= 1 for k in checkpoints):
        raise ConfigError("sweep.checkpoints", "expected an array of positive integers")
    parallel = section.get("parallel", 1)
    if parallel < 1:
        raise ConfigError("sweep.parallel", f"must be at least 1, got {parallel}")
    configs = []
    for point in itertools.product(*grid.values()):
        for seed in seeds:
            variant = copy.deepcopy(base)
            for key, value in zip(grid, point, strict=True):
                set_dotted(variant, key, value)
            variant["seed"] = seed
            configs.append(build_run_config(variant, run_index=len(configs)))
    return SweepPlan(tuple(configs), parallel, None if checkpoints is None else tuple(checkpoints))


def parse_config(text: str, overrides: tp.Iterable[str] = ()) -> RunConfig | SweepPlan:
    """RunConfig for a plain document, SweepPlan when it has a [sweep] table.

    Defaults: delta = 0.1, algo = "strong_euler", lfactor_variant = "appendix_c".
    """
    doc = apply_overrides(load_document(text), overrides)
    if "sweep" in doc:
        return expand_sweep(doc)
    return build_run_config(doc)


def parse_document(text: str, overrides: tp.Iterable[str] = ()) -> Document:
    """Validated document with overrides applied, for subcommands reading extra sections"""
    doc = apply_overrides(load_document(text), overrides)
    validate_document(doc)
    return doc
