# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import contextlib
import os
import pickle
import typing as tp
from pathlib import Path

import cloudpickle
import numpy as np


class InvalidInstanceError(ValueError):
    """An MDP or one of its constructor parameters is invalid"""


class InstanceTooLargeError(ValueError):
    """Exhaustive enumeration would exceed the policy budget"""


class ConfigError(ValueError):
    """Configuration document is invalid. The message names the offending key path."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class ConfigParseError(ConfigError):
    """Configuration document could not be parsed"""

    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        where = "" if line is None else f" (line {line}, column {column})"
        super().__init__("", f"could not parse configuration{where}: {message}")
        self.line = line
        self.column = column


class UncompletedRunError(RuntimeError):
    """Run is uncomplete: either unfinished or failed"""


class FailedRunError(UncompletedRunError):
    """Run failed during processing"""


# spawn key domains: instance generation and learner runs never share a stream
INSTANCE_STREAM = 0
RUN_STREAM = 1


def make_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    """Counter-based generator (Philox) for one run.

    Streams are derived from (seed, run_index) through a SeedSequence spawn key, so
    two runs never share a stream and results do not depend on the platform.
    """
    sequence = np.random.SeedSequence(seed, spawn_key=(RUN_STREAM, run_index))
    return np.random.Generator(np.random.Philox(sequence))


def make_instance_rng(seed: int) -> np.random.Generator:
    """Philox generator used to draw a random instance, disjoint from every run stream"""
    sequence = np.random.SeedSequence(seed, spawn_key=(INSTANCE_STREAM,))
    return np.random.Generator(np.random.Philox(sequence))


class DelayedSubmission:
    """Object for specifying the function/callable call to submit and process later.
    This is only syntactic sugar to make sure everything is well formatted:
    If what you want to compute later is func(*args, **kwargs), just instanciate:
    DelayedSubmission(func, *args, **kwargs).
    """

    def __init__(self, function: tp.Callable[..., tp.Any], *args: tp.Any, **kwargs: tp.Any) -> None:
        self.function = function
        self.args = args
        self.kwargs = kwargs
        self._result: tp.Any = None
        self._done = False

    def result(self) -> tp.Any:
        if self._done:
            return self._result

        self._result = self.function(*self.args, **self.kwargs)
        self._done = True
        return self._result

    def done(self) -> bool:
        return self._done

    def dumps(self) -> bytes:
        return cloudpickle.dumps(self, pickle.HIGHEST_PROTOCOL)  # type: ignore

    @classmethod
    def loads(cls: type["DelayedSubmission"], payload: bytes) -> "DelayedSubmission":
        return cls._check(pickle.loads(payload))

    @classmethod
    def _check(cls, obj: tp.Any) -> "DelayedSubmission":
        # relaxed compared to isinstance, objects may come back from another interpreter
        assert obj.__class__.__name__ == cls.__name__, f"Loaded object is {type(obj)} but should be {cls}."
        return obj  # type: ignore


@contextlib.contextmanager
def temporary_save_path(filepath: Path | str) -> tp.Iterator[Path]:
    """Yields a path where to save a file and moves it
    afterward to the provided location (and replaces any
    existing file)
    This avoids leaving half-written ledgers behind if a run is interrupted.

    Note
    ----
    The temporary path is the provided path appended with .save_tmp
    """
    filepath = Path(filepath)
    tmppath = filepath.with_suffix(filepath.suffix + ".save_tmp")
    assert not tmppath.exists(), "A temporary saved file already exists."
    yield tmppath
    if not tmppath.exists():
        raise FileNotFoundError("No file was saved at the temporary path.")
    if filepath.exists():
        os.remove(filepath)
    os.rename(tmppath, filepath)

