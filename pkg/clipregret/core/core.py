# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import abc
import itertools
import typing as tp
import warnings

from . import logger, utils

# R as in "Result", so yes it's covariant.
# pylint: disable=typevar-name-incorrect-variance
R = tp.TypeVar("R", covariant=True)

_JOB_COUNTER = itertools.count()


class Job(abc.ABC, tp.Generic[R]):
    """Access to a submitted run and its result.

    Parameters
    ----------
    job_id: str
        the id of the job, unique within the interpreter
    """

    def __init__(self, job_id: str) -> None:
        self._job_id = job_id

    @property
    def job_id(self) -> str:
        return self._job_id

    def result(self) -> R:
        return self.results()[0]

    def results(self) -> list[R]:
        """Waits for and outputs the result of the submitted function

        Returns
        -------
        output
            the output of the submitted function, in a list

        Raises
        ------
        Exception
            Any exception raised by the job
        """
        self.wait()
        outcome, result = self._get_outcome_and_result()
        if outcome == "error":
            job_exception = self.exception()
            if job_exception is None:
                raise RuntimeError("Unknown job exception")
            raise job_exception  # pylint: disable=raising-bad-type
        return [result]

    def exception(self) -> BaseException | None:
        """Waits for completion and returns (not raise) the
        exception containing the error log of the job

        Returns
        -------
        Exception/None
            the exception if any was raised during the job.

        Raises
        ------
        UncompletedRunError
            In case the job never completed
        """
        self.wait()
        try:
            outcome, trace = self._get_outcome_and_result()
        except utils.UncompletedRunError as e:
            return e
        if outcome == "error":
            return utils.FailedRunError(
                f"Job {self.job_id} failed during processing with trace:\n"
                f"----------------------\n{trace}\n"
                "----------------------"
            )
        return None

    @abc.abstractmethod
    def _get_outcome_and_result(self) -> tuple[str, tp.Any]:
        """Getter for the output of the submitted function.

        Returns
        -------
        outcome
            the outcome of the job: either "error" or "success"
        result
            the output of the submitted function, or the formatted traceback on error
        """

    def wait(self) -> None:
        """Blocks until the job is done"""

    @abc.abstractmethod
    def done(self) -> bool: ...

    @property
    def state(self) -> str:
        return "DONE" if self.done() else "RUNNING"

    def __repr__(self) -> str:
        return f'{self.__class__.__name__}<job_id={self.job_id}, state="{self.state}">'


class Executor(abc.ABC):
    """Base run executor.

    Parameters
    ----------
    parameters: dict
        initial executor parameters, see update_parameters
    """

    def __init__(self, parameters: dict[str, tp.Any] | None = None) -> None:
        self.parameters: dict[str, tp.Any] = {}
        if parameters:
            self.update_parameters(**parameters)

    @classmethod
    def name(cls) -> str:
        n = cls.__name__
        if n.endswith("Executor"):
            n = n[: -len("Executor")]
        return n.lower()

    @staticmethod
    def new_job_id(prefix: str) -> str:
        return f"{prefix}_{next(_JOB_COUNTER)}"

    @abc.abstractmethod
    def _internal_process_submissions(
        self, delayed_submissions: list[utils.DelayedSubmission]
    ) -> list[Job[tp.Any]]: ...

    def map_array(self, fn: tp.Callable[..., R], *iterable: tp.Iterable[tp.Any]) -> list[Job[R]]:
        """A parallel equivalent of the map() built-in function

        Parameters
        ----------
        fn: callable
            function to compute
        *iterable: Iterable
            lists of arguments that are passed as arguments to fn.

        Returns
        -------
        List[Job]
            A list of Job instances, in the order of the arguments.

        Example
        -------
        configs = [config_a, config_b]
        executor.map_array(simulator.run, configs)
        """
        submissions = [utils.DelayedSubmission(fn, *args) for args in zip(*iterable, strict=True)]
        if len(submissions) == 0:
            warnings.warn("Received an empty job array", stacklevel=2)
            return []
        logger.get_logger().info(f"{self.name()} executor processing {len(submissions)} submission(s)")
        return self._internal_process_submissions(submissions)

    def update_parameters(self, **kwargs: tp.Any) -> None:
        """Update executor parameters."""
        invalid = set(kwargs) - self._valid_parameters()
        if invalid:
            raise NameError(
                f"Unknown parameter(s) {sorted(invalid)} for {self.name()} executor. "
                f"Valid parameters: {sorted(self._valid_parameters())}"
            )
        self.parameters.update(kwargs)

    @classmethod
    def _valid_parameters(cls) -> set[str]:
        """Parameters that can be set through update_parameters"""
        return set()
