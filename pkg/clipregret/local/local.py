# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import concurrent.futures
import os
import pickle
import typing as tp

from ..core import submission
from ..core.core import Executor, Job, R
from ..core.utils import DelayedSubmission, UncompletedRunError


class LocalJob(Job[R]):
    """Job running in a worker process of a LocalExecutor pool"""

    def __init__(self, future: "concurrent.futures.Future[bytes]") -> None:
        super().__init__(job_id=Executor.new_job_id("LOCAL"))
        self._future = future

    def wait(self) -> None:
        concurrent.futures.wait([self._future])

    def done(self) -> bool:
        return self._future.done()

    def _get_outcome_and_result(self) -> tuple[str, tp.Any]:
        try:
            payload = self._future.result()
        except Exception as e:  # worker died (eg: BrokenProcessPool)
            raise UncompletedRunError(f"Job {self.job_id} did not complete: {e!r}") from e
        outcome: tuple[str, tp.Any] = pickle.loads(payload)
        return outcome


class LocalExecutor(Executor):
    """Runs submissions in a pool of worker processes.

    Submissions are cloudpickled, so closures can be submitted as well.

    Parameters
    ----------
    max_workers: int
        number of worker processes (defaults to the number of cpus)
    """

    def __init__(self, max_workers: int | None = None) -> None:
        super().__init__({"max_workers": max_workers or os.cpu_count() or 1})

    @classmethod
    def _valid_parameters(cls) -> set[str]:
        return {"max_workers"}

    def _internal_process_submissions(
        self, delayed_submissions: list[DelayedSubmission]
    ) -> list[Job[tp.Any]]:
        workers = min(int(self.parameters["max_workers"]), len(delayed_submissions))
        pool = concurrent.futures.ProcessPoolExecutor(max_workers=max(workers, 1))
        try:
            jobs: list[Job[tp.Any]] = [
                LocalJob(pool.submit(submission.process_job, ds.dumps())) for ds in delayed_submissions
            ]
        finally:
            # pending submissions still run, the pool only stops accepting new ones
            pool.shutdown(wait=False)
        return jobs
