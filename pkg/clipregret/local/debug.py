# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import traceback
import typing as tp

from ..core.core import Executor, Job, R
from ..core.utils import DelayedSubmission


class DebugJob(Job[R]):
    """Job evaluated lazily in the current process, on first access"""

    def __init__(self, submission: DelayedSubmission) -> None:
        super().__init__(job_id=Executor.new_job_id("DEBUG"))
        self._submission = submission
        self._trace: str | None = None

    def wait(self) -> None:
        # forces execution.
        if self._submission.done() or self._trace is not None:
            return
        try:
            self._submission.result()
        except Exception:  # pylint: disable=broad-except
            self._trace = traceback.format_exc()

    def _get_outcome_and_result(self) -> tuple[str, tp.Any]:
        self.wait()
        if self._trace is not None:
            return "error", self._trace
        return "success", self._submission._result

    def done(self) -> bool:
        # forces execution, in case the client is waiting on it to become True.
        self.wait()
        return True


class DebugExecutor(Executor):
    """Runs submissions in process, one after the other"""

    def _internal_process_submissions(
        self, delayed_submissions: list[DelayedSubmission]
    ) -> list[Job[tp.Any]]:
        return [DebugJob(ds) for ds in delayed_submissions]
