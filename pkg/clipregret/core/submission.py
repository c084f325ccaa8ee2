# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import pickle
import traceback

import cloudpickle

from . import logger, utils


def process_job(payload: bytes) -> bytes:
    """Loads a pickled submission, runs it and pickles the outcome

    Parameter
    ---------
    payload: bytes
        cloudpickled DelayedSubmission

    Returns
    -------
    bytes
        cloudpickled ("success", result) or ("error", formatted traceback)
    """
    try:
        delayed = utils.DelayedSubmission.loads(payload)
        result = delayed.result()
        logger.get_logger().debug("Job completed successfully")
        return cloudpickle.dumps(("success", result), pickle.HIGHEST_PROTOCOL)  # type: ignore
    except Exception as error:  # pylint: disable=broad-except
        logger.exception(f"Submitted job triggered an exception: {error!r}")
        return cloudpickle.dumps(("error", traceback.format_exc()), pickle.HIGHEST_PROTOCOL)  # type: ignore
