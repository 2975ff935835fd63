"""Simulation and analysis toolkit for a high-field vapor-cell quantum memory."""

import json as _json
import os as _os
from pathlib import Path as _Path

_data = _Path(__file__).with_name("data")
if "VQM_DATA_DIR" not in _os.environ and _data.is_dir():
    _os.environ["VQM_DATA_DIR"] = str(_data)

from ._core import *  # noqa: E402,F401,F403
from ._core import __version__  # noqa: E402,F401
from . import _core  # noqa: E402


def run_pipeline(scenario, stages="all", out_dir=None):
    """Run pipeline stages on a Scenario and return the run record as a dict.

    When out_dir is given, record.json and the CSV sidecars are written there.
    """
    text = _core._run_pipeline(scenario, stages, str(out_dir) if out_dir is not None else "")
    return _json.loads(text)
