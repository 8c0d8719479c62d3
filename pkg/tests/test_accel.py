"""The numpy fallback lane must be selectable and agree with the numba lane."""

import os
import subprocess
import sys

import numpy as np

from slipnet import _accel


def test_flag_parsing():
    assert _accel._env_disabled() == (
        os.environ.get(_accel.DISABLE_ENV, "").strip().lower()
        in ("1", "true", "yes", "on")
    )


def test_env_flag_forces_numpy_lane():
    code = (
        "from slipnet import _accel; "
        "print(_accel.NUMBA_ENABLED)"
    )
    env = dict(os.environ, SLIPNET_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.stdout.strip() == "False"


def test_numpy_lane_filter_results_match(tmp_path):
    """A filtered sequence is identical whichever lane computed it."""
    rng = np.random.default_rng(0)
    x = rng.normal(size=(150, 27))
    from slipnet.core import _median_filter_numpy, median_filter_array

    np.testing.assert_array_equal(median_filter_array(x, 21), _median_filter_numpy(x, 21))
