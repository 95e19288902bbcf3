import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hazardlab import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def draws(seed, n):
    rng = np.random.default_rng(seed)
    risk = rng.integers(0, 5, n) / 4.0
    t = rng.integers(1, 10, n).astype(np.float64)
    ev = rng.uniform(size=n) < 0.6
    return rng, risk, t, ev


@needs_numba
class TestBackendsAgree:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000), st.integers(1, 60))
    def test_concordance(self, seed, n):
        _, risk, t, ev = draws(seed, n)
        assert K.concordance_sums_numba(risk, t, ev) == K.concordance_sums_numpy(risk, t, ev)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000), st.integers(1, 30), st.integers(1, 30))
    def test_auc(self, seed, a, b):
        rng = np.random.default_rng(seed)
        cs, cw = rng.integers(0, 4, a) / 3.0, rng.uniform(1, 3, a)
        ks, kw = rng.integers(0, 4, b) / 3.0, rng.uniform(1, 3, b)
        got = K.auc_pair_sums_numba(cs, cw, ks, kw)
        np.testing.assert_allclose(got, K.auc_pair_sums_numpy(cs, cw, ks, kw), rtol=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000))
    def test_otsu(self, seed):
        hist = np.random.default_rng(seed).integers(0, 50, 256).astype(np.float64)
        np.testing.assert_array_equal(K.otsu_scores_numba(hist), K.otsu_scores_numpy(hist))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000), st.integers(1, 80), st.integers(2, 20))
    def test_dcal(self, seed, n, bins):
        rng = np.random.default_rng(seed)
        s = np.r_[rng.uniform(size=n), 0.0, 1.0]
        c = rng.uniform(size=n + 2) < 0.5
        np.testing.assert_allclose(K.dcal_histogram_numba(s, c, bins), K.dcal_histogram_numpy(s, c, bins),
                                   rtol=1e-12, atol=1e-12)


class TestSelection:
    def test_env_flag_forces_numpy(self):
        env = dict(os.environ, HAZARDLAB_DISABLE_NUMBA="1")
        out = subprocess.run([sys.executable, "-c", "from hazardlab import _kernels; print(_kernels.backend())"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"

    def test_thread_cap_is_accepted(self):
        env = dict(os.environ, HAZARDLAB_THREADS="1")
        code = "from hazardlab import _kernels; print(_kernels.backend())"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() in ("numba", "numpy")

    def test_dispatch_matches_numpy(self):
        _, risk, t, ev = draws(0, 40)
        assert K.concordance_sums(risk, t, ev) == K.concordance_sums_numpy(risk, t, ev)
