"""Hot inner loops with two interchangeable backends.

Every kernel exists as a numba ``@njit`` loop and as a pure-numpy
vectorised version.  The active backend is chosen once at import:

* ``HAZARDLAB_DISABLE_NUMBA=1`` forces the numpy path,
* a missing numba install falls back to numpy silently,
* ``HAZARDLAB_THREADS`` caps the numba thread pool.

Both backends are exported (``*_numpy`` / ``*_numba``) so tests can check
them against each other and ``benchmarks/bench_kernels.py`` can time them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _env_flag("HAZARDLAB_DISABLE_NUMBA")

if HAVE_NUMBA and not os.environ.get("NUMBA_THREADING_LAYER"):
    # the portable pool; avoids version warnings from an installed TBB
    numba.config.THREADING_LAYER = "workqueue"

if HAVE_NUMBA and os.environ.get("HAZARDLAB_THREADS"):
    try:
        _n = max(1, int(os.environ["HAZARDLAB_THREADS"]))
        numba.set_num_threads(min(_n, numba.config.NUMBA_NUM_THREADS))
    except ValueError:
        pass


# ---------------------------------------------------------------------------
# Harrell concordance
# ---------------------------------------------------------------------------


def concordance_sums_numpy(risk, time, event):
    """Return ``(credit, admissible)`` over pairs with ``t_i < t_j`` and ``i`` an event."""
    risk = np.asarray(risk, dtype=np.float64)
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    adm = (time[:, None] < time[None, :]) & event[:, None]
    gt = risk[:, None] > risk[None, :]
    eq = risk[:, None] == risk[None, :]
    # per-row partial sums, then a fixed-order reduction
    credit_rows = (adm & gt).sum(axis=1) + 0.5 * (adm & eq).sum(axis=1)
    return float(credit_rows.sum()), float(adm.sum())


# ---------------------------------------------------------------------------
# Weighted case/control AUC at one time point
# ---------------------------------------------------------------------------


def auc_pair_sums_numpy(case_s, case_w, ctrl_s, ctrl_w):
    """Weighted ``P(S_case < S_ctrl) + 0.5 P(tie)`` numerator and denominator."""
    case_s = np.asarray(case_s, dtype=np.float64)
    ctrl_s = np.asarray(ctrl_s, dtype=np.float64)
    case_w = np.asarray(case_w, dtype=np.float64)
    ctrl_w = np.asarray(ctrl_w, dtype=np.float64)
    lt = (case_s[:, None] < ctrl_s[None, :]).astype(np.float64)
    eq = (case_s[:, None] == ctrl_s[None, :]).astype(np.float64)
    per_case = (lt + 0.5 * eq) @ ctrl_w
    num = float(np.sum(case_w * per_case))
    den = float(case_w.sum() * ctrl_w.sum())
    return num, den


# ---------------------------------------------------------------------------
# Otsu between-class variance for all 256 thresholds
# ---------------------------------------------------------------------------


def otsu_scores_numpy(hist):
    """Between-class variance (times n^2) for class split ``<= t`` / ``> t``."""
    hist = np.asarray(hist, dtype=np.float64)
    levels = np.arange(hist.size, dtype=np.float64)
    n = hist.sum()
    total = (levels * hist).sum()
    n0 = np.cumsum(hist)
    s0 = np.cumsum(levels * hist)
    n1 = n - n0
    out = np.zeros(hist.size)
    ok = (n0 > 0) & (n1 > 0)
    out[ok] = (s0[ok] * n - total * n0[ok]) ** 2 / (n0[ok] * n1[ok])
    return out


# ---------------------------------------------------------------------------
# D-calibration histogram
# ---------------------------------------------------------------------------


def dcal_histogram_numpy(surv, censored, bins):
    surv = np.clip(np.asarray(surv, dtype=np.float64), 0.0, 1.0)
    censored = np.asarray(censored, dtype=bool)
    edges = np.linspace(0.0, 1.0, bins + 1)
    hist = np.zeros(bins)

    hard = ~censored | (surv <= 0.0)
    idx = np.minimum((surv[hard] * bins).astype(np.int64), bins - 1)
    np.add.at(hist, idx, 1.0)

    soft = surv[~hard]
    if soft.size:
        lo = edges[:-1][None, :]
        hi = edges[1:][None, :]
        mass = np.maximum(0.0, np.minimum(hi, soft[:, None]) - lo) / soft[:, None]
        hist += mass.sum(axis=0)
    return hist


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def concordance_sums_numba(risk, time, event):
        n = risk.shape[0]
        credit_rows = np.zeros(n)
        adm_rows = np.zeros(n)
        for i in prange(n):
            if not event[i]:
                continue
            c = 0.0
            a = 0.0
            for j in range(n):
                if time[i] < time[j]:
                    a += 1.0
                    if risk[i] > risk[j]:
                        c += 1.0
                    elif risk[i] == risk[j]:
                        c += 0.5
            credit_rows[i] = c
            adm_rows[i] = a
        credit = 0.0
        adm = 0.0
        for i in range(n):
            credit += credit_rows[i]
            adm += adm_rows[i]
        return credit, adm

    @njit(cache=True)
    def auc_pair_sums_numba(case_s, case_w, ctrl_s, ctrl_w):
        num = 0.0
        for i in range(case_s.shape[0]):
            row = 0.0
            for j in range(ctrl_s.shape[0]):
                if case_s[i] < ctrl_s[j]:
                    row += ctrl_w[j]
                elif case_s[i] == ctrl_s[j]:
                    row += 0.5 * ctrl_w[j]
            num += case_w[i] * row
        return num, case_w.sum() * ctrl_w.sum()

    @njit(cache=True)
    def otsu_scores_numba(hist):
        m = hist.shape[0]
        n = 0.0
        total = 0.0
        for i in range(m):
            n += hist[i]
            total += i * hist[i]
        out = np.zeros(m)
        n0 = 0.0
        s0 = 0.0
        for t in range(m):
            n0 += hist[t]
            s0 += t * hist[t]
            n1 = n - n0
            if n0 > 0 and n1 > 0:
                out[t] = (s0 * n - total * n0) ** 2 / (n0 * n1)
        return out

    @njit(cache=True)
    def dcal_histogram_numba(surv, censored, bins):
        hist = np.zeros(bins)
        for i in range(surv.shape[0]):
            s = min(max(surv[i], 0.0), 1.0)
            if not censored[i] or s <= 0.0:
                b = min(int(s * bins), bins - 1)
                hist[b] += 1.0
            else:
                for b in range(bins):
                    lo = b / bins
                    hi = (b + 1) / bins
                    part = min(hi, s) - lo
                    if part > 0.0:
                        hist[b] += part / s
        return hist


def _as_f8(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def _as_b(x):
    return np.ascontiguousarray(x, dtype=np.bool_)


def concordance_sums(risk, time, event):
    if USE_NUMBA:
        c, a = concordance_sums_numba(_as_f8(risk), _as_f8(time), _as_b(event))
        return float(c), float(a)
    return concordance_sums_numpy(risk, time, event)


def auc_pair_sums(case_s, case_w, ctrl_s, ctrl_w):
    if USE_NUMBA:
        num, den = auc_pair_sums_numba(_as_f8(case_s), _as_f8(case_w), _as_f8(ctrl_s), _as_f8(ctrl_w))
        return float(num), float(den)
    return auc_pair_sums_numpy(case_s, case_w, ctrl_s, ctrl_w)


def otsu_scores(hist):
    if USE_NUMBA:
        return otsu_scores_numba(_as_f8(hist))
    return otsu_scores_numpy(hist)


def dcal_histogram(surv, censored, bins):
    if USE_NUMBA:
        return dcal_histogram_numba(_as_f8(surv), _as_b(censored), int(bins))
    return dcal_histogram_numpy(surv, censored, bins)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
