"""Pure-numpy implementation of the per-event history-sum kernels.

Twin of the compiled extension ``_hawkes_c``; same API, selected by
``backend`` when the extension is unavailable. Targets are processed in
chunks so the pairwise (target, source) work stays cache-sized.
"""

from __future__ import annotations

import math

import numpy as np

_CHUNK = 128


def point_logintensity_terms(src_times, src_dm, tgt_times, tgt_prefix,
                             mu, K, alpha, c, p, need_grad=True):
    """log lambda at each target plus its ETAS-scale partial derivatives.

    src_times/src_dm: candidate parent times (ascending) and magnitudes
    above M0. tgt_prefix[i] counts sources strictly before target i. For
    each target t with S = mu + sum_h g_h over its prefix, returns
    (loglam, grad) where grad[:, k] = d log S / d (mu, K, alpha, c, p);
    grad is None when need_grad is false.
    """
    src_times = np.asarray(src_times, dtype=float)
    src_dm = np.asarray(src_dm, dtype=float)
    tgt_times = np.asarray(tgt_times, dtype=float)
    tgt_prefix = np.asarray(tgt_prefix, dtype=np.int64)
    n = tgt_times.size
    loglam = np.empty(n)
    grad = np.empty((n, 5)) if need_grad else None

    logmu = math.log(mu) if mu > 0 else -math.inf
    if K > 0:
        src_w = math.log(K) + alpha * src_dm
        # running max of the source log-weights bounds every kernel term
        # (log u >= 0), giving an overflow-safe shift without a second pass
        run_max = np.maximum.accumulate(src_w) if src_w.size else src_w
    else:
        src_w = run_max = np.zeros(0)

    for start in range(0, n, _CHUNK):
        idx = slice(start, min(start + _CHUNK, n))
        pre = tgt_prefix[idx]
        width = int(pre.max()) if pre.size else 0
        if K == 0.0 or width == 0:
            loglam[idx] = logmu
            if need_grad:
                grad[idx] = 0.0
                grad[idx, 0] = 1.0 / mu if mu > 0 else np.nan
            continue
        shift = np.where(pre > 0, run_max[np.maximum(pre - 1, 0)], -np.inf)
        shift = np.maximum(shift, logmu)
        t = tgt_times[idx]
        mask = np.arange(width)[None, :] < pre[:, None]
        dt = np.where(mask, t[:, None] - src_times[None, :width], 1.0)
        u = dt / c + 1.0
        logu = np.log(u)
        e = np.exp(src_w[None, :width] - shift[:, None] - p * logu,
                   where=mask, out=np.zeros((pre.size, width)))
        s0 = e.sum(axis=1)
        base = np.exp(logmu - shift)
        total = base + s0
        loglam[idx] = shift + np.log(total)
        if need_grad:
            g = grad[idx]
            g[:, 0] = np.exp(-shift) / total                      # d/d mu
            g[:, 1] = s0 / (K * total)                            # d/d K
            g[:, 2] = (e * src_dm[None, :width]).sum(axis=1) / total
            g[:, 3] = (e * ((u - 1.0) / u)).sum(axis=1) * (p / c) / total
            g[:, 4] = -(e * logu).sum(axis=1) / total
    return loglam, grad
