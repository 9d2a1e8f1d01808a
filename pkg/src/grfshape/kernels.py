"""Numba kernels for the Gibbs sweeps and co-occurrence accumulation.

The kernels operate on plain arrays prepared by :mod:`grfshape.sampler`:

* ``labels``      (H, W) int32, mutated in place
* ``free_sites``  (n_free, 2) int64 rows of (y, x), raster order
* ``unary``       (K,) float64
* ``offsets``     (n_off, 2) int64 rows of (dx, dy)
* ``tables``      (n_off, K, K) float64
* ``loglik``      (H, W, K) float64 per-pixel label log-likelihoods
* ``uniforms``    (n_sweeps, n_free) float64 in [0, 1)
* ``orders``      (m, n_free) int64 permutations of the free-site indices;
                  row ``s % m`` is used for sweep ``s`` (pass a single
                  arange row for raster scans)

One uniform variate is consumed per site update, via the inverse CDF of the
full conditional computed in the log domain with max-subtraction.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sweep(labels, free_sites, unary, offsets, tables, loglik, use_loglik, uniforms, order):
    h, w = labels.shape
    k = unary.shape[0]
    n_off = offsets.shape[0]
    logits = np.empty(k)
    for j in range(free_sites.shape[0]):
        idx = order[j]
        y0 = free_sites[idx, 0]
        x0 = free_sites[idx, 1]
        for kk in range(k):
            logits[kk] = unary[kk]
            if use_loglik:
                logits[kk] += loglik[y0, x0, kk]
        for o in range(n_off):
            dx = offsets[o, 0]
            dy = offsets[o, 1]
            xf = x0 + dx
            yf = y0 + dy
            if 0 <= xf < w and 0 <= yf < h:
                nb = labels[yf, xf]
                for kk in range(k):
                    logits[kk] += tables[o, kk, nb]
            xb = x0 - dx
            yb = y0 - dy
            if 0 <= xb < w and 0 <= yb < h:
                nb = labels[yb, xb]
                for kk in range(k):
                    logits[kk] += tables[o, nb, kk]
        m = logits[0]
        for kk in range(1, k):
            if logits[kk] > m:
                m = logits[kk]
        total = 0.0
        for kk in range(k):
            logits[kk] = np.exp(logits[kk] - m)
            total += logits[kk]
        u = uniforms[idx] * total
        acc = 0.0
        knew = k - 1
        for kk in range(k):
            acc += logits[kk]
            if u < acc:
                knew = kk
                break
        labels[y0, x0] = knew


@njit(cache=True)
def run_sweeps(labels, free_sites, unary, offsets, tables, loglik, use_loglik, uniforms, orders):
    n_orders = orders.shape[0]
    for s in range(uniforms.shape[0]):
        _sweep(
            labels, free_sites, unary, offsets, tables, loglik, use_loglik,
            uniforms[s], orders[s % n_orders],
        )


@njit(cache=True)
def accumulate_cooccurrence(labels, offsets, stats_unary, stats_tables):
    h, w = labels.shape
    for y in range(h):
        for x in range(w):
            stats_unary[labels[y, x]] += 1.0
    for o in range(offsets.shape[0]):
        dx = offsets[o, 0]
        dy = offsets[o, 1]
        x0 = max(0, -dx)
        x1 = w - max(0, dx)
        y0 = max(0, -dy)
        y1 = h - max(0, dy)
        for y in range(y0, y1):
            for x in range(x0, x1):
                stats_tables[o, labels[y, x], labels[y + dy, x + dx]] += 1.0


@njit(cache=True)
def run_sweeps_collect(
    labels, free_sites, unary, offsets, tables, loglik, use_loglik, uniforms, orders,
    thin, do_marginals, marginal_counts, do_stats, stat_offsets, stats_unary, stats_tables,
):
    """Run sweeps, retaining the state every ``thin``-th sweep into the accumulators."""
    h, w = labels.shape
    n_orders = orders.shape[0]
    collected = 0
    for s in range(uniforms.shape[0]):
        _sweep(
            labels, free_sites, unary, offsets, tables, loglik, use_loglik,
            uniforms[s], orders[s % n_orders],
        )
        if (s + 1) % thin == 0:
            if do_marginals:
                for y in range(h):
                    for x in range(w):
                        marginal_counts[y, x, labels[y, x]] += 1
            if do_stats:
                accumulate_cooccurrence(labels, stat_offsets, stats_unary, stats_tables)
            collected += 1
    return collected
