"""Brute-force enumeration oracle for tiny domains.

Enumerates all ``K^(W*H)`` labellings (or all completions of a partial
clamp) to compute exact partition functions, marginals, statistics
expectations and log-likelihood gradients. Everything here is meant as a
ground truth for testing the samplers and learners, not for production-size
grids: the configuration count is capped.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DimensionMismatch,
    DomainTooLarge,
    IncompatibleModels,
    MissingAppearance,
)
from .model import (
    FREE,
    Evidence,
    GridDomain,
    GrfModel,
    NeighborhoodStructure,
    SufficientStatistics,
    offset_slices,
)

DEFAULT_ENUMERATION_CAP = 2**24

_CHUNK = 1 << 14


def _loglik_field(model: GrfModel, evidence: Evidence | None, appearance) -> np.ndarray | None:
    if evidence is None or evidence.image is None:
        return None
    if appearance is None:
        raise MissingAppearance("evidence has an image but no appearance model was given")
    return appearance.likelihood_field(evidence.image)


def _free_configuration_count(
    model: GrfModel, evidence: Evidence | None, max_configs: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Base labelling plus row/col indices of free nodes; checks the cap."""
    h, w = model.domain.shape
    base = np.zeros((h, w), dtype=np.int32)
    if evidence is not None and evidence.clamps is not None:
        evidence.validate(model.domain, model.labels)
        clamps = evidence.clamps
        base = np.where(clamps >= 0, clamps, 0).astype(np.int32)
        rows, cols = np.nonzero(clamps == FREE)
    else:
        if evidence is not None:
            evidence.validate(model.domain, model.labels)
        rows, cols = np.nonzero(np.ones((h, w), dtype=bool))
    k = model.labels.count
    n_free = len(rows)
    if k**n_free > max_configs:
        raise DomainTooLarge(
            f"{k}^{n_free} configurations exceed the enumeration cap {max_configs}"
        )
    return base, rows, cols


def _iter_labellings(
    base: np.ndarray, rows: np.ndarray, cols: np.ndarray, k: int
) -> Iterator[np.ndarray]:
    """Yield chunks of all completions of ``base`` at the free positions."""
    n_free = len(rows)
    total = k**n_free
    if n_free == 0:
        yield base[None, :, :].copy()
        return
    powers = k ** np.arange(n_free, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = ((idx[:, None] // powers[None, :]) % k).astype(np.int32)
        labs = np.repeat(base[None, :, :], len(idx), axis=0)
        labs[:, rows, cols] = digits
        yield labs


def _batch_log_weights(
    model: GrfModel, labs: np.ndarray, loglik: np.ndarray | None
) -> np.ndarray:
    pot = model.potentials
    lw = pot.unary[labs].sum(axis=(1, 2))
    for i, a in enumerate(pot.offsets):
        src, dst = offset_slices(labs, a)
        if src.size:
            lw += pot.tables[i][src, dst].sum(axis=(1, 2))
    if loglik is not None:
        k = loglik.shape[-1]
        flat = loglik.reshape(-1, k)
        labs2 = labs.reshape(labs.shape[0], -1)
        lw += flat[np.arange(flat.shape[0])[None, :], labs2].sum(axis=1)
    return lw


def log_partition_function(
    model: GrfModel,
    evidence: Evidence | None = None,
    appearance=None,
    max_configs: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """``log Z``: log-sum-exp of the energies of all admissible labellings.

    With evidence, the sum runs over the labellings consistent with the
    clamps and each term carries the image likelihood, i.e. the result is
    the log of the unnormalised posterior mass.
    """
    loglik = _loglik_field(model, evidence, appearance)
    base, rows, cols = _free_configuration_count(model, evidence, max_configs)
    parts = [
        logsumexp(_batch_log_weights(model, labs, loglik))
        for labs in _iter_labellings(base, rows, cols, model.labels.count)
    ]
    return float(logsumexp(parts))


def exact_marginals(
    model: GrfModel,
    evidence: Evidence | None = None,
    appearance=None,
    max_configs: int = DEFAULT_ENUMERATION_CAP,
) -> np.ndarray:
    """Exact per-node label marginals ``(H, W, K)`` under the prior or posterior."""
    loglik = _loglik_field(model, evidence, appearance)
    base, rows, cols = _free_configuration_count(model, evidence, max_configs)
    k = model.labels.count
    log_z = log_partition_function(model, evidence, appearance, max_configs)
    h, w = model.domain.shape
    marg = np.zeros((h, w, k))
    for labs in _iter_labellings(base, rows, cols, k):
        p = np.exp(_batch_log_weights(model, labs, loglik) - log_z)
        labs2 = labs.reshape(labs.shape[0], -1)
        for s in range(h * w):
            marg[s // w, s % w] += np.bincount(labs2[:, s], weights=p, minlength=k)
    return marg


def exact_statistics_expectation(
    model: GrfModel,
    evidence: Evidence | None = None,
    appearance=None,
    max_configs: int = DEFAULT_ENUMERATION_CAP,
    offsets: Sequence[Sequence[int]] | None = None,
) -> SufficientStatistics:
    """Exact expectation of the co-occurrence statistics under prior or posterior."""
    loglik = _loglik_field(model, evidence, appearance)
    base, rows, cols = _free_configuration_count(model, evidence, max_configs)
    k = model.labels.count
    offs = model.structure.pairwise if offsets is None else tuple(
        (int(a[0]), int(a[1])) for a in offsets
    )
    log_z = log_partition_function(model, evidence, appearance, max_configs)
    h, w = model.domain.shape
    unary = np.zeros(k)
    tables = np.zeros((len(offs), k, k))
    for labs in _iter_labellings(base, rows, cols, k):
        p = np.exp(_batch_log_weights(model, labs, loglik) - log_z)
        labs2 = labs.reshape(labs.shape[0], -1)
        for s in range(h * w):
            unary += np.bincount(labs2[:, s], weights=p, minlength=k)
        for i, a in enumerate(offs):
            src, dst = offset_slices(labs, a)
            if src.size:
                codes = src.reshape(len(p), -1).astype(np.int64) * k + dst.reshape(len(p), -1)
                weights = np.broadcast_to(p[:, None], codes.shape).ravel()
                tables[i] += np.bincount(
                    codes.ravel(), weights=weights, minlength=k * k
                ).reshape(k, k)
    return SufficientStatistics(unary=unary, offsets=offs, tables=tables, kind="expectation")


def exact_loglik_gradient(
    model: GrfModel,
    evidence: Evidence,
    appearance=None,
    max_configs: int = DEFAULT_ENUMERATION_CAP,
) -> SufficientStatistics:
    """Exact likelihood gradient: posterior minus prior statistics expectation."""
    post = exact_statistics_expectation(model, evidence, appearance, max_configs)
    prior = exact_statistics_expectation(model, None, None, max_configs)
    return SufficientStatistics(
        unary=post.unary - prior.unary,
        offsets=post.offsets,
        tables=post.tables - prior.tables,
        kind="difference",
    )


def distributions_equal(
    m1: GrfModel,
    m2: GrfModel,
    tol: float,
    max_configs: int = DEFAULT_ENUMERATION_CAP,
) -> bool:
    """True iff ``max_y |p1(y) - p2(y)| <= tol``, by full enumeration."""
    if m1.domain != m2.domain or m1.labels.count != m2.labels.count:
        raise IncompatibleModels("models must share domain and label count")
    base, rows, cols = _free_configuration_count(m1, None, max_configs)
    k = m1.labels.count
    lz1 = log_partition_function(m1, max_configs=max_configs)
    lz2 = log_partition_function(m2, max_configs=max_configs)
    worst = 0.0
    for labs in _iter_labellings(base, rows, cols, k):
        p1 = np.exp(_batch_log_weights(m1, labs, None) - lz1)
        p2 = np.exp(_batch_log_weights(m2, labs, None) - lz2)
        worst = max(worst, float(np.abs(p1 - p2).max()))
        if worst > tol:
            return False
    return worst <= tol


def modularity_defect(v: np.ndarray) -> float:
    """Worst four-point defect ``|v(k1,k1') + v(k2,k2') - v(k1,k2') - v(k2,k1')|``.

    Zero iff ``v`` is modular, i.e. expressible as ``f(k) + g(k')``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise DimensionMismatch(f"expected a square table, got shape {v.shape}")
    d = v[:, None, :, None] + v[None, :, None, :] - v[:, None, None, :] - v[None, :, :, None]
    return float(np.abs(d).max())


def _exact_rank(rows: set[tuple[int, ...]]) -> int:
    mat = [[Fraction(x) for x in r] for r in sorted(rows)]
    if not mat:
        return 0
    n_cols = len(mat[0])
    rank = 0
    for c in range(n_cols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        pivot_row = mat[rank]
        for i in range(len(mat)):
            if i != rank and mat[i][c] != 0:
                f = mat[i][c] / pivot_row[c]
                mat[i] = [x - f * y for x, y in zip(mat[i], pivot_row)]
        rank += 1
        if rank == len(mat):
            break
    return rank


def gauge_rank(
    domain: GridDomain, structure: NeighborhoodStructure
) -> tuple[int, bool]:
    """Rank of the boundary-class indicator vectors; identifiability check.

    Each node ``t`` gets a vector of dimension ``2|A| - 1``: a leading 1,
    then per nonzero offset ``a`` the indicators of ``t + a`` and ``t - a``
    lying inside the domain. The structure's potentials are identifiable up
    to per-offset constants iff these vectors span the full space.
    """
    offs = structure.pairwise
    dim = 1 + 2 * len(offs)
    classes: set[tuple[int, ...]] = set()
    w, h = domain.width, domain.height
    for y in range(h):
        for x in range(w):
            z = [1]
            for dx, dy in offs:
                z.append(1 if (0 <= x + dx < w and 0 <= y + dy < h) else 0)
                z.append(1 if (0 <= x - dx < w and 0 <= y - dy < h) else 0)
            classes.add(tuple(z))
    rank = _exact_rank(classes)
    return rank, rank == dim
