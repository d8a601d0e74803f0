"""Gaussian (Isserlis-Wick) representation of monomer-dimer partition functions.

Z = E[prod_i (xi_i + x_i)] for xi ~ N(0, W), where W carries the dimer
weights off the diagonal and any diagonal making it positive semi-definite.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph_core import GraphSizeError, ImitativeModel, MDModel

HAFNIAN_CAP = 20
EXACT_CAP = 20
IMITATIVE_CAP = 12
PSD_TOL = 1e-10
CHUNK = 1 << 16


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    samples: int


def psd_diagonal(w, n: int, diagonal=None) -> np.ndarray:
    """Covariance matrix with ``w`` off the diagonal.

    ``w`` is an edge->weight mapping or an (n, n) array. By default
    W_ii = sum_{j != i} w_ij, which is diagonally dominant and hence PSD;
    pass ``diagonal`` to override.
    """
    if isinstance(w, np.ndarray):
        W = np.array(w, dtype=float)
        np.fill_diagonal(W, 0.0)
    else:
        W = np.zeros((n, n))
        for (i, j), v in dict(w).items():
            W[i, j] = W[j, i] = v
    if (W < 0).any():
        raise ValueError("dimer weights must be >= 0")
    if diagonal is None:
        np.fill_diagonal(W, W.sum(axis=1))
    else:
        np.fill_diagonal(W, np.asarray(diagonal, dtype=float))
    return W


def covariance(m: MDModel, diagonal=None) -> np.ndarray:
    return psd_diagonal(m.w, m.n, diagonal)


def certify_psd(W: np.ndarray, tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric W with eigenvalues clipped at 0.

    Raises NotPSDError if the smallest eigenvalue is below -tol.
    """
    if not np.allclose(W, W.T):
        raise NotPSDError("covariance matrix is not symmetric")
    if W.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    vals, vecs = np.linalg.eigh(W)
    if vals[0] < -tol:
        raise NotPSDError(f"smallest eigenvalue {vals[0]:.3e} < -{tol:g}")
    return np.clip(vals, 0.0, None), vecs


def sqrt_psd(W: np.ndarray) -> np.ndarray:
    """Symmetric square root, valid for semidefinite W."""
    vals, vecs = certify_psd(W)
    return (vecs * np.sqrt(vals)) @ vecs.T


# ------------------------------------------------------------------ hafnians


def wick_pairing_sum(W: np.ndarray, A) -> float:
    """Sum over pair partitions of A of prod W_ij (hafnian of W restricted to A).

    The first remaining element is paired with each other one in turn;
    memoised on the bitmask of remaining elements.
    """
    A = sorted(A)
    k = len(A)
    if k > HAFNIAN_CAP:
        raise GraphSizeError(f"wick_pairing_sum: |A| = {k} exceeds cap {HAFNIAN_CAP}")
    if k % 2:
        return 0.0
    sub = np.asarray(W, dtype=float)[np.ix_(A, A)] if k else np.zeros((0, 0))

    @lru_cache(maxsize=None)
    def haf(mask: int) -> float:
        if mask == 0:
            return 1.0
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        total = []
        s = rest
        while s:
            b = s & -s
            j = b.bit_length() - 1
            if sub[i, j] != 0.0:
                total.append(sub[i, j] * haf(rest ^ b))
            s ^= b
        return math.fsum(total)

    return haf((1 << k) - 1)


def hafnian_table(W: np.ndarray) -> np.ndarray:
    """Hafnians of every principal submatrix, indexed by vertex bitmask.

    Same pairing recursion as :func:`wick_pairing_sum`, tabulated bottom-up.
    """
    n = W.shape[0]
    if n > HAFNIAN_CAP:
        raise GraphSizeError(f"hafnian_table: n = {n} exceeds cap {HAFNIAN_CAP}")
    table = np.zeros(1 << n)
    table[0] = 1.0
    for mask in range(1, 1 << n):
        if bin(mask).count("1") % 2:
            continue
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        acc = []
        s = rest
        while s:
            b = s & -s
            j = b.bit_length() - 1
            if W[i, j] != 0.0:
                acc.append(W[i, j] * table[rest ^ b])
            s ^= b
        table[mask] = math.fsum(acc)
    return table


def _complement_products(x: np.ndarray) -> np.ndarray:
    """prod_{i not in A} x_i for every bitmask A."""
    n = len(x)
    out = np.ones(1 << n)
    for i in range(n):
        bit = 1 << i
        idx = np.arange(1 << n)
        out[(idx & bit) == 0] *= x[i]
    return out


def gaussian_partition_exact(m: MDModel, diagonal=None) -> float:
    """Z as sum over subsets A of haf(W_A) * prod_{i not in A} x_i (not logged)."""
    if m.n > EXACT_CAP:
        raise GraphSizeError(f"gaussian_partition_exact: n = {m.n} exceeds cap {EXACT_CAP}")
    W = covariance(m, diagonal)
    haf = hafnian_table(W)
    return math.fsum(haf * _complement_products(np.array(m.x)))


def imitative_gaussian_enum(m: ImitativeModel, diagonal=None) -> float:
    """Imitative Gaussian identity evaluated exactly (not logged).

    Each subset A (the dimer-covered vertices) contributes haf(W_A) times the
    monomer activities of A^c times exp(J_ij) for every pair on the same side.
    """
    n = m.n
    if n > IMITATIVE_CAP:
        raise GraphSizeError(f"imitative_gaussian_enum: n = {n} exceeds cap {IMITATIVE_CAP}")
    W = covariance(m.base, diagonal)
    J = m.coupling_matrix()
    haf = hafnian_table(W)
    xs = _complement_products(np.array(m.base.x))
    iu, ju = np.triu_indices(n, 1)
    terms = []
    for mask in range(1 << n):
        if haf[mask] == 0.0:
            continue
        inside = np.array([(mask >> k) & 1 for k in range(n)], dtype=bool)
        same = inside[iu] == inside[ju]
        terms.append(haf[mask] * xs[mask] * math.exp(J[iu, ju][same].sum()))
    return math.fsum(terms)


# --------------------------------------------------------------- Monte Carlo


def _stream(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))


def _chunks(samples: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK, samples - c * CHUNK)) for c in range((samples + CHUNK - 1) // CHUNK)]


def _draw_chunk(root: np.ndarray, x: np.ndarray, seed: int, chunk: int, size: int):
    z = _stream(seed, chunk).standard_normal((size, len(x)))
    return z @ root + x  # rows are xi + x


def _sample_rows(m: MDModel, samples: int, seed: int, workers: int, diagonal):
    root = sqrt_psd(covariance(m, diagonal))
    x = np.array(m.x)
    jobs = _chunks(samples)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda c: _draw_chunk(root, x, seed, *c), jobs))
    return [_draw_chunk(root, x, seed, *c) for c in jobs]


def gaussian_partition_mc(
    m: MDModel, samples: int, seed: int = 0, workers: int = 1, diagonal=None
) -> MCEstimate:
    """Monte Carlo estimate of E[prod(xi_i + x_i)] and its standard error.

    Samples are drawn in fixed-size chunks, each from its own Philox stream
    keyed by (seed, chunk), so the result does not depend on ``workers``.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    vals = np.concatenate([np.prod(rows, axis=1) for rows in _sample_rows(m, samples, seed, workers, diagonal)])
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), samples)


def monomer_prob_gaussian(
    m: MDModel, i: int, samples: int, seed: int = 0, workers: int = 1, diagonal=None
) -> MCEstimate:
    """Ratio estimator of the monomer probability at ``i``.

    Numerator x_i prod_{j != i}(xi_j + x_j) and denominator prod_j(xi_j + x_j)
    share one sample pool; the error bar is the delta-method one.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    nums, dens = [], []
    for rows in _sample_rows(m, samples, seed, workers, diagonal):
        others = np.prod(np.delete(rows, i, axis=1), axis=1)
        nums.append(m.x[i] * others)
        dens.append(others * rows[:, i])
    a, b = np.concatenate(nums), np.concatenate(dens)
    ma, mb = a.mean(), b.mean()
    r = ma / mb
    cov = np.cov(a, b, ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (mb * mb * samples)
    return MCEstimate(float(r), float(math.sqrt(max(var, 0.0))), samples)
