"""Compiled kernels for basis reduction and ball enumeration.

Everything here works on integer bases stored as float64 (exact below
2^53) so that one code path serves both the numba-compiled and the pure
Python fallback build.  The enumeration uses floating bounds inflated by
a relative 1e-9 and re-checks each accepted vector against the exact
integer norm, so boundary radii can round the float bound either way
without ever producing a wrong count.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# Enumeration status codes.
STATUS_OK = 0
STATUS_NODE_BUDGET = 1
STATUS_CAPACITY = 2
STATUS_SINGULAR = 3


@njit(cache=True)
def _gso(b, mu, bstar_sq):
    """Gram-Schmidt coefficients and squared norms for basis rows b."""
    n = b.shape[0]
    bstar = b.copy()
    for i in range(n):
        for j in range(i):
            dot = 0.0
            for d in range(n):
                dot += b[i, d] * bstar[j, d]
            if bstar_sq[j] > 0.0:
                mu[i, j] = dot / bstar_sq[j]
            else:
                mu[i, j] = 0.0
            for d in range(n):
                bstar[i, d] -= mu[i, j] * bstar[j, d]
        s = 0.0
        for d in range(n):
            s += bstar[i, d] * bstar[i, d]
        bstar_sq[i] = s


@njit(cache=True)
def lll_reduce_kernel(b, delta):
    """In-place LLL reduction of the integer-valued rows of b.

    Returns the number of swaps performed.  Textbook variant with a full
    Gram-Schmidt recompute after every swap; the bases this package
    reduces are small (n <= ~40) and near-orthogonal after a few sweeps,
    so simplicity wins over the incremental update.
    """
    n = b.shape[0]
    mu = np.zeros((n, n))
    bstar_sq = np.zeros(n)
    _gso(b, mu, bstar_sq)
    swaps = 0
    k = 1
    while k < n:
        # Size-reduce row k against rows k-1 .. 0.
        changed = False
        for j in range(k - 1, -1, -1):
            q = np.rint(mu[k, j])
            if q != 0.0:
                changed = True
                for d in range(n):
                    b[k, d] -= q * b[j, d]
                for l in range(j):
                    mu[k, l] -= q * mu[j, l]
                mu[k, j] -= q
        if changed:
            _gso(b, mu, bstar_sq)
        if bstar_sq[k] >= (delta - mu[k, k - 1] * mu[k, k - 1]) * bstar_sq[k - 1]:
            k += 1
        else:
            for d in range(n):
                tmp = b[k, d]
                b[k, d] = b[k - 1, d]
                b[k - 1, d] = tmp
            swaps += 1
            _gso(b, mu, bstar_sq)
            if k > 1:
                k -= 1
    return swaps


@njit(cache=True)
def enumerate_norms_kernel(b, rsq, max_nodes, out_norms):
    """Exact squared norms of half the nonzero vectors with |x b|^2 <= rsq.

    b holds integer values.  out_norms receives one entry per accepted
    vector from the half-space where the outermost nonzero coefficient
    is positive (the mirror image is implied).  Depth-first search over
    coefficient intervals: at level i every candidate with partial
    distance inside the inflated bound is visited, so the sweep is
    complete; final acceptance uses the exact integer norm against rsq.
    Returns (count, nodes, status); on a non-zero status the partial
    results are meaningless.
    """
    n = b.shape[0]
    mu = np.zeros((n, n))
    bstar_sq = np.zeros(n)
    _gso(b, mu, bstar_sq)
    for i in range(n):
        if not bstar_sq[i] > 0.0:
            return 0, 0, STATUS_SINGULAR

    bound = rsq * (1.0 + 1e-9) + 1e-9

    x = np.zeros(n)
    hi = np.zeros(n)
    center = np.zeros(n)
    partdist = np.zeros(n + 1)
    restricted = np.zeros(n, dtype=np.bool_)

    count = 0
    nodes = 0
    cap = out_norms.shape[0]

    # Enter the top level.
    i = n - 1
    restricted[i] = True
    center[i] = 0.0
    w = math.sqrt(bound / bstar_sq[i])
    x[i] = 0.0
    hi[i] = math.floor(w)

    while True:
        if x[i] > hi[i]:
            # Level exhausted: retreat.
            i += 1
            if i == n:
                return count, nodes, STATUS_OK
            x[i] += 1.0
            continue
        nodes += 1
        if nodes > max_nodes:
            return count, nodes, STATUS_NODE_BUDGET
        diff = x[i] - center[i]
        dist = partdist[i + 1] + diff * diff * bstar_sq[i]
        if dist > bound:
            # Inside the precomputed interval the 1-d term can still
            # overshoot through rounding; this candidate just fails.
            x[i] += 1.0
            continue
        if i == 0:
            if not (restricted[0] and x[0] == 0.0):
                nrm = 0.0
                for d in range(n):
                    comp = 0.0
                    for j in range(n):
                        comp += x[j] * b[j, d]
                    nrm += comp * comp
                if nrm <= rsq:
                    if count >= cap:
                        return count, nodes, STATUS_CAPACITY
                    out_norms[count] = nrm
                    count += 1
            x[0] += 1.0
            continue
        # Descend.
        partdist[i] = dist
        restricted[i - 1] = restricted[i] and x[i] == 0.0
        i -= 1
        c = 0.0
        for j in range(i + 1, n):
            c -= mu[j, i] * x[j]
        center[i] = c
        w = math.sqrt((bound - partdist[i + 1]) / bstar_sq[i])
        if restricted[i]:
            x[i] = 0.0
            hi[i] = math.floor(w)
        else:
            x[i] = math.ceil(c - w)
            hi[i] = math.floor(c + w)
