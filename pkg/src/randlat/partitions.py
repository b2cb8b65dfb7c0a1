"""Singleton-free set partitions and the exact moment main term.

The leading term of the k-th centered count moment is a sum over partitions
of {1..k} with every block of size >= 2:

    M_k(f) = sum_P 2^(k - #P) * f^(#P)

and (2f)^(-k/2) M_k(f) tends to the Gaussian moment (k-1)!! as f grows.
threshold_c gives the exponential volume-growth rate c_k above which the
k-th moment blows up instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Tuple

from .geometry import log_v_tilde

__all__ = [
    "SetPartition",
    "set_partitions",
    "partitions_no_singletons",
    "exact_main_term",
    "normalized_main_term",
    "limit_moment",
    "mixed_limit_moment",
    "double_factorial",
    "threshold_c",
    "MomentLimit",
]

# a partition is a tuple of blocks; each block a sorted tuple of 1-based labels
SetPartition = Tuple[Tuple[int, ...], ...]


def set_partitions(k: int) -> Iterator[SetPartition]:
    """All set partitions of {1..k}, each block and block list sorted.

    Standard first-element recursion: element 1 joins each existing block or
    opens a new one.  k=0 yields the empty partition.
    """
    if k < 0:
        raise ValueError(f"need k >= 0, got {k}")

    def rec(elems):
        if not elems:
            yield ()
            return
        head, rest = elems[0], elems[1:]
        for sub in rec(rest):
            yield ((head,),) + sub
            for i, block in enumerate(sub):
                yield sub[:i] + ((head,) + block,) + sub[i + 1 :]

    for part in rec(tuple(range(1, k + 1))):
        yield tuple(sorted(part))


def partitions_no_singletons(k: int) -> List[SetPartition]:
    """The singleton-free partitions P'(k), in sorted order."""
    return sorted(p for p in set_partitions(k) if all(len(b) >= 2 for b in p))


def exact_main_term(k: int, f):
    """sum over P'(k) of 2^(k-#P) f^(#P); exact when f is int or Fraction."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if f <= 0:
        raise ValueError(f"need f > 0, got {f}")
    if isinstance(f, int):
        f = Fraction(f)
    total = 0 * f if isinstance(f, Fraction) else 0.0
    for p in partitions_no_singletons(k):
        total += 2 ** (k - len(p)) * f ** len(p)
    return total


def normalized_main_term(k: int, f) -> float:
    """(2f)^(-k/2) * exact_main_term(k, f); tends to limit_moment(k)."""
    m = exact_main_term(k, f)
    if k % 2 == 0:
        scale = Fraction(2 * f) ** (k // 2) if isinstance(m, Fraction) else (2 * f) ** (k // 2)
        out = m / scale
        return out if isinstance(out, Fraction) else float(out)
    return float(m) / (2.0 * float(f)) ** (k / 2.0)


def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def limit_moment(k: int) -> int:
    """Gaussian absolute moment target: 0 for odd k, (k-1)!! for even k."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    return 0 if k % 2 else double_factorial(k - 1)


def mixed_limit_moment(kvec, cvec) -> float:
    """prod c_j^(k_j/2) (k_j-1)!!, or 0 if any k_j is odd.

    The limit of E[prod Z_j^{k_j}] for independent centered Gaussians with
    variances c_j.
    """
    kvec = list(kvec)
    cvec = [float(c) for c in cvec]
    if len(kvec) != len(cvec):
        raise ValueError("kvec and cvec must have the same length")
    if any(k < 1 for k in kvec):
        raise ValueError("moment orders must be >= 1")
    if any(c <= 0 for c in cvec):
        raise ValueError("variances must be positive")
    if any(k % 2 for k in kvec):
        return 0.0
    out = 1.0
    for k, c in zip(kvec, cvec):
        out *= c ** (k / 2.0) * double_factorial(k - 1)
    return out


def threshold_c(k: int) -> float:
    """The growth-rate threshold c_k = (k-1)/(k-2) log(k-1) - log k; c_2 = inf.

    Equivalently -2 log Vtilde_{k-1} / (k-2), which ties the threshold to the
    equal-weights parallelotope supremum (tested to 1e-12).
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if k == 2:
        return math.inf
    return (k - 1) / (k - 2) * math.log(k - 1) - math.log(k)


@dataclass(frozen=True)
class MomentLimit:
    """The k-th moment limit together with its blow-up threshold."""

    k: int
    value: int
    threshold: float

    @classmethod
    def of(cls, k: int) -> "MomentLimit":
        return cls(k=k, value=limit_moment(k), threshold=threshold_c(k) if k >= 2 else math.inf)


def _threshold_identity_gap(k: int) -> float:
    """|c_k - (-2 log Vtilde_{k-1} / (k-2))|, exposed for the identity test."""
    return abs(threshold_c(k) - (-2.0 * log_v_tilde(k - 1) / (k - 2)))
