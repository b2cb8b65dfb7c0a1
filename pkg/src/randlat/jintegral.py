"""Monte Carlo estimators for the ball-constraint integrals J_a^(n)[c].

J_a^(n)[c] integrates, over a unit-ball vectors in R^n, the indicator
that the weighted sum sum c_i x_i also lands in the unit ball.  The
direct estimator samples exactly that.  The reduced estimator works in
only a dimensions: rotation invariance turns the integral into an
a-dimensional one against the parallelotope-volume weight [x_1..x_a]^(n-a)
times a ratio of sphere areas, which is what makes large n tractable.
Everything is carried in log scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetError
from .geometry import log_ball_volume, log_sphere_area

__all__ = ["JEstimate", "j_integral", "log_j1_exact", "worst_term", "reduced_prefactor"]

SHARD = 1 << 16

METHODS = ("direct", "reduced")


@dataclass(frozen=True)
class JEstimate:
    """A Monte Carlo estimate of log J_a^(n)[c] with its relative error."""

    log_mean: float
    rel_se: float
    samples: int
    method: str
    n: int
    a: int
    c: Tuple[float, ...]
    degenerate: bool = False

    def csv_row(self, seed="") -> str:
        return ",".join(
            [
                self.method,
                str(self.a),
                str(self.n),
                ";".join(repr(float(x)) for x in self.c),
                repr(self.log_mean),
                repr(self.rel_se),
                str(self.samples),
                str(seed),
            ]
        )


def _check_c(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or len(c) == 0:
        raise ValueError("c must be a non-empty vector")
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("weights must be positive and finite")
    return c


def log_j1_exact(n: int, c: float) -> float:
    """J_1^(n)[c] = V_n min(1, 1/c)^n: the smaller of two nested balls."""
    if c <= 0:
        raise ValueError(f"need c > 0, got {c}")
    return log_ball_volume(n) + n * min(0.0, -math.log(c))


def reduced_prefactor(n: int, a: int) -> float:
    """log of prod_{j=n-a+1}^n omega_j / prod_{j=1}^a omega_j."""
    out = 0.0
    for j in range(n - a + 1, n + 1):
        out += log_sphere_area(j)
    for j in range(1, a + 1):
        out -= log_sphere_area(j)
    return out


def _ball_points(rng, count: int, a: int, dim: int) -> np.ndarray:
    """count stacks of a points uniform in the unit ball of R^dim."""
    g = rng.standard_normal((count, a, dim))
    g /= np.linalg.norm(g, axis=2, keepdims=True)
    r = rng.uniform(size=(count, a, 1)) ** (1.0 / dim)
    return g * r


def _shard_sizes(samples: int):
    sizes = []
    left = samples
    while left > 0:
        take = min(SHARD, left)
        sizes.append(take)
        left -= take
    return sizes


def j_integral(
    n: int,
    c: Sequence[float],
    method: str = "reduced",
    samples: int = 10**5,
    seed=0,
) -> JEstimate:
    """Monte Carlo estimate of J_a^(n)[c].

    Samples are processed in fixed-size shards, each with its own
    counter-based stream spawned from the seed, and merged in shard order,
    so results are identical however the shards are scheduled.
    """
    c = _check_c(c)
    a = len(c)
    if n < a:
        raise ValueError(f"need n >= a, got n={n} < a={a}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if samples < 10**3:
        raise BudgetError(f"need at least 10^3 samples, got {samples}")

    sizes = _shard_sizes(samples)

    if method == "direct":
        hits = 0
        for idx, size in enumerate(sizes):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(idx,))))
            x = _ball_points(rng, size, a, n)
            s = np.einsum("j,sjd->sd", c, x)
            hits += int(np.count_nonzero(np.einsum("sd,sd->s", s, s) < 1.0))
        if hits == 0:
            return JEstimate(-math.inf, math.inf, samples, method, n, a, tuple(c), True)
        log_mean = a * log_ball_volume(n) + math.log(hits) - math.log(samples)
        rel_se = math.sqrt(max(1.0 / hits - 1.0 / samples, 0.0))
        return JEstimate(log_mean, rel_se, samples, method, n, a, tuple(c), False)

    # reduced: a-dimensional draws against the parallelotope-power weight
    log_l1_parts = []
    log_l2_parts = []
    for idx, size in enumerate(sizes):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(idx,))))
        x = _ball_points(rng, size, a, a)
        s = np.einsum("j,sjd->sd", c, x)
        ok = np.einsum("sd,sd->s", s, s) < 1.0
        gram = x @ np.swapaxes(x, 1, 2)
        sign, logdet = np.linalg.slogdet(gram)
        logw = np.where(ok & (sign > 0), 0.5 * (n - a) * logdet, -np.inf)
        log_l1_parts.append(logsumexp(logw))
        log_l2_parts.append(logsumexp(2.0 * logw))
    log_l1 = logsumexp(log_l1_parts)
    log_l2 = logsumexp(log_l2_parts)
    if log_l1 == -math.inf:
        return JEstimate(-math.inf, math.inf, samples, method, n, a, tuple(c), True)
    log_mean_w = float(log_l1) - math.log(samples)
    log_mean = reduced_prefactor(n, a) + a * log_ball_volume(a) + log_mean_w
    # rel SE of the mean: sqrt(N L2 / L1^2 - 1) / sqrt(N), in logs
    ratio = float(log_l2) + math.log(samples) - 2.0 * float(log_l1)
    rel_var = math.expm1(ratio) if ratio < 700 else math.inf
    if not math.isfinite(rel_var) or rel_var < 0:
        rel_se = math.inf
    else:
        rel_se = math.sqrt(rel_var / samples)
    degenerate = not math.isfinite(rel_se)
    return JEstimate(log_mean, rel_se, samples, method, n, a, tuple(c), degenerate)


def worst_term(k: int, n: int, f: Optional[float] = None, j_est: Optional[JEstimate] = None, log_f: Optional[float] = None) -> float:
    """log of the dominant remainder term 2^(-k/2) f^(k/2-1) V_n^(1-k) J_(k-1)^(n)[1..1].

    j_est must estimate J with a = k-1 unit weights at this n; pass either
    f or log_f.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if (f is None) == (log_f is None):
        raise ValueError("pass exactly one of f, log_f")
    if log_f is None:
        if f <= 0:
            raise ValueError(f"need f > 0, got {f}")
        log_f = math.log(f)
    if j_est is None:
        raise ValueError("j_est is required")
    if j_est.n != n or j_est.a != k - 1:
        raise ValueError(
            f"j_est was computed for (n={j_est.n}, a={j_est.a}), need (n={n}, a={k - 1})"
        )
    if any(abs(ci - 1.0) > 1e-12 for ci in j_est.c):
        raise ValueError("j_est must use unit weights c = [1, ..., 1]")
    return (
        -0.5 * k * math.log(2.0)
        + (0.5 * k - 1.0) * log_f
        + (1.0 - k) * log_ball_volume(n)
        + j_est.log_mean
    )
