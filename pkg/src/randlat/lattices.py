"""Random unimodular lattices and exact ball counting.

Lattices are stored as an integer row basis plus a scalar: the Hecke
construction with a prime index p gives an integer matrix of determinant
p, and multiplying by p^(-1/n) lands exactly on determinant 1.  Keeping
the integer part separate lets enumeration work on exact integer norms,
with the scale folded into the radius instead of the vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .errors import BudgetError
from .geometry import log_ball_volume

__all__ = [
    "CountCurve",
    "Lattice",
    "count_curve",
    "count_in_ball",
    "default_prime",
    "hecke_lattice",
    "identity_lattice",
    "lll_reduce",
    "next_prime",
    "sample_lattice",
    "shortest_values",
]

DEFAULT_NODE_BUDGET = 10**8
LLL_DELTA = 0.99

_KNOWN_PRIMES = set()


def _is_prime(p: int) -> bool:
    if p in _KNOWN_PRIMES:
        return True
    from sympy import isprime

    if isprime(int(p)):
        if len(_KNOWN_PRIMES) < 4096:
            _KNOWN_PRIMES.add(p)
        return True
    return False


def next_prime(m: int) -> int:
    """Smallest prime >= m."""
    from sympy import nextprime

    if m <= 2:
        return 2
    return int(nextprime(m - 1))


def default_prime(n: int) -> int:
    """Default Hecke index, the next prime >= 10^4 n^2.

    The sampler equidistributes as p grows; this schedule keeps the
    index comfortably ahead of the count scales the experiments use
    while leaving p visible in every report for sensitivity checks.
    """
    return next_prime(10**4 * n * n)


@dataclass(frozen=True, eq=False)
class Lattice:
    """A unimodular lattice given by integer basis rows times a scale."""

    n: int
    int_basis: np.ndarray
    scale: float
    provenance: str
    p: Optional[int] = None
    coeffs: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        m = np.array(self.int_basis, dtype=np.int64)
        if m.shape != (self.n, self.n):
            raise ValueError(f"basis must be {self.n}x{self.n}, got {m.shape}")
        sign, logdet = np.linalg.slogdet(m.astype(float))
        if sign == 0 or not math.isfinite(logdet):
            raise ValueError("basis rows are linearly dependent")
        total = logdet + self.n * math.log(self.scale)
        if abs(total) > 1e-9:
            raise ValueError(f"determinant is exp({total:.3e}), not 1")
        m.setflags(write=False)
        object.__setattr__(self, "int_basis", m)

    @property
    def basis(self) -> np.ndarray:
        """The real basis, rows scaled to determinant 1."""
        return self.int_basis.astype(float) * self.scale

    def basis_text(self) -> str:
        """Whitespace-separated row-major export of the real basis."""
        return "\n".join(
            " ".join("%.17g" % v for v in row) for row in self.basis
        )


def hecke_lattice(n: int, p: int, coeffs: Sequence[int]) -> Lattice:
    """The index-p sublattice basis (e_i + a_i e_n, p e_n), rescaled.

    Rows are (1,0,...,0,a_1), ..., (0,...,1,a_{n-1}), (0,...,0,p) times
    p^(-1/n).
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not _is_prime(int(p)):
        raise ValueError(f"p must be prime, got {p}")
    a = [int(v) for v in coeffs]
    if len(a) != n - 1 or any(v < 0 or v >= p for v in a):
        raise ValueError("need n-1 coefficients in [0, p)")
    m = np.eye(n, dtype=np.int64)
    for i, v in enumerate(a):
        m[i, n - 1] = v
    m[n - 1, n - 1] = p
    scale = math.exp(-math.log(p) / n)
    return Lattice(n, m, scale, "hecke", p=int(p), coeffs=tuple(a))


def sample_lattice(n: int, p: Optional[int] = None, rng=None, seed=None) -> Lattice:
    """Draw a random Hecke point: uniform coefficients mod p.

    Requires p >= 10^3 (smaller primes sample a visibly discrete set);
    construct tiny cases explicitly via hecke_lattice.  Pass either a
    numpy Generator or a seed.
    """
    if p is None:
        p = default_prime(n)
    elif p < 1000:
        raise ValueError(f"sampling needs p >= 1000, got {p}")
    if rng is None:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(0 if seed is None else seed))
        )
    coeffs = rng.integers(0, int(p), size=n - 1)
    return hecke_lattice(n, p, coeffs)


def identity_lattice(n: int) -> Lattice:
    """The integer lattice Z^n."""
    return Lattice(n, np.eye(n, dtype=np.int64), 1.0, "explicit")


def from_integer_basis(rows, provenance: str = "explicit") -> Lattice:
    """Lattice from integer basis rows, rescaled to determinant 1."""
    m = np.array(rows, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"need a square matrix, got shape {m.shape}")
    n = m.shape[0]
    sign, logdet = np.linalg.slogdet(m.astype(float))
    if sign == 0 or not math.isfinite(logdet):
        raise ValueError("basis rows are linearly dependent")
    return Lattice(n, m, math.exp(-logdet / n), provenance)


def lll_reduce(L: Lattice, delta: float = LLL_DELTA) -> Lattice:
    """LLL-reduced basis of the same lattice.

    The result is verified: the change-of-basis matrix solved from the
    old basis must be integral with determinant +-1, and the integer
    matrix product must reproduce the reduced rows exactly.
    """
    if not 0.25 < delta <= 0.9999:
        raise ValueError(f"Lovasz parameter out of range: {delta}")
    b = L.int_basis.astype(float)
    _kernels.lll_reduce_kernel(b, delta)
    reduced = np.rint(b).astype(np.int64)
    if not np.array_equal(reduced.astype(float), b):
        raise ValueError("reduction left non-integer entries")
    u = np.linalg.solve(L.int_basis.astype(float).T, reduced.astype(float).T).T
    u_int = np.rint(u).astype(np.int64)
    if not np.array_equal(u_int @ L.int_basis, reduced):
        raise ValueError("reduction produced a different lattice")
    sign, logdet = np.linalg.slogdet(u_int.astype(float))
    if sign == 0 or abs(logdet) > 1e-6:
        raise ValueError("change of basis is not unimodular")
    return Lattice(
        L.n, reduced, L.scale, L.provenance, p=L.p, coeffs=L.coeffs
    )


def _radius_sq_int(L: Lattice, x: float) -> float:
    """Squared enumeration radius in integer coordinates for volume x.

    The real radius is r = exp((log x - log V_n)/n); dividing by the
    lattice scale moves it to the integer basis.  A result within 1e-9
    relative of an integer snaps to it, so volumes that place the ball
    boundary exactly on a shell (x = V_n m^{n/2} on Z^n, say) count the
    boundary vectors despite log-scale rounding.
    """
    rsq = math.exp(
        2.0 * (math.log(x) - log_ball_volume(L.n)) / L.n
        - 2.0 * math.log(L.scale)
    )
    snap = round(rsq)
    if snap >= 1 and abs(rsq - snap) <= min(0.25, 1e-9 * rsq):
        return float(snap)
    return rsq


def _enumerate_norms(L: Lattice, x: float, max_nodes: int) -> np.ndarray:
    """Exact squared integer norms (half-space) within the volume-x ball."""
    if x < 0:
        raise ValueError(f"need volume x >= 0, got {x}")
    if x == 0:
        return np.empty(0)
    b = lll_reduce(L).int_basis.astype(float)
    rsq = _radius_sq_int(L, x)
    cap = max(1024, int(4.0 * x) + 64)
    while True:
        out = np.empty(cap)
        count, _, status = _kernels.enumerate_norms_kernel(b, rsq, max_nodes, out)
        if status == _kernels.STATUS_OK:
            return out[:count]
        if status == _kernels.STATUS_NODE_BUDGET:
            raise BudgetError(
                f"enumeration exceeded {max_nodes} nodes at volume {x}"
            )
        if status == _kernels.STATUS_CAPACITY:
            cap *= 4
            if cap > 10**8:
                raise BudgetError(
                    f"more than {10**8} vectors inside volume {x}"
                )
            continue
        raise ValueError("basis became singular during enumeration")


def count_in_ball(L: Lattice, x: float, max_nodes: int = DEFAULT_NODE_BUDGET) -> int:
    """Number of nonzero lattice vectors in the closed ball of volume x.

    The count is exact for the log-scale radius; enumeration failure
    raises BudgetError rather than undercounting.
    """
    return 2 * len(_enumerate_norms(L, x, max_nodes))


@dataclass(frozen=True)
class CountCurve:
    """Ball counts of one lattice on an increasing volume grid."""

    n: int
    p: Optional[int]
    grid: Tuple[float, ...]
    counts: Tuple[int, ...]
    shortest: Tuple[float, ...]
    replicate_id: int = 0

    CSV_HEADER = "replicate_id,p,n,x,N,R,Z"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if any(c % 2 for c in self.counts):
            raise ValueError("counts must be even (central symmetry)")
        if any(b < a for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("counts must be non-decreasing")
        if any(b < a for a, b in zip(self.shortest, self.shortest[1:])):
            raise ValueError("shortest values must be non-decreasing")

    @property
    def residuals(self) -> Tuple[float, ...]:
        """R(x) = N(x) - x per grid point."""
        return tuple(c - x for c, x in zip(self.counts, self.grid))

    @property
    def z_values(self) -> Tuple[float, ...]:
        """(N - x)/sqrt(2x) per grid point (0 where x = 0)."""
        return tuple(
            (c - x) / math.sqrt(2.0 * x) if x > 0 else 0.0
            for c, x in zip(self.counts, self.grid)
        )

    def csv_rows(self) -> Tuple[str, ...]:
        p = "" if self.p is None else str(self.p)
        return tuple(
            "%d,%s,%d,%s,%d,%s,%s"
            % (self.replicate_id, p, self.n, repr(float(x)), c, repr(c - x), repr(z))
            for x, c, z in zip(self.grid, self.counts, self.z_values)
        )


def count_curve(
    L: Lattice,
    grid: Sequence[float],
    max_nodes: int = DEFAULT_NODE_BUDGET,
    replicate_id: int = 0,
) -> CountCurve:
    """Counts on a whole volume grid from one enumeration at the top."""
    xs = [float(x) for x in grid]
    if not xs:
        raise ValueError("grid must be non-empty")
    if any(x < 0 for x in xs) or any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("grid must be non-negative and strictly increasing")
    norms = np.sort(_enumerate_norms(L, xs[-1], max_nodes))
    counts = []
    for x in xs:
        if x == 0:
            counts.append(0)
            continue
        rsq = _radius_sq_int(L, x)
        counts.append(2 * int(np.searchsorted(norms, rsq, side="right")))
    log_scale = math.log(L.scale)
    shortest = []
    for v in norms:
        val = math.exp(
            log_ball_volume(L.n) + 0.5 * L.n * math.log(v) + L.n * log_scale
        )
        shortest.extend((val, val))
    return CountCurve(
        L.n, L.p, tuple(xs), tuple(counts), tuple(shortest), replicate_id
    )


def shortest_values(
    L: Lattice, count: int, max_nodes: int = DEFAULT_NODE_BUDGET
) -> Tuple[float, ...]:
    """The count smallest ball volumes V_n |v_j|^n over nonzero vectors.

    Both of each +-v pair contribute, matching the jumps of the counting
    function.  The enumeration volume starts near the expected need
    (mean count equals volume) and doubles until enough vectors appear.
    """
    if count < 1:
        raise ValueError(f"need count >= 1, got {count}")
    x = float(max(2 * count, 8))
    for _ in range(60):
        curve = count_curve(L, [x], max_nodes)
        if len(curve.shortest) >= count:
            return curve.shortest[:count]
        x *= 2.0
    raise BudgetError(f"could not find {count} vectors below volume {x}")
