"""Admissible integer matrices for lattice moment sums.

An m x k integer matrix D is <k,q>-admissible when no column vanishes, the
gcd of all entries is 1, and the columns split into pivot positions
nu_1 < ... < nu_m (with nu_1 = 1) carrying q times the identity and free
positions mu_j whose entries vanish on every row whose pivot lies further
right.  Each such matrix carries the weight (e_1/q ... e_m/q)^n where
e_i = gcd(eps_i, q) and eps_i are its elementary divisors.

The moment sum for centered counts runs over admissible matrices with at
least two non-zero entries in each row; its leading term comes from the
q = 1 matrices with a single +-1 per column.  lift_matrix realizes the
correspondence between (subset, smaller matrix) pairs and full admissible
matrices that underlies that restriction, with multiplicity 2^#S given by
the fully singleton columns S.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import BudgetError

__all__ = [
    "AdmissibleMatrix",
    "is_admissible",
    "find_division",
    "enumerate_admissible",
    "elementary_divisors",
    "rogers_weight",
    "rogers_weight_bound",
    "row_support_partition",
    "lift_matrix",
    "canonical_row_sort",
    "singleton_columns",
]

Rows = Tuple[Tuple[int, ...], ...]

FILTERS = ("all", "new_rogers", "diagonal_unit")


def _as_rows(matrix) -> Rows:
    """Coerce to a tuple-of-tuples of Python ints, validating integrality."""
    if hasattr(matrix, "rows"):
        matrix = matrix.rows
    rows = []
    for row in matrix:
        out = []
        for v in row:
            iv = int(v)
            if iv != v:
                raise ValueError(f"non-integer entry {v!r}")
            out.append(iv)
        rows.append(tuple(out))
    if not rows or not rows[0]:
        raise ValueError("matrix must be non-empty")
    k = len(rows[0])
    if any(len(r) != k for r in rows):
        raise ValueError("ragged matrix")
    return tuple(rows)


def find_division(rows: Rows, q: int) -> Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """The unique division (nu; mu) of the columns, or None if none exists.

    Scanned left to right: the next pivot column must equal q times the
    next unit vector, and a free column must vanish on all rows whose
    pivot has not appeared yet.  The two options are mutually exclusive
    (a pivot column is non-zero exactly on such a row), so no backtracking
    is needed and the division is unique when it exists.
    """
    m, k = len(rows), len(rows[0])
    nu: List[int] = []
    mu: List[int] = []
    t = 0
    for col in range(k):
        if t < m and rows[t][col] == q and all(rows[i][col] == (q if i == t else 0) for i in range(m)):
            nu.append(col + 1)
            t += 1
        elif all(rows[i][col] == 0 for i in range(t, m)):
            if col == 0:
                return None  # column 1 must be the first pivot
            mu.append(col + 1)
        else:
            return None
    if t != m:
        return None
    return tuple(nu), tuple(mu)


def is_admissible(matrix, q: int) -> bool:
    """Full admissibility predicate for an integer matrix at modulus q."""
    if q < 1:
        raise ValueError(f"need q >= 1, got {q}")
    rows = _as_rows(matrix)
    m, k = len(rows), len(rows[0])
    if m > k:
        return False
    if any(all(rows[i][j] == 0 for i in range(m)) for j in range(k)):
        return False
    g = 0
    for row in rows:
        for v in row:
            g = math.gcd(g, v)
    if g != 1:
        return False
    return find_division(rows, q) is not None


def elementary_divisors(matrix) -> List[int]:
    """Elementary divisors eps_1 | eps_2 | ... via integer Smith reduction.

    Exact over arbitrary-precision ints; the product of the first r
    divisors equals the gcd of the r x r minors.
    """
    rows = _as_rows(matrix)
    a = [list(r) for r in rows]
    m, k = len(a), len(a[0])
    if all(v == 0 for r in a for v in r):
        raise ValueError("zero matrix has no elementary divisors")

    t = 0
    while t < min(m, k):
        # smallest non-zero entry of the working submatrix becomes the pivot
        best = None
        for i in range(t, m):
            for j in range(t, k):
                if a[i][j] != 0 and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        bi, bj = best
        a[t], a[bi] = a[bi], a[t]
        for row in a:
            row[t], row[bj] = row[bj], row[t]
        while True:
            if a[t][t] < 0:
                a[t] = [-v for v in a[t]]
            dirty = False
            for i in range(t + 1, m):
                if a[i][t] != 0:
                    step = a[i][t] // a[t][t]
                    for j in range(t, k):
                        a[i][j] -= step * a[t][j]
                    if a[i][t] != 0:
                        a[t], a[i] = a[i], a[t]
                        dirty = True
            for j in range(t + 1, k):
                if a[t][j] != 0:
                    step = a[t][j] // a[t][t]
                    for i in range(t, m):
                        a[i][j] -= step * a[i][t]
                    if a[t][j] != 0:
                        for row in a:
                            row[t], row[j] = row[j], row[t]
                        dirty = True
            if not dirty:
                break
        t += 1

    diag = [abs(a[i][i]) for i in range(t) if a[i][i] != 0]
    # fold the diagonal into a divisibility chain: gcd forward, lcm back
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            g = math.gcd(diag[i], diag[j])
            diag[i], diag[j] = g, diag[i] * diag[j] // g
    return diag


@dataclass(frozen=True)
class AdmissibleMatrix:
    """A <k,q>-admissible matrix with its division and elementary divisors.

    nu, mu use 1-based column indexing; eps are the elementary divisors and
    e the capped divisors gcd(eps_i, q) entering the Rogers weight.
    """

    q: int
    m: int
    k: int
    rows: Rows
    nu: Tuple[int, ...]
    mu: Tuple[int, ...]
    eps: Tuple[int, ...]

    @classmethod
    def from_rows(cls, rows, q: int) -> "AdmissibleMatrix":
        rows = _as_rows(rows)
        if not is_admissible(rows, q):
            raise ValueError(f"matrix {rows} is not <{len(rows[0])},{q}>-admissible")
        nu, mu = find_division(rows, q)
        eps = tuple(elementary_divisors(rows))
        return cls(q=q, m=len(rows), k=len(rows[0]), rows=rows, nu=nu, mu=mu, eps=eps)

    @property
    def e(self) -> Tuple[int, ...]:
        return tuple(math.gcd(eps, self.q) for eps in self.eps)

    @property
    def max_abs_entry(self) -> int:
        return max(abs(v) for row in self.rows for v in row)

    def nonzeros_per_row(self) -> Tuple[int, ...]:
        return tuple(sum(1 for v in row if v != 0) for row in self.rows)

    def row_gcds(self) -> Tuple[int, ...]:
        return tuple(math.gcd(self.q, *row) for row in self.rows)

    def to_json(self) -> str:
        return json.dumps(
            {
                "q": self.q,
                "m": self.m,
                "k": self.k,
                "rows": [list(r) for r in self.rows],
                "nu": list(self.nu),
                "mu": list(self.mu),
                "eps": list(self.eps),
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "AdmissibleMatrix":
        data = json.loads(text)
        got = cls.from_rows(data["rows"], data["q"])
        for key in ("m", "k"):
            if getattr(got, key) != data[key]:
                raise ValueError(f"inconsistent {key} in serialized matrix")
        if list(got.nu) != data["nu"] or list(got.mu) != data["mu"] or list(got.eps) != data["eps"]:
            raise ValueError("serialized division or divisors disagree with the matrix")
        return got


def rogers_weight(D: AdmissibleMatrix, n: int) -> float:
    """log of the weight (e_1/q ... e_m/q)^n; always <= 0."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return float(n) * sum(math.log(e) - math.log(D.q) for e in D.e)


def row_support_partition(D: AdmissibleMatrix, mu_order: Optional[Sequence[int]] = None):
    """Greedy partition of the rows by the free columns supporting them.

    For each free column mu'_j (in the given order, default natural), A_j
    collects the rows with a non-zero entry there that no earlier free
    column claimed, and g_j = gcd(q and the claimed entries).  When every
    row has at least two non-zero entries the A_j partition all m rows.
    Returns a list of (free_column, A_j, g_j) with 1-based indices.
    """
    order = tuple(mu_order) if mu_order is not None else D.mu
    if sorted(order) != sorted(D.mu):
        raise ValueError("mu_order must be a permutation of the free columns")
    seen: set = set()
    out = []
    for col in order:
        support = tuple(i + 1 for i in range(D.m) if D.rows[i][col - 1] != 0 and i + 1 not in seen)
        seen.update(support)
        g = D.q
        for i in support:
            g = math.gcd(g, D.rows[i - 1][col - 1])
        out.append((col, support, g))
    return out


def rogers_weight_bound(D: AdmissibleMatrix, n: int, mu_order: Optional[Sequence[int]] = None) -> float:
    """Upper bound n * sum_j log(g_j / q) for the log Rogers weight."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    parts = row_support_partition(D, mu_order)
    return float(n) * sum(math.log(g) - math.log(D.q) for _, _, g in parts)


def _passes_filter(rows: Rows, q: int, filter: str) -> bool:
    if filter == "all":
        return True
    counts = [sum(1 for v in row if v != 0) for row in rows]
    if filter == "new_rogers":
        return all(c >= 2 for c in counts)
    if filter == "diagonal_unit":
        if q != 1 or any(c < 2 for c in counts):
            return False
        if any(abs(v) > 1 for row in rows for v in row):
            return False
        k = len(rows[0])
        return all(sum(1 for i in range(len(rows)) if rows[i][j] != 0) == 1 for j in range(k))
    raise ValueError(f"unknown filter {filter!r}; expected one of {FILTERS}")


def enumerate_admissible(
    k: int,
    q: int,
    max_entry: int,
    filter: str = "all",
    budget: int = 10**7,
) -> List[AdmissibleMatrix]:
    """All <k,q>-admissible matrices with |entries| <= max_entry.

    Recurses column by column, branching between the forced next pivot
    column and a free column over the rows already pivoted; every
    admissible matrix is produced exactly once because its division is
    unique.  Output is sorted by row count, then row-major lexicographic.

    Raises BudgetError when the search tree exceeds `budget` nodes.
    """
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if q < 1:
        raise ValueError(f"need q >= 1, got {q}")
    if max_entry < 0:
        raise ValueError(f"need max_entry >= 0, got {max_entry}")
    if filter not in FILTERS:
        raise ValueError(f"unknown filter {filter!r}; expected one of {FILTERS}")

    if max_entry < q:
        return []  # every admissible matrix has a pivot entry equal to q
    if filter == "diagonal_unit" and q != 1:
        return []

    values = range(-max_entry, max_entry + 1)
    found: List[Rows] = []
    nodes = 0

    m_top = k if q == 1 else k - 1
    for m in range(1, m_top + 1):
        # columns[j] is the full column as a length-m tuple
        def rec(col: int, t: int, cols: List[Tuple[int, ...]]):
            nonlocal nodes
            nodes += 1
            if nodes > budget:
                raise BudgetError(
                    f"admissible enumeration exceeded {budget} nodes at k={k}, q={q}, max_entry={max_entry}"
                )
            if col == k:
                if t == m:
                    rows = tuple(tuple(c[i] for c in cols) for i in range(m))
                    g = 0
                    for row in rows:
                        for v in row:
                            g = math.gcd(g, v)
                    if g == 1 and _passes_filter(rows, q, filter):
                        found.append(rows)
                return
            remaining = k - col
            if t < m:
                pivot = tuple(q if i == t else 0 for i in range(m))
                rec(col + 1, t + 1, cols + [pivot])
            # a free column needs t >= 1 (else it would vanish identically)
            if t >= 1 and remaining > m - t:
                for head in itertools.product(values, repeat=t):
                    if all(v == 0 for v in head):
                        continue
                    free = head + (0,) * (m - t)
                    rec(col + 1, t, cols + [free])

        rec(0, 0, [])

    found.sort(key=lambda rows: (len(rows), rows))
    return [AdmissibleMatrix.from_rows(rows, q) for rows in found]


def lift_matrix(A: Iterable[int], D, k: int, q: Optional[int] = None) -> Rows:
    """Embed a matrix over the columns A into m + k - #A rows over 1..k.

    Column j_l of the result carries column l of D on the original rows;
    each complement column gets a fresh row holding a single q.  Pass
    D=None (with q) for A empty, which yields q times the identity.  The
    result is admissible only after canonical_row_sort.
    """
    A = sorted(set(A))
    if any(j < 1 or j > k for j in A):
        raise ValueError(f"A must be a subset of 1..{k}")
    if D is None:
        if A:
            raise ValueError("D may be omitted only for empty A")
        if q is None:
            raise ValueError("q is required when A is empty")
        m, rows = 0, ()
    else:
        if q is None:
            q = D.q
        elif hasattr(D, "q") and q != D.q:
            raise ValueError("q disagrees with D.q")
        rows = _as_rows(D)
        m = len(rows)
        if len(rows[0]) != len(A):
            raise ValueError(f"D has {len(rows[0])} columns but A has {len(A)} elements")
    comp = [j for j in range(1, k + 1) if j not in set(A)]
    mp = m + len(comp)
    out = [[0] * k for _ in range(mp)]
    for ell, j in enumerate(A):
        for i in range(m):
            out[i][j - 1] = rows[i][ell]
    for ell, j in enumerate(comp):
        out[m + ell][j - 1] = q
    return tuple(tuple(r) for r in out)


def canonical_row_sort(rows, q: int) -> AdmissibleMatrix:
    """The unique row permutation making a lifted matrix admissible.

    Scans columns left to right: a column that is zero on all unassigned
    rows is free; otherwise it must hold a single non-zero entry q in one
    unassigned row, which becomes the next pivot row.
    """
    rows = _as_rows(rows)
    m, k = len(rows), len(rows[0])
    order: List[int] = []
    unassigned = set(range(m))
    for col in range(k):
        nz = [i for i in range(m) if rows[i][col] != 0]
        if all(i not in unassigned for i in nz):
            continue  # free column
        if len(nz) == 1 and rows[nz[0]][col] == q and nz[0] in unassigned:
            order.append(nz[0])
            unassigned.discard(nz[0])
        else:
            raise ValueError(f"no row permutation makes column {col + 1} admissible")
    if unassigned:
        raise ValueError("some rows never acquire a pivot column")
    return AdmissibleMatrix.from_rows(tuple(rows[i] for i in order), q)


def singleton_columns(matrix) -> frozenset:
    """Columns whose unique non-zero entry is also alone in its row (1-based)."""
    rows = _as_rows(matrix)
    m, k = len(rows), len(rows[0])
    row_counts = [sum(1 for v in row if v != 0) for row in rows]
    out = []
    for j in range(k):
        nz = [i for i in range(m) if rows[i][j] != 0]
        if len(nz) == 1 and row_counts[nz[0]] == 1:
            out.append(j + 1)
    return frozenset(out)
