"""Monte Carlo harnesses confronting limit theorems with sampled lattices.

Each driver samples congruence (Hecke) lattices, computes count statistics,
and returns a StatReport whose records compare estimates against oracles
under the uniform verdict rule |estimate - oracle| <= 3*SE + allowance.
Allowances beyond pure statistical error are engineering tolerances for
unquantified convergence rates and are stated on every record.

Determinism contract: identical (config, master seed) produce bit-identical
reports for any worker count.  Per-replicate generators are split from the
master seed by replicate index, results are placed by index, and reductions
run in index order.
"""

import json
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import BudgetError
from .jintegral import j_integral, worst_term
from .geometry import log_v_tilde
from .lattices import CountCurve, count_curve, default_prime, sample_lattice
from .partitions import exact_main_term, threshold_c

REPORT_SCHEMA = "randlat.statreport/1"
JACKKNIFE_BLOCKS = 100
DEFAULT_NODE_BUDGET = 10 ** 8
_SE_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# configuration and report types


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared knobs for the sampling experiments.

    x doubles as the top volume f for path experiments.  workers and
    raw_csv are execution plumbing and never enter reports.
    """

    n: int
    x: float = 1.0
    replicates: int = 1000
    seed: int = 0
    p: Optional[int] = None
    t_grid: Tuple[float, ...] = ()
    moment_orders: int = 4
    cutoff: int = 10 ** 4
    workers: int = 0
    max_nodes: int = DEFAULT_NODE_BUDGET
    raw_csv: Optional[str] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got {self.n}")
        if self.replicates < 100:
            raise ValueError(f"need at least 100 replicates, got {self.replicates}")
        if self.x < 0:
            raise ValueError(f"need volume x >= 0, got {self.x}")
        if not 1 <= self.moment_orders <= 8:
            raise ValueError(f"moment orders must be in 1..8, got {self.moment_orders}")
        if self.cutoff < 10:
            raise ValueError(f"need cutoff >= 10, got {self.cutoff}")
        if self.max_nodes <= 0:
            raise ValueError("node budget must be positive")
        grid = tuple(float(t) for t in self.t_grid)
        if grid:
            if any(not 0.0 < t <= 1.0 for t in grid) or any(
                b <= a for a, b in zip(grid, grid[1:])
            ):
                raise ValueError("t-grid must be increasing within (0, 1]")
        object.__setattr__(self, "t_grid", grid)

    def resolved_p(self) -> int:
        return self.p if self.p is not None else default_prime(self.n)

    def echo(self) -> Dict:
        return {
            "n": self.n,
            "x": self.x,
            "replicates": self.replicates,
            "seed": self.seed,
            "p": self.resolved_p(),
            "t_grid": list(self.t_grid),
            "moment_orders": self.moment_orders,
            "cutoff": self.cutoff,
            "max_nodes": self.max_nodes,
        }


@dataclass(frozen=True)
class StatRecord:
    """One estimate/oracle comparison with its verdict."""

    name: str
    estimate: float
    se: float
    oracle: float
    allowance: float
    verdict: str

    def as_dict(self) -> Dict:
        return {
            "name": self.name,
            "estimate": float(self.estimate),
            "se": float(self.se),
            "oracle": float(self.oracle),
            "allowance": float(self.allowance),
            "verdict": self.verdict,
        }


def make_record(name, estimate, se, oracle, allowance=0.0, inconclusive=False):
    """Apply the uniform verdict rule; inconclusive never counts as a pass."""
    estimate, oracle = float(estimate), float(oracle)
    se = max(float(se), _SE_FLOOR)
    if inconclusive:
        verdict = "inconclusive"
    elif abs(estimate - oracle) <= 3.0 * se + allowance:
        verdict = "pass"
    else:
        verdict = "fail"
    return StatRecord(name, estimate, se, oracle, float(allowance), verdict)


@dataclass(frozen=True)
class StatReport:
    """Experiment outcome: verdict records plus reproducibility metadata."""

    experiment: str
    records: Tuple[StatRecord, ...]
    config: Dict
    metadata: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.records)

    def record(self, name: str) -> StatRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self) -> str:
        doc = {
            "schema": REPORT_SCHEMA,
            "experiment": self.experiment,
            "config": self.config,
            "records": [r.as_dict() for r in self.records],
            "metadata": self.metadata,
            "passed": self.passed,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        width = max(len(r.name) for r in self.records)
        lines = [
            "experiment: %s" % self.experiment,
            "config: %s" % json.dumps(self.config, sort_keys=True),
            "%-*s  %14s  %12s  %14s  %11s  %s"
            % (width, "statistic", "estimate", "SE", "oracle", "allowance", "verdict"),
        ]
        for r in self.records:
            lines.append(
                "%-*s  %14.6g  %12.4g  %14.6g  %11.4g  %s"
                % (width, r.name, r.estimate, r.se, r.oracle, r.allowance, r.verdict)
            )
        for key in sorted(self.metadata):
            lines.append("%s: %s" % (key, json.dumps(self.metadata[key], sort_keys=True)))
        lines.append("overall: %s" % ("pass" if self.passed else "fail"))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# oracle series


def variance_oracle(n: int, cutoff: int = 10 ** 4) -> float:
    """Truncated series 1 + 2 sum_{m=2}^{cutoff} phi(m) m^{-n}.

    The limiting normalized second moment E(Z^2) of the centered count;
    the truncation tail is bounded by variance_truncation_bound.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if cutoff < 10:
        raise ValueError(f"need cutoff >= 10, got {cutoff}")
    phi = np.arange(cutoff + 1, dtype=np.int64)
    for i in range(2, cutoff + 1):
        if phi[i] == i:
            phi[i::i] -= phi[i::i] // i
    m = np.arange(2, cutoff + 1, dtype=np.float64)
    return 1.0 + 2.0 * float(np.sum(phi[2:] * np.exp(-n * np.log(m))))


def variance_truncation_bound(n: int, cutoff: int) -> float:
    """2 sum_{m>cutoff} m^{1-n} <= 2 cutoff^{2-n} / (n - 2)."""
    return 2.0 * cutoff ** (2 - n) / (n - 2)


# ---------------------------------------------------------------------------
# replicate collection (deterministic, worker-count independent)


def _count_row(args):
    """One replicate: sample a lattice, count on the grid, check Z identity."""
    idx, n, p, grid, seed, max_nodes = args
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(idx,)))
    )
    lat = sample_lattice(n, p, rng=rng)
    try:
        curve = count_curve(lat, grid, max_nodes, replicate_id=idx)
    except BudgetError:
        return idx, None
    for x, c, z in zip(grid, curve.counts, curve.z_values):
        expect = (c - x) / math.sqrt(2.0 * x) if x > 0 else 0.0
        if z != expect:
            raise AssertionError(f"Z normalization drifted at x={x}")
    return idx, curve.counts


def _collect_counts(cfg: ExperimentConfig, grid: Sequence[float]):
    """Counts matrix (replicates x grid) in replicate order.

    Replicates whose enumeration exceeds the node budget are dropped, with
    a hard failure above a 1% rate.  Optionally streams raw rows to CSV.
    """
    n, p = cfg.n, cfg.resolved_p()
    grid = tuple(float(x) for x in grid)
    jobs = [(i, n, p, grid, cfg.seed, cfg.max_nodes) for i in range(cfg.replicates)]
    rows = [None] * cfg.replicates
    if cfg.workers and cfg.workers > 1:
        with Pool(cfg.workers) as pool:
            for idx, counts in pool.imap_unordered(_count_row, jobs, chunksize=64):
                rows[idx] = counts
    else:
        for job in jobs:
            idx, counts = _count_row(job)
            rows[idx] = counts
    failed = sum(1 for r in rows if r is None)
    if failed > 0.01 * cfg.replicates:
        raise RuntimeError(
            f"{failed}/{cfg.replicates} replicates exceeded the enumeration budget"
        )
    if cfg.raw_csv is not None:
        with open(cfg.raw_csv, "w") as fh:
            fh.write(CountCurve.CSV_HEADER + "\n")
            for idx, counts in enumerate(rows):
                if counts is None:
                    continue
                curve = CountCurve(
                    n=n, p=p, grid=grid, counts=counts, shortest=(), replicate_id=idx
                )
                for line in curve.csv_rows():
                    fh.write(line + "\n")
    good = [r for r in rows if r is not None]
    return np.asarray(good, dtype=np.float64), failed


def jackknife_se(values: np.ndarray, stat_fn, blocks: int = JACKKNIFE_BLOCKS) -> float:
    """Delete-one-block jackknife SE of stat_fn over replicate axis 0."""
    r = values.shape[0]
    blocks = min(blocks, r)
    edges = np.linspace(0, r, blocks + 1).astype(int)
    thetas = []
    for b in range(blocks):
        keep = np.concatenate([values[: edges[b]], values[edges[b + 1]:]])
        thetas.append(stat_fn(keep))
    thetas = np.asarray(thetas, dtype=np.float64)
    spread = float(np.sum((thetas - thetas.mean()) ** 2))
    return float(math.sqrt(max(0.0, (blocks - 1) / blocks * spread)))


# ---------------------------------------------------------------------------
# experiment drivers


def _moment_records(z: np.ndarray, f: float, orders: int) -> list:
    """m_1..m_orders against finite-f main-term oracles.

    Even orders compare with the exact singleton-free partition sum
    (3 + 2/f at order 4) with allowance 0.1 per extra pairing level;
    odd orders with 0 under the skew allowance sqrt(2/f) per level.
    """
    recs = []
    for j in range(1, orders + 1):
        powers = z ** j
        est = float(powers.mean())
        se = jackknife_se(powers, lambda v: float(v.mean()))
        if j == 1:
            oracle, allowance = 0.0, 0.0
        elif j % 2 == 1:
            oracle, allowance = 0.0, ((j - 1) / 2.0) * math.sqrt(2.0 / f)
        else:
            oracle = exact_main_term(j, f) / (2.0 * f) ** (j / 2.0)
            allowance = 0.1 * (j / 2.0 - 1.0)
        recs.append(make_record("m%d" % j, est, se, oracle, allowance))
    return recs


def run_clt(cfg: ExperimentConfig) -> StatReport:
    """Moments and KS distance of Z = (N - x)/sqrt(2x) at fixed volume x."""
    if cfg.x <= 0:
        raise ValueError("run_clt needs a positive volume")
    counts, failed = _collect_counts(cfg, [cfg.x])
    z = (counts[:, 0] - cfg.x) / math.sqrt(2.0 * cfg.x)
    records = _moment_records(z, cfg.x, cfg.moment_orders)
    bound = variance_truncation_bound(cfg.n, cfg.cutoff)
    if cfg.moment_orders >= 2:
        # the order-2 record verdict runs against the full variance series
        m2 = records[1]
        records[1] = make_record(
            "m2", m2.estimate, m2.se, variance_oracle(cfg.n, cfg.cutoff), bound
        )
    ks = float(stats.kstest(z, "norm").statistic)
    ks_se = jackknife_se(z, lambda v: float(stats.kstest(v, "norm").statistic))
    records.append(make_record("ks_normal", ks, ks_se, 0.0, 0.05))
    return StatReport(
        "clt",
        tuple(records),
        cfg.echo(),
        {"failed_replicates": failed, "truncation_bound": bound},
    )


def run_poisson(cfg: ExperimentConfig) -> StatReport:
    """Law of N/2 against Poisson(x/2), plus disjoint-annuli independence."""
    if cfg.x > 50:
        raise ValueError("fixed-x regime expects x <= 50")
    mean = cfg.x / 2.0
    grid = [cfg.x / 3.0, 2.0 * cfg.x / 3.0, cfg.x] if cfg.x > 0 else [0.0]
    counts, failed = _collect_counts(cfg, grid)
    half = (counts[:, -1] / 2.0).astype(np.int64)
    r = len(half)
    records = []

    # total variation on buckets 0..ceil(mean + 6 sqrt(mean)), tails folded
    kmax = max(int(math.ceil(mean + 6.0 * math.sqrt(mean))), 1)
    pmf = stats.poisson.pmf(np.arange(kmax + 1), mean)
    pmf[-1] += max(0.0, 1.0 - pmf.sum())

    def tv_stat(vals):
        emp = np.bincount(
            np.minimum(vals.astype(np.int64), kmax), minlength=kmax + 1
        ) / len(vals)
        return float(0.5 * np.abs(emp - pmf).sum())

    tv = tv_stat(half)
    tv_se = jackknife_se(half.astype(np.float64), tv_stat)
    records.append(make_record("tv_poisson", tv, tv_se, 0.0, 0.05))

    if cfg.x == 0:
        # empty ball: the count is identically zero
        records.append(make_record("max_count", float(counts.max()), _SE_FLOOR, 0.0))
        return StatReport(
            "poisson", tuple(records), cfg.echo(), {"failed_replicates": failed}
        )

    # chi-square on buckets 0..ceil(x)+5 with tail folded, via the
    # square-root normal approximation sqrt(2 chi^2) ~ N(sqrt(2 dof - 1), 1)
    top = int(math.ceil(cfg.x)) + 5
    probs = stats.poisson.pmf(np.arange(top + 1), mean)
    probs[-1] += max(0.0, 1.0 - probs.sum())
    observed = np.bincount(np.minimum(half, top), minlength=top + 1)
    keep = probs > 1e-12
    expected = probs[keep] * r
    chi2 = float(((observed[keep] - expected) ** 2 / expected).sum())
    dof = int(keep.sum()) - 1
    if dof >= 1:
        records.append(
            make_record(
                "chi_square_gauss",
                math.sqrt(2.0 * chi2),
                1.0,
                math.sqrt(2.0 * dof - 1.0),
            )
        )

    annuli = np.column_stack(
        [counts[:, 0], counts[:, 1] - counts[:, 0], counts[:, 2] - counts[:, 1]]
    )
    corr_se = 1.0 / math.sqrt(r)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        si, sj = float(annuli[:, i].std()), float(annuli[:, j].std())
        c = (
            0.0
            if si == 0.0 or sj == 0.0
            else float(np.corrcoef(annuli[:, i], annuli[:, j])[0, 1])
        )
        records.append(make_record("annuli_corr_%d%d" % (i + 1, j + 1), c, corr_se, 0.0))

    # cumulative spot check P(N <= 2 N0) vs the Poisson CDF at N0 = 1;
    # the deviation is bounded by the total variation distance
    n0 = 1
    q = float((half <= n0).mean())
    q_oracle = float(stats.poisson.cdf(n0, mean))
    q_se = math.sqrt(max(q_oracle * (1.0 - q_oracle), 1e-12) / r)
    records.append(make_record("cdf_at_1", q, q_se, q_oracle, 0.05))

    return StatReport(
        "poisson",
        tuple(records),
        cfg.echo(),
        {
            "failed_replicates": failed,
            "tv_buckets": kmax + 1,
            "chi_square_buckets": top + 1,
        },
    )


def run_brownian(cfg: ExperimentConfig) -> StatReport:
    """Path statistics of Z(t) = (N(t f) - t f)/sqrt(2 f) on the t-grid."""
    grid = cfg.t_grid or (0.25, 0.5, 0.75, 1.0)
    if not 3 <= len(grid) <= 10:
        raise ValueError(f"need a t-grid of 3..10 points, got {len(grid)}")
    f = cfg.x
    if f <= 0:
        raise ValueError("run_brownian needs a positive top volume")
    volumes = [t * f for t in grid]
    counts, failed = _collect_counts(cfg, volumes)
    z = (counts - np.asarray(volumes)) / math.sqrt(2.0 * f)
    m = len(grid)
    records = []

    for i in range(m):
        for j in range(i, m):
            def cov_ij(vals, i=i, j=j):
                return float(np.cov(vals[:, i], vals[:, j], ddof=1)[0, 1])

            records.append(
                make_record(
                    "cov_%g_%g" % (grid[i], grid[j]),
                    cov_ij(z),
                    jackknife_se(z, cov_ij),
                    min(grid[i], grid[j]),
                    0.05,
                )
            )

    inc = np.diff(z, axis=1, prepend=0.0)
    corr_se = 1.0 / math.sqrt(len(z))
    for i in range(m):
        for j in range(i + 1, m):
            c = float(np.corrcoef(inc[:, i], inc[:, j])[0, 1])
            records.append(
                make_record("increment_corr_%g_%g" % (grid[i], grid[j]), c, corr_se, 0.0)
            )

    for i, t in enumerate(grid):
        scaled = z[:, i] / math.sqrt(t)
        ks = float(stats.kstest(scaled, "norm").statistic)
        ks_se = jackknife_se(scaled, lambda v: float(stats.kstest(v, "norm").statistic))
        records.append(make_record("ks_marginal_%g" % t, ks, ks_se, 0.0, 0.05))

    # fourth moment over the increment pair (first, second) x (second, last)
    r_, s_, t_ = 0, 1, m - 1

    def fourth(vals):
        a = (vals[:, s_] - vals[:, r_]) ** 2 * (vals[:, t_] - vals[:, s_]) ** 2
        return float(a.mean())

    records.append(
        make_record(
            "fourth_moment_%g_%g_%g" % (grid[r_], grid[s_], grid[t_]),
            fourth(z),
            jackknife_se(z, fourth),
            (grid[t_] - grid[s_]) * (grid[s_] - grid[r_]),
            0.05,
        )
    )
    return StatReport(
        "brownian",
        tuple(records),
        cfg.echo(),
        {"failed_replicates": failed, "volumes": volumes},
    )


def run_growth_scan(
    k: int,
    c: float,
    n_list: Sequence[int],
    samples: int = 2 * 10 ** 5,
    seed: int = 0,
) -> StatReport:
    """Slope of the dominant remainder term for f(n) = e^{cn}.

    Fits the log worst-matrix term against n by least squares weighted with
    the Monte Carlo J-integral errors; the verdict compares the slope with
    (k/2 - 1) c + log Vtilde_{k-1}, whose sign flips at the threshold c_k.
    Oversized J errors yield an inconclusive verdict, never a pass.
    """
    if k < 3:
        raise ValueError(f"need k >= 3, got {k}")
    ns = [int(n) for n in n_list]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be increasing with at least two entries")
    if ns[-1] > 200:
        raise ValueError(f"n_list capped at 200, got {ns[-1]}")
    logs, errs = [], []
    for n in ns:
        sub = int(np.random.SeedSequence(seed, spawn_key=(n,)).generate_state(1)[0])
        est = j_integral(n, [1.0] * (k - 1), method="reduced", samples=samples, seed=sub)
        logs.append(worst_term(k, n, log_f=c * n, j_est=est))
        errs.append(max(est.rel_se, 1e-12))
    xs = np.asarray(ns, dtype=np.float64)
    ys = np.asarray(logs)
    ws = 1.0 / np.asarray(errs) ** 2
    xbar = float(np.average(xs, weights=ws))
    ybar = float(np.average(ys, weights=ws))
    sxx = float(np.sum(ws * (xs - xbar) ** 2))
    slope = float(np.sum(ws * (xs - xbar) * (ys - ybar)) / sxx)
    slope_se = math.sqrt(1.0 / sxx)
    target = (k / 2.0 - 1.0) * c + log_v_tilde(k - 1)
    ck = threshold_c(k)
    inconclusive = slope_se > 0.02
    if abs(c - ck) < 1e-9:
        sign_ok = abs(slope) <= 0.02
    else:
        sign_ok = math.copysign(1.0, slope) == math.copysign(1.0, c - ck)
    records = (
        make_record("slope", slope, slope_se, target, 0.02, inconclusive=inconclusive),
        make_record(
            "slope_sign_matches",
            1.0 if sign_ok else 0.0,
            _SE_FLOOR,
            1.0,
            inconclusive=inconclusive,
        ),
    )
    config = {"k": k, "c": c, "n_list": ns, "samples": samples, "seed": seed}
    return StatReport(
        "growth",
        records,
        config,
        {"threshold": ck, "log_terms": [float(v) for v in logs]},
    )


def verify_rogers_k2(
    n: int,
    x: float,
    replicates: int,
    cutoff: int = 10 ** 4,
    p: Optional[int] = None,
    seed: int = 0,
    workers: int = 0,
) -> StatReport:
    """Empirical mean of (N - x)^2 over 2x against the k=2 variance series.

    Shares the m2 estimator path with run_clt bit for bit: identical
    configurations give identical estimates.
    """
    if n < 5:
        raise ValueError(f"exact-counting verification needs n >= 5, got {n}")
    if not 0 < x <= 100:
        raise ValueError(f"need a volume in (0, 100], got {x}")
    cfg = ExperimentConfig(
        n=n,
        x=x,
        replicates=replicates,
        seed=seed,
        p=p,
        cutoff=cutoff,
        workers=workers,
        moment_orders=2,
    )
    clt = run_clt(cfg)
    m2 = clt.record("m2")
    meta = dict(clt.metadata)
    meta["lhs"] = m2.estimate * 2.0 * x
    return StatReport(
        "verify_rogers_k2",
        (
            make_record(
                "second_moment_ratio", m2.estimate, m2.se, m2.oracle, m2.allowance
            ),
        ),
        cfg.echo(),
        meta,
    )
