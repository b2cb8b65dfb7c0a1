"""Ball volumes and the constrained parallelotope supremum.

The central object is

    V_a[c] = sup { vol[x_1,..,x_a] : |x_j| <= 1, |c_1 x_1 + .. + c_a x_a| <= 1 }

where vol[...] is the parallelotope volume sqrt(det Gram) of a vectors in R^a
and c_1..c_a are positive weights.  Closed forms cover the flat case
(sum c_j^2 <= 1), the extreme case (one dominant weight), equal weights
(v_tilde), and the pivot-scaling reduction; everything else goes through a
multi-start projected gradient ascent on log det Gram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "log_ball_volume",
    "ball_volume",
    "log_sphere_area",
    "parallelotope_volume",
    "v_tilde",
    "log_v_tilde",
    "ConstraintVector",
    "VolumeResult",
    "VsupConvergenceError",
    "v_sup",
    "stationarity_diagnostic",
]

DEGENERATE_C = 1e6


def log_ball_volume(n: int) -> float:
    """log of the volume of the unit ball in R^n, via log-Gamma."""
    if n <= 0:
        raise ValueError(f"dimension must be positive, got {n}")
    return 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0)


def ball_volume(n: int) -> float:
    return math.exp(log_ball_volume(n))


def log_sphere_area(n: int) -> float:
    """log of omega_n = n * V_n, the surface area of the unit sphere in R^n."""
    if n <= 0:
        raise ValueError(f"dimension must be positive, got {n}")
    return math.log(n) + log_ball_volume(n)


def parallelotope_volume(vectors) -> float:
    """sqrt of the Gram determinant of the given vectors (rows).

    Returns 0.0 for linearly dependent input.  The vectors must all have the
    same dimension; they need not be square (volume of an a-parallelotope
    embedded in higher dimension is fine).
    """
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    if x.ndim != 2:
        raise ValueError("expected a 2-d array of row vectors")
    gram = x @ x.T
    det = float(np.linalg.det(gram))
    return math.sqrt(max(det, 0.0))


def log_v_tilde(a: float, c: float = 1.0) -> float:
    """log of the equal-weights supremum Vtilde_{a,c}.

    Defined for real a >= 1 (the real-argument extension is what the
    convexity-in-a property is about) and 0 < c <= 1.  Equals 0 when
    c <= a^{-1/2}; otherwise half the log of
    c^-2 (a^2 - c^-2)^{a-1} / (a^a (a-1)^{a-1}).
    """
    if a < 1:
        raise ValueError(f"need a >= 1, got {a}")
    if not 0.0 < c <= 1.0:
        raise ValueError(f"need 0 < c <= 1, got {c}")
    u = 1.0 / (c * c)
    if u >= a * a:  # c <= 1/a would make the radical vanish; cannot happen for c*c*a > 1, a >= 1
        return 0.0
    if c * c * a <= 1.0:
        return 0.0
    if a == 1:
        return -math.log(c)
    t = (a - 1.0) * (math.log(a * a - u) - math.log(a - 1.0))
    return 0.5 * (math.log(u) + t - a * math.log(a))


def v_tilde(a: float, c: float = 1.0) -> float:
    """Equal-weights closed form: 1 for c <= a^{-1/2}, else the radical."""
    return math.exp(log_v_tilde(a, c))


@dataclass(frozen=True)
class ConstraintVector:
    """Positive weights c_1..c_a; semantics are permutation-invariant."""

    c: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        if len(c) < 1:
            raise ValueError("need at least one weight")
        if any((not math.isfinite(x)) or x <= 0 for x in c):
            raise ValueError(f"weights must be positive and finite, got {c}")
        object.__setattr__(self, "c", c)

    @property
    def a(self) -> int:
        return len(self.c)


@dataclass
class VolumeResult:
    """Result of the V_a[c] supremum problem.

    certificate rows are the maximizing vectors in R^a when available;
    diagnostics carries the per-index projection lengths delta_j, the
    tau_j = sqrt(delta_j^2 + c_j^2 - 1), and the first-order stationarity
    statistic delta_j^2 - (delta_j - delta_j^3)/tau_j whose spread across j
    vanishes at a true maximizer.
    """

    value: float
    method: str  # "closed_form" or "optimizer"
    rule: Optional[str] = None
    certificate: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
    converged: bool = True
    iterations: int = 0

    def csv_row(self, seed="") -> str:
        c = self.diagnostics.get("c", ())
        return ",".join(
            [
                self.method,
                str(len(c)),
                "",  # no ambient n for a pure V computation
                ";".join(repr(float(x)) for x in c),
                repr(math.log(self.value)) if self.value > 0 else "-inf",
                "0",
                str(self.iterations),
                str(seed),
            ]
        )


class VsupConvergenceError(RuntimeError):
    """Optimizer failed to converge; .best carries the best found lower bound."""

    def __init__(self, message: str, best: VolumeResult):
        super().__init__(message)
        self.best = best


def _check_weights(c) -> np.ndarray:
    if isinstance(c, ConstraintVector):
        c = c.c
    arr = np.asarray([float(x) for x in c], dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"weights must be positive and finite, got {arr}")
    return arr


def stationarity_diagnostic(x: np.ndarray, c) -> dict:
    """First-order stationarity data for a candidate maximizer.

    delta_j is the length of the projection of d = sum c_j x_j onto the span
    of the other vectors; at a maximizer tau_j > 0 and the statistic
    delta_j^2 - (delta_j - delta_j^3)/tau_j does not depend on j.
    """
    c = _check_weights(c)
    x = np.asarray(x, dtype=float)
    a = len(c)
    d = c @ x
    delta = np.empty(a)
    tau = np.empty(a)
    stat = np.full(a, np.nan)
    for j in range(a):
        others = np.delete(x, j, axis=0)
        if others.size == 0:
            proj = np.zeros_like(d)
        else:
            # least-squares projection of d onto the row space
            coef, *_ = np.linalg.lstsq(others.T, d, rcond=None)
            proj = others.T @ coef
        delta[j] = float(np.linalg.norm(proj))
        t2 = delta[j] ** 2 + c[j] ** 2 - 1.0
        tau[j] = math.sqrt(t2) if t2 > 0 else 0.0
        if tau[j] > 1e-9:
            stat[j] = delta[j] ** 2 - (delta[j] - delta[j] ** 3) / tau[j]
    out = {
        "delta": tuple(delta),
        "tau": tuple(tau),
        "stationarity": tuple(stat),
    }
    if np.all(np.isfinite(stat)):
        out["stationarity_spread"] = float(np.max(stat) - np.min(stat))
    return out


def _symmetric_certificate(a: int, c_eq: float) -> np.ndarray:
    """Rows achieving Vtilde_{a,c_eq}: unit vectors with common inner product."""
    if a == 1:
        return np.array([[min(1.0, 1.0 / c_eq)]])
    if c_eq * c_eq * a <= 1.0:
        return np.eye(a)
    s = (c_eq ** -2 - a) / (a * (a - 1.0))
    gram = (1.0 - s) * np.eye(a) + s * np.ones((a, a))
    return np.linalg.cholesky(gram)


def _closed_form(c: np.ndarray):
    """Return (value, rule, certificate) or None if no closed form applies."""
    a = len(c)
    if a == 1:
        v = min(1.0, 1.0 / c[0])
        return v, "a1", np.array([[v]])
    ssq = float(np.sum(c * c))
    if ssq <= 1.0:
        return 1.0, "flat", np.eye(a)
    ell = int(np.argmax(c))
    if c[ell] ** 2 >= 1.0 + (ssq - c[ell] ** 2):
        # x_j = e_j off the pivot; the pivot row makes sum c_j x_j = e_ell
        cert = np.eye(a)
        row = -c / c[ell]
        row[ell] = 1.0 / c[ell]
        cert[ell] = row
        return 1.0 / c[ell], "extreme", cert
    if np.all(c == c[0]):
        if c[0] <= 1.0:
            return v_tilde(a, float(c[0])), "equal", _symmetric_certificate(a, float(c[0]))
        # equal weights above 1 have no direct closed form here
        return None
    # pivot scaling: after dividing by the largest weight b, the vector
    # (b, 1, .., 1) becomes equal weights 1/b
    rest = np.delete(c, ell)
    if c[ell] >= 1.0 and np.all(rest == 1.0):
        b = float(c[ell])
        y = _symmetric_certificate(a, 1.0 / b)
        cert = np.empty((a, a))
        cert[ell] = (1.0 / b) * np.sum(y, axis=0)  # = sum of the scaled weights times y rows
        others = [j for j in range(a) if j != ell]
        for row, j in zip(y[1:], others):
            cert[j] = -row
        return (1.0 / b) * v_tilde(a, 1.0 / b), "scaled_equal", cert
    return None


def _project_feasible(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Project each configuration into the feasible set.

    Alternates minimal-change corrections of the two constraint families:
    clip rows into unit balls, then shift all rows along d = sum c_j x_j by
    the least-squares amount that brings |d| back to 1.  A final uniform
    shrink makes the result exactly feasible; after the alternation it is a
    factor 1 + O(eps), so it does not bias the ascent the way a pure radial
    rescale would when only the sum constraint is active.
    """
    csq = float(c @ c)
    for _ in range(4):
        norms = np.sqrt(np.einsum("sjd,sjd->sj", x, x))
        x = x / np.maximum(norms, 1.0)[:, :, None]
        d = np.einsum("j,sjd->sd", c, x)
        dn = np.sqrt(np.einsum("sd,sd->s", d, d))
        shift = np.where(dn > 1.0, 1.0 / np.maximum(dn, 1e-300) - 1.0, 0.0)
        x = x + (shift / csq)[:, None, None] * c[None, :, None] * d[:, None, :]
    norms = np.sqrt(np.einsum("sjd,sjd->sj", x, x))
    x = x / np.maximum(norms, 1.0)[:, :, None]
    d = np.einsum("j,sjd->sd", c, x)
    dn = np.sqrt(np.einsum("sd,sd->s", d, d))
    return x / np.maximum(dn, 1.0)[:, None, None]


def _log_volume(x: np.ndarray) -> np.ndarray:
    gram = x @ np.swapaxes(x, 1, 2)
    sign, logdet = np.linalg.slogdet(gram)
    return np.where(sign > 0, 0.5 * logdet, -np.inf)


def _slsqp_polish(c: np.ndarray, x0: np.ndarray):
    """Local refinement of one configuration under the smooth constraints.

    Maximizes 0.5 log det(X X^T) subject to |x_j|^2 <= 1 and
    |sum c_j x_j|^2 <= 1 with analytic gradients.  Returns the refined
    configuration and whether the solver reported success.
    """
    from scipy.optimize import minimize

    a = len(c)

    def fun(z):
        x = z.reshape(a, a)
        sign, ld = np.linalg.slogdet(x @ x.T)
        if sign <= 0 or ld < -400.0:
            return 200.0
        return -0.5 * ld

    def jac(z):
        x = z.reshape(a, a)
        g = x @ x.T
        try:
            return -np.linalg.solve(g, x).ravel()
        except np.linalg.LinAlgError:
            return np.zeros(a * a)

    cons = []
    for j in range(a):

        def gj(z, j=j):
            x = z.reshape(a, a)
            return 1.0 - x[j] @ x[j]

        def gjac(z, j=j):
            out = np.zeros((a, a))
            out[j] = -2.0 * z.reshape(a, a)[j]
            return out.ravel()

        cons.append({"type": "ineq", "fun": gj, "jac": gjac})

    def gs(z):
        d = c @ z.reshape(a, a)
        return 1.0 - d @ d

    def gsjac(z):
        d = c @ z.reshape(a, a)
        return (-2.0 * np.outer(c, d)).ravel()

    cons.append({"type": "ineq", "fun": gs, "jac": gsjac})
    res = minimize(
        fun,
        x0.ravel(),
        jac=jac,
        constraints=cons,
        method="SLSQP",
        options={"maxiter": 400, "ftol": 1e-14},
    )
    return res.x.reshape(a, a), bool(res.success)


def _optimize(c: np.ndarray, starts: int, seed, max_iter: int, gain_tol: float):
    """Multi-start projected ascent followed by a local polish.

    The vectorized ascent explores; each surviving basin is then refined
    with a sequential quadratic solver, whose output is projected back to
    exact feasibility before the final comparison.
    """
    a = len(c)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((starts, a, a))
    x /= np.sqrt(np.einsum("sjd,sjd->sj", x, x))[:, :, None]
    x *= rng.uniform(size=(starts, a, 1)) ** (1.0 / a)
    # two structured starts: orthonormal, and the equal-weight symmetric frame
    if starts >= 1:
        x[0] = np.eye(a)
    if starts >= 2:
        ceq = float(np.sqrt(np.mean(c * c)))
        x[1] = _symmetric_certificate(a, min(ceq, 1.0))
    x = _project_feasible(x, c)

    window = 64
    f = _log_volume(x)
    f_mark = f.copy()
    eta = np.full(starts, 0.25)
    done = np.zeros(starts, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        if np.all(done):
            break
        gram = x @ np.swapaxes(x, 1, 2)
        gram += (1e-14 * np.trace(gram, axis1=1, axis2=2) / a)[:, None, None] * np.eye(a)
        grad = np.linalg.solve(gram, x)
        y = _project_feasible(x + eta[:, None, None] * grad, c)
        fy = _log_volume(y)
        acc = (fy > f) & ~done
        x[acc] = y[acc]
        f = np.where(acc, fy, f)
        eta = np.where(acc, np.minimum(eta * 1.3, 0.25), eta * 0.5)
        done |= eta < 1e-16
        if it % window == 0:
            # settled when a whole window improves the value by less than the
            # tolerance; per-step gains are too noisy near active constraints
            done |= f - f_mark < gain_tol * window
            f_mark = f.copy()

    order = np.argsort(f)[::-1]
    best_x, best_f, best_ok = x[order[0]], float(f[order[0]]), bool(done[order[0]])
    for s in order[: min(4, starts)]:
        if not np.isfinite(f[s]):
            continue
        polished, ok = _slsqp_polish(c, x[s])
        polished = _project_feasible(polished[None], c)[0]
        fp = float(_log_volume(polished[None])[0])
        if fp > best_f:
            best_x, best_f, best_ok = polished, fp, ok or bool(done[s])
        elif s == order[0] and ok:
            best_ok = True
    return best_x, best_f, best_ok, it


def v_sup(
    c,
    mode: str = "auto",
    starts: int = 32,
    seed=0,
    max_iter: int = 10_000,
    gain_tol: float = 1e-12,
) -> VolumeResult:
    """The supremum V_a[c], by closed form when one applies, else by optimizer.

    mode "auto" picks the closed form when available; "closed_form_only"
    raises ValueError when none applies; "optimizer_only" always runs the
    multi-start ascent (useful as an independent cross-check of the closed
    forms).  Weights >= 1e6 short-circuit to the dominant-weight closed form
    to avoid conditioning issues.
    """
    cv = _check_weights(c)
    if mode not in ("auto", "closed_form_only", "optimizer_only"):
        raise ValueError(f"unknown mode {mode!r}")

    if mode != "optimizer_only" and np.max(cv) >= DEGENERATE_C:
        val = 1.0 / float(np.max(cv))
        return VolumeResult(value=val, method="closed_form", rule="degenerate_extreme",
                            certificate=None, diagnostics={"c": tuple(cv)})

    if mode != "optimizer_only":
        hit = _closed_form(cv)
        if hit is not None:
            value, rule, cert = hit
            diag = stationarity_diagnostic(cert, cv) if cert is not None else {}
            diag["c"] = tuple(cv)
            return VolumeResult(value=value, method="closed_form", rule=rule,
                                certificate=cert, diagnostics=diag)
        if mode == "closed_form_only":
            raise ValueError(f"no closed form applies to c={tuple(cv)}")

    cert, logf, ok, iters = _optimize(cv, starts, seed, max_iter, gain_tol)
    value = math.exp(logf)
    diag = stationarity_diagnostic(cert, cv)
    diag["c"] = tuple(cv)
    result = VolumeResult(value=value, method="optimizer", rule=None, certificate=cert,
                          diagnostics=diag, converged=ok, iterations=iters)
    if not ok:
        raise VsupConvergenceError(
            f"projected ascent did not converge within {max_iter} iterations", result
        )
    return result
