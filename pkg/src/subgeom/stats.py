"""Estimators: empirical tails, slope fits, TV distance and Monte Carlo checks.

TV and f-variation use the full-variation convention, sup over |g| <= f,
so two laws with disjoint supports are at distance 2 (not 1).
"""
import json
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import integrate, stats as sps

from .errors import DomainError, PrecisionError, RangeError, AccuracyError
from .ratefn import g_h_inverse

Z95 = 1.959963984540054
MIN_FIT_POINTS = 4
MIN_TV_SAMPLES = 100
MAX_BINS = 1_000_000
MIN_DRIFT_PATHS = 1000


@dataclass(frozen=True)
class TailEstimate:
    thresholds: np.ndarray
    survival: np.ndarray
    counts: np.ndarray
    n: float
    ci_half_width: np.ndarray
    censor_limit: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        s = np.asarray(self.survival, dtype=float)
        if len(t) != len(s):
            raise DomainError("thresholds and survival differ in length")
        if np.any(np.diff(t) <= 0):
            raise DomainError("thresholds must increase")
        if np.any(np.diff(s) > 1e-12):
            raise DomainError("survival must be non-increasing")
        if np.any((s < 0) | (s > 1)):
            raise DomainError("survival must lie in [0, 1]")

    def __len__(self):
        return len(self.thresholds)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    fit_range: tuple
    n_points: int
    kind: str = "loglog"

    def __post_init__(self):
        if self.n_points < MIN_FIT_POINTS:
            raise PrecisionError(f"a fit needs >= {MIN_FIT_POINTS} points, got {self.n_points}")
        if not 0 <= self.r_squared <= 1 + 1e-12:
            raise DomainError(f"r_squared out of [0,1]: {self.r_squared}")


@dataclass(frozen=True)
class BoundCurve:
    """A theoretical lower-bound curve with the result it comes from."""
    grid: np.ndarray
    values: np.ndarray
    claim: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.claim:
            raise DomainError("a bound curve must name the result it comes from")
        if np.any(np.asarray(self.values) <= 0):
            raise DomainError("bound values must be positive")
        if len(self.grid) != len(self.values):
            raise DomainError("grid and values differ in length")

    def at(self, x):
        """Log-log interpolation inside the grid."""
        x = np.asarray(x, dtype=float)
        g = np.asarray(self.grid, dtype=float)
        if np.any(x < g[0] * (1 - 1e-12)) or np.any(x > g[-1] * (1 + 1e-12)):
            raise RangeError(f"requested points outside the bound grid [{g[0]:g}, {g[-1]:g}]")
        return np.exp(np.interp(np.log(x), np.log(g), np.log(self.values)))


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(u) for u in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(u) for u in v]
    if isinstance(v, dict):
        return {str(k): _plain(u) for k, u in v.items()}
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class StatReport:
    """JSON-ready outcome of one check. verdict is pass, fail or inconclusive."""
    theorem: str
    parameters: dict
    grid: list
    measured: list
    bound: list
    margins: list
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return _plain(asdict(self))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# ------------------------------------------------------------- survival


def wilson_half_width(p, n, z=Z95):
    p = np.asarray(p, dtype=float)
    if n <= 0:
        return np.full(p.shape, np.nan)
    return z / (1 + z * z / n) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))


def empirical_survival(samples, thresholds, censor_limit=None):
    """Fraction of samples >= t for each threshold, with Wilson 95% half-widths.

    `samples` may be a StoppingBatch, in which case its censoring horizon is
    used: censored values equal T_max, so every threshold up to T_max is
    counted exactly.
    """
    if hasattr(samples, "censored") and hasattr(samples, "spec"):
        if censor_limit is None and np.any(samples.censored):
            censor_limit = samples.spec.T_max
        samples = samples.values
    x = np.sort(np.asarray(samples, dtype=float))
    thr = np.asarray(thresholds, dtype=float)
    if thr.size == 0:
        return TailEstimate(thr, np.empty(0), np.empty(0, dtype=int), len(x), np.empty(0),
                            censor_limit)
    if censor_limit is not None and np.any(thr > censor_limit):
        bad = thr[thr > censor_limit]
        raise RangeError(f"thresholds {bad.tolist()} exceed the censoring limit {censor_limit:g}")
    n = len(x)
    if n == 0:
        raise PrecisionError("no samples")
    counts = n - np.searchsorted(x, thr, side="left")
    surv = counts / n
    return TailEstimate(thr, surv, counts, n, wilson_half_width(surv, n), censor_limit)


# --------------------------------------------------------------- fitting


def _xy(tail):
    if isinstance(tail, TailEstimate):
        return np.asarray(tail.thresholds, float), np.asarray(tail.survival, float)
    x, y = tail
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _window(x, y, fit_range):
    if fit_range is None:
        return x, y, (float(x[0]), float(x[-1])) if len(x) else (None, None)
    lo, hi = fit_range
    sel = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
    return x[sel], y[sel], (float(lo), float(hi))


def _linfit(u, w, fit_range, kind):
    n = len(u)
    if n < MIN_FIT_POINTS:
        raise PrecisionError(f"a fit needs >= {MIN_FIT_POINTS} points, got {n}")
    if np.ptp(w) == 0:
        return SlopeFit(0.0, float(w[0]), 0.0, 1.0, fit_range, n, kind)
    res = sps.linregress(u, w)
    r2 = min(1.0, float(res.rvalue) ** 2)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr), r2, fit_range, n, kind)


def loglog_slope(tail, fit_range=None):
    """Least squares slope of log(survival) against log(threshold)."""
    x, y, rng = _window(*_xy(tail), fit_range)
    if np.any(y <= 0):
        raise RangeError(f"zero survival inside the fit range {rng}")
    if np.any(x <= 0):
        raise DomainError("log-log fits need positive abscissae")
    return _linfit(np.log(x), np.log(y), rng, "loglog")


def stretched_slope(tail, rho, fit_range=None):
    """Slope of log(survival) against threshold**rho; -slope is the stretched rate."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    x, y, rng = _window(*_xy(tail), fit_range)
    if np.any(y <= 0):
        raise RangeError(f"zero survival inside the fit range {rng}")
    return _linfit(x ** rho, np.log(y), rng, f"stretched rho={rho:g}")


# -------------------------------------------------------------------- TV


def fd_bin_edges(data, max_bins=MAX_BINS):
    """Freedman-Diaconis edges over the data range, capped at max_bins."""
    data = np.asarray(data, dtype=float)
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return np.array([lo - 0.5, hi + 0.5])
    iqr = np.subtract(*np.percentile(data, [75, 25]))
    width = 2 * iqr * len(data) ** (-1 / 3) if iqr > 0 else (hi - lo) / math.sqrt(len(data))
    nb = int(min(max_bins, max(1, math.ceil((hi - lo) / width))))
    return np.linspace(lo, hi, nb + 1)


def _reference_masses(reference, edges):
    """Bin masses and mass outside [edges[0], edges[-1]] for a law or density."""
    if hasattr(reference, "cdf"):
        F = reference.cdf(edges)
        return np.diff(F), float(F[0] + 1 - F[-1]), getattr(reference, "pdf", None)
    # plain density: Gauss-Legendre per bin, renormalized on the histogram range
    nodes, weights = np.polynomial.legendre.leggauss(4)
    a, b = edges[:-1], edges[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    masses = (np.asarray(reference(pts), dtype=float) @ weights) * half
    total = masses.sum()
    if abs(total - 1) > 1e-3:
        warnings.warn(f"reference density integrates to {total:.6g} on the histogram range; "
                      "renormalized")
    return masses / total, 0.0, reference


def tv_distance_1d(samples, reference, f_weight=None, max_bins=MAX_BINS):
    """Full-variation distance sum_bins f(center)|p_hat - ref| * width on FD bins.

    `reference` is a second sample array, an object with a cdf (exact bin
    masses, mass outside the sample range counted too), or a density callable.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) < MIN_TV_SAMPLES:
        raise PrecisionError(f"need >= {MIN_TV_SAMPLES} samples, got {len(x)}")
    if isinstance(reference, np.ndarray) or isinstance(reference, (list, tuple)):
        y = np.asarray(reference, dtype=float).ravel()
        if len(y) < MIN_TV_SAMPLES:
            raise PrecisionError(f"need >= {MIN_TV_SAMPLES} reference samples, got {len(y)}")
        edges = fd_bin_edges(np.concatenate([x, y]), max_bins)
        p = np.histogram(x, edges)[0] / len(x)
        q = np.histogram(y, edges)[0] / len(y)
        w = 1.0 if f_weight is None else f_weight((edges[:-1] + edges[1:]) / 2)
        return float(np.sum(w * np.abs(p - q)))
    edges = fd_bin_edges(x, max_bins)
    p = np.histogram(x, edges)[0] / len(x)
    q, outside, pdf = _reference_masses(reference, edges)
    centers = (edges[:-1] + edges[1:]) / 2
    if f_weight is None:
        return float(np.sum(np.abs(p - q)) + outside)
    w = np.asarray(f_weight(centers), dtype=float)
    tail = 0.0
    if outside > 0 and pdf is not None:
        g = lambda u: float(f_weight(np.array([u]))[0] * pdf(np.array([u]))[0])
        tail = integrate.quad(g, -np.inf, edges[0], limit=200)[0] + \
            integrate.quad(g, edges[-1], np.inf, limit=200)[0]
    return float(np.sum(w * np.abs(p - q)) + tail)


def tv_curve(samples_by_time, reference_by_time, f_weight=None, max_bins=MAX_BINS):
    """TV at each time; references may be one shared law or one sample set per time."""
    out = []
    for i, s in enumerate(samples_by_time):
        ref = reference_by_time[i] if isinstance(reference_by_time, list) else reference_by_time
        out.append(tv_distance_1d(s, ref, f_weight, max_bins))
    return np.array(out)


def tv_slope_bootstrap(times, samples_by_time, reference_by_time, n_boot=200, seed=0,
                       level=0.95, fit_range=None):
    """Percentile bootstrap interval for the log-log TV slope.

    Path indices are resampled jointly across times (and jointly with paired
    reference samples), keeping each path's time series intact.
    """
    rng = np.random.default_rng(seed)
    n = len(samples_by_time[0])
    paired = isinstance(reference_by_time, list)
    slopes = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        s = [a[idx] for a in samples_by_time]
        r = [a[idx] for a in reference_by_time] if paired else reference_by_time
        tv = tv_curve(s, r)
        if np.all(tv > 0):
            slopes.append(loglog_slope((np.asarray(times, float), tv), fit_range).slope)
    if len(slopes) < n_boot // 2:
        raise PrecisionError("bootstrap produced too few usable resamples")
    a = (1 - level) / 2
    return float(np.quantile(slopes, a)), float(np.quantile(slopes, 1 - a))


# ---------------------------------------------------------- comparisons


def compare_to_bound(grid, measured, bound, ci=None, claim=None):
    """Fit the bound's free constant at the first grid point, then require
    measured + ci >= bound at every later point."""
    grid = np.asarray(grid, dtype=float)
    m = np.asarray(measured, dtype=float)
    b = np.asarray(bound.at(grid), dtype=float)
    ci = np.zeros_like(m) if ci is None else np.asarray(ci, dtype=float)
    if m[0] <= 0:
        raise DomainError("the first measured value must be positive to fit the constant")
    const = m[0] / b[0]
    fitted = const * b
    margins = m - fitted
    tol = 1e-12 * np.max(np.abs(m))
    ok = margins + ci >= -tol
    failing = [float(t) for t, good in zip(grid, ok) if not good]
    return StatReport(claim or bound.claim, dict(bound.parameters, fitted_constant=const),
                      grid.tolist(), m.tolist(), fitted.tolist(), margins.tolist(),
                      "pass" if ok.all() else "fail", {"failing_points": failing, "ci": ci.tolist()})


def check_maximal_inequality(times, paths, r, s, f=None, claim="maximal-inequality"):
    """Compare P(sup_{u<s} xi_u > r) with (xi_0 + E int_0^{s ^ tau_r} f(u, xi_u) du)/r.

    `paths` has one row per trajectory on the time grid `times`; the integral
    is left-endpoint. Passes when LHS <= RHS + 3 combined standard errors.
    """
    t = np.asarray(times, dtype=float)
    X = np.atleast_2d(np.asarray(paths, dtype=float))
    if np.any(X < 0) or np.any(X > 1):
        raise DomainError("trajectories must take values in [0, 1]")
    if not 0 < r <= 1:
        raise DomainError("r must lie in (0, 1]")
    n = X.shape[0]
    before = t < s
    above = (X > r) & before[None, :]
    lhs_i = above.any(axis=1).astype(float)
    # integrate up to s ^ tau_r: stop at the first grid time where xi exceeds r
    dt = np.diff(t)
    first = np.where(above.any(axis=1), above.argmax(axis=1), np.searchsorted(t, s))
    integral = np.zeros(n)
    if f is not None:
        vals = np.asarray(f(t[None, :-1], X[:, :-1]), dtype=float) * dt[None, :]
        cols = np.arange(len(dt))[None, :]
        stop = np.minimum(first, np.searchsorted(t, s))
        integral = np.where(cols < stop[:, None], vals, 0.0).sum(axis=1)
    rhs_i = (X[:, 0] + integral) / r
    lhs, rhs = lhs_i.mean(), rhs_i.mean()
    se = math.sqrt(lhs_i.var(ddof=1) / n + rhs_i.var(ddof=1) / n) if n > 1 else 0.0
    margin = rhs + 3 * se - lhs
    return StatReport(claim, {"r": r, "s": s, "n": n}, [float(s)], [float(lhs)], [float(rhs)],
                      [float(margin)], "pass" if margin >= 0 else "fail",
                      {"stderr": se, "xi0_mean": float(X[:, 0].mean())})


def increment_check(values, direction, window_index=None, claim="increment-sign"):
    """Sign test on E[M_{t_j+1} - M_{t_j}] over windows of a sampled process.

    `values` has one row per path. direction "super" passes when every mean
    increment is <= 3 stderr, "sub" when every one is >= -3 stderr.
    """
    M = np.atleast_2d(np.asarray(values, dtype=float))
    n = M.shape[0]
    if n < 2:
        raise PrecisionError("need at least two paths")
    idx = np.arange(M.shape[1]) if window_index is None else np.asarray(window_index)
    inc = np.diff(M[:, idx], axis=1)
    mean = inc.mean(axis=0)
    se = inc.std(axis=0, ddof=1) / math.sqrt(n)
    if direction == "super":
        margins = 3 * se - mean
    elif direction == "sub":
        margins = mean + 3 * se
    else:
        raise DomainError("direction is 'super' or 'sub'")
    ok = margins >= -1e-15 * np.maximum(1.0, np.abs(mean))
    return StatReport(claim, {"paths": n, "direction": direction}, idx.tolist(), mean.tolist(),
                      (3 * se).tolist(), margins.tolist(), "pass" if ok.all() else "fail",
                      {"stderr": se.tolist(), "failing_windows": np.flatnonzero(~ok).tolist()})


def check_drift_along_paths(times, states, triple, which, window_index=None, stop_level=None,
                            claim=None):
    """Monte Carlo martingale check along simulated paths.

    super: M_t = 1/V(X_t) - int phi(1/V) ds - b int 1{V <= ell0} ds must not
    increase on average. sub: S_t = psi(V(X_{t ^ T})) + c int_0^{t ^ T}
    1{V <= ell0} ds must not decrease, T the first time V exceeds
    `stop_level` (no stopping when None). Integrals are left-endpoint on the
    simulation grid.
    """
    t = np.asarray(times, dtype=float)
    X = np.asarray(states, dtype=float)
    n = X.shape[0]
    if n < MIN_DRIFT_PATHS:
        raise PrecisionError(f"need >= {MIN_DRIFT_PATHS} paths, got {n}")
    V = np.asarray(triple.V(X.reshape(-1, *X.shape[2:])), dtype=float).reshape(n, len(t))
    dt = np.diff(t)[None, :]
    low = (V[:, :-1] <= triple.ell0).astype(float)
    if which == "super":
        phi = np.asarray(triple.phi(1.0 / V[:, :-1]), dtype=float)
        integ = np.cumsum((phi + triple.b * low) * dt, axis=1)
        M = 1.0 / V - np.concatenate([np.zeros((n, 1)), integ], axis=1)
    elif which == "sub":
        if stop_level is None:
            alive = np.ones_like(V, dtype=bool)
        else:
            alive = np.cumsum(V > stop_level, axis=1) == 0
            alive = np.concatenate([np.ones((n, 1), bool), alive[:, :-1]], axis=1)
        last = np.where(alive, np.arange(len(t))[None, :], 0).max(axis=1)
        Vs = np.where(alive, V, V[np.arange(n), last][:, None])
        psi = np.asarray(triple.psi(Vs.ravel()), dtype=float).reshape(n, len(t))
        integ = np.cumsum(triple.c * low * alive[:, :-1] * dt, axis=1)
        M = psi + np.concatenate([np.zeros((n, 1)), integ], axis=1)
    else:
        raise DomainError("which is 'super' or 'sub'")
    rep = increment_check(M, which, window_index, claim or f"drift-{which}")
    rep.parameters.update({"ell0": triple.ell0, "b": triple.b, "c": triple.c})
    rep.grid = [float(t[i]) for i in rep.grid]
    return rep


def excursion_bound_curve(triple, params, h, thresholds, claim="excursion-tail"):
    """Unscaled curve 1/psi(2 G_h(r)/(1-q)) on the thresholds."""
    thr = np.asarray(thresholds, dtype=float)
    G = np.atleast_1d(g_h_inverse(h, triple.phi, params.eps, thr))
    vals = 1.0 / np.asarray(triple.psi(2.0 * G / (1 - params.q)), dtype=float)
    return BoundCurve(thr, vals, claim, {"eps": params.eps, "q": params.q})


def excursion_tail_check(samples, triple, params, h, thresholds, claim="excursion-tail"):
    """Empirical survival of the excursion functional against C/psi(2 G_h(r)/(1-q)).

    C is fitted at the smallest threshold; thresholds beyond the censoring
    horizon are rejected by the survival estimator.
    """
    cens = np.asarray(samples.censored)
    if cens.all():
        return StatReport(claim, {}, list(map(float, thresholds)), [], [], [], "inconclusive",
                          {"reason": "all samples censored"})
    func = np.asarray(samples.functional, dtype=float)
    # a censored functional is a lower bound; counting it as exceeding is exact
    # only for thresholds it already passed, so treat it at face value
    tail = empirical_survival(func, thresholds)
    curve = excursion_bound_curve(triple, params, h, thresholds, claim)
    if tail.survival[0] <= 0:
        raise AccuracyError("empirical survival vanishes at the first threshold", achieved=0.0)
    rep = compare_to_bound(tail.thresholds, tail.survival, curve, tail.ci_half_width, claim)
    rep.details["censored_fraction"] = float(cens.mean())
    return rep
