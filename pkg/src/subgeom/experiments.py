"""Named desk-scale experiments and the Lyapunov-triple presets used by `verify`.

Each runner takes a resolved parameter dict and returns (claims, curves):
claims are dicts with id, tag, measured, expected, tolerance and verdict;
curves map a name to (x, y, ci) arrays written out as CSV.
"""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import genkit, pathsim, ratefn, stats, zoo
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class Experiment:
    name: str
    tag: str
    summary: str
    preset: str | None
    defaults: dict
    runner: object
    runtime_s: float
    claims: tuple = field(default_factory=tuple)


def claim(cid, tag, measured, expected, tolerance, ok, **details):
    return {"id": cid, "tag": tag, "measured": measured, "expected": expected,
            "tolerance": tolerance, "verdict": "pass" if ok else "fail", "details": details}


def _slope_claim(cid, tag, fit, expected, tol, r2_min=None):
    ok = abs(fit.slope - expected) <= tol and (r2_min is None or fit.r_squared >= r2_min)
    return claim(cid, tag, fit.slope, expected, tol, ok, r_squared=fit.r_squared,
                 stderr=fit.stderr, fit_range=list(fit.fit_range), r2_min=r2_min)


def _grid(p, key):
    g = np.asarray(p[key], dtype=float)
    if g.size == 0:
        raise ConfigError(f"grid '{key}' is empty")
    return g


def _abs_coord(x):
    return np.abs(np.asarray(x, dtype=float))


# ------------------------------------------------------------ runners


def run_invariant_tail(model, p, tag, shape):
    """Occupation tail of |x| and a power-law or stretched fit."""
    thr = _grid(p, "thresholds")
    steps_per_chain = int(p["total_steps"]) // int(p["chains"])
    T = steps_per_chain * p["dt"]
    tail = pathsim.occupation_tail(model, p["x0"], _abs_coord, p["burn_frac"] * T, T, thr,
                                   seed=p["seed"], dt=p["dt"], n_chains=int(p["chains"]))
    curves = {"occupation_tail": (thr, tail.survival, tail.ci_half_width)}
    power = stats.loglog_slope(tail, p.get("fit_range"))
    if shape == "power":
        return [_slope_claim(f"{tag}-slope", tag, power, p["expected"], p["tolerance"],
                             p.get("r2_min"))], curves
    stretched = stats.stretched_slope(tail, p["rho"], p.get("fit_range"))
    ok = stretched.r_squared >= p["r2_min"] and power.r_squared < stretched.r_squared
    c = claim(f"{tag}-shape", tag, stretched.r_squared, p["r2_min"], None, ok,
              power_law_r_squared=power.r_squared, stretched_rate=-stretched.slope,
              rho=p["rho"], power_slope=power.slope)
    return [c], curves


def run_poly_invariant_tail(model, p):
    return run_invariant_tail(model, p, "thm3.2a", "power")


def run_stretched_invariant_tail(model, p):
    return run_invariant_tail(model, p, "thm3.5", "stretched")


def run_exp_invariant_tail(model, p):
    return run_invariant_tail(model, p, "thm3.8", "stretched")


def _return_time(model, p, V, tag):
    spec = pathsim.StoppingSpec("return_to_set", radius=p["radius"], delay=p["delay"],
                                T_max=p["T_max"])
    batch = pathsim.sample_stopping(model, p["x0"], spec, V, seed=p["seed"],
                                    n_samples=int(p["paths"]), dt=p.get("dt", 1e-3))
    thr = _grid(p, "times")
    tail = stats.empirical_survival(batch, thr)
    fit = stats.loglog_slope(tail, p.get("fit_range"))
    c = _slope_claim(f"{tag}-slope", tag, fit, p["expected"], p["tolerance"])
    c["details"]["censored_fraction"] = float(np.mean(batch.censored))
    return [c], {"return_time_survival": (thr, tail.survival, tail.ci_half_width)}


def run_poly_return_time(model, p):
    return _return_time(model, p, zoo.lyapunov("p_m", m=2.0), "thm3.2b")


def run_levy_return_time(model, p):
    return _return_time(model, p, model.default_lyapunov(), "thm3.9b")


def run_levy_invariant_tail(model, p):
    """Occupation tail of V = log x; slope of log survival against log log r."""
    V = model.default_lyapunov()
    thr = _grid(p, "thresholds")
    T = p["horizon"]
    tail = pathsim.occupation_tail(model, p["x0"], V, p["burn_frac"] * T, T, thr,
                                   seed=p["seed"], n_chains=int(p["chains"]))
    fit = stats.loglog_slope(tail, p.get("fit_range"))
    return [_slope_claim("thm3.9a-slope", "thm3.9a", fit, p["expected"], p["tolerance"])], \
        {"log_occupation_tail": (thr, tail.survival, tail.ci_half_width)}


def _coupled_tv(model, p, x0, sampler, project):
    times = _grid(p, "times")
    samples, refs = pathsim.simulate_marginals(model, x0, times, int(p["paths"]), p["dt"],
                                               p["seed"], reference=sampler)
    samples = [project(s) for s in samples]
    refs = [project(r) for r in refs]
    tv = stats.tv_curve(samples, refs)
    lo, hi, point_ci = _bootstrap(times, samples, refs, int(p["bootstrap"]), p["seed"])
    fit = stats.loglog_slope((times, tv), p.get("fit_range"))
    return times, tv, fit, (lo, hi), point_ci


def _bootstrap(times, samples, refs, n_boot, seed):
    """Percentile slope interval and per-time half-widths from paired resampling."""
    if n_boot <= 0:
        return None, None, np.zeros(len(times))
    rng = np.random.default_rng(seed)
    n = len(samples[0])
    tvs = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        tvs.append(stats.tv_curve([s[idx] for s in samples], [r[idx] for r in refs]))
    tvs = np.array(tvs)
    ok = np.all(tvs > 0, axis=1)
    slopes = [stats.loglog_slope((times, row)).slope for row in tvs[ok]]
    half = (np.quantile(tvs, 0.975, axis=0) - np.quantile(tvs, 0.025, axis=0)) / 2
    return float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975)), half


def poly_tv_bound(model, times, x0=0.0, eps=0.1, q=0.5):
    """r_f/2 for f = 1 from the lower-bound triple (p_{m_c-eps}, u^{1+2/(m_c-eps)}, r^{(m_c+eps)/(m_c-eps)})."""
    mc, ell = model.m_c, model.ell
    m = mc - eps
    V = zoo.lyapunov("p_m", m=m)
    phi = ratefn.power(1 + (2 - ell) / m, 1.0, (0.0, 1.0))
    psi = ratefn.power((mc + eps) / m)
    triple = ratefn.LyapunovTriple(V, phi, psi, name="tv-lower")
    # growth of E V(X_t): V(x0) + t * sup A V over a grid covering the inner region
    grid = np.linspace(0.0, 6.0, 601)
    AV = [genkit.composite_generator(model, V, None, 1.0, 0.0, x).value for x in grid]
    b = max(0.0, max(AV))
    v0 = float(V(np.array([x0]))[0])
    rate = ratefn.rate_from_triple(triple, ratefn.BoundParams(eps, q), ratefn.power(1.0),
                                   ratefn.constant(1.0), lambda x, t: v0 + b * t)
    vals = rate.curve(x0, times)
    return stats.BoundCurve(np.asarray(times, float), vals, "thm3.1",
                            {"eps": eps, "q": q, "b": b, "V": f"p_{m:g}"})


def run_poly_tv_rate(model, p):
    x0 = p["x0"]
    times, tv, fit, slope_ci, point_ci = _coupled_tv(
        model, p, x0, lambda rng, n: model.law.sample(rng, n), lambda s: s)
    c1 = _slope_claim("thm3.1-slope", "thm3.1", fit, p["expected"], p["tolerance"])
    c1["details"]["bootstrap_slope_ci"] = list(slope_ci) if slope_ci[0] is not None else None
    bound = poly_tv_bound(model, times, x0, p["eps"], p["q"])
    rep = stats.compare_to_bound(times, tv, bound, point_ci, "thm3.1")
    c2 = claim("thm3.1-bound", "thm3.1", min(rep.margins[1:]), 0.0, None, rep.passed,
               margins=rep.margins, fitted_bound=rep.bound, **rep.parameters)
    curves = {"tv": (times, tv, point_ci), "tv_lower_bound": (times, np.array(rep.bound),
                                                              np.zeros(len(times)))}
    return [c1, c2], curves


def run_oscillating_tv_rate(model, p):
    times, tv, fit, slope_ci, point_ci = _coupled_tv(
        model, p, p["x0"], lambda rng, n: model.law.sample(rng, n), lambda s: s)
    c = _slope_claim("ex3.4-slope", "ex3.4", fit, p["expected"], p["tolerance"])
    c["details"]["bootstrap_slope_ci"] = list(slope_ci) if slope_ci[0] is not None else None
    return [c], {"tv": (times, tv, point_ci)}


def run_hamiltonian_tv_rate(model, p):
    times, tv, fit, slope_ci, point_ci = _coupled_tv(
        model, p, np.asarray(p["x0"], dtype=float), model.sample_invariant, lambda s: s[:, 0])
    c = _slope_claim("thm3.11-slope", "thm3.11", fit, p["expected"], p["tolerance"])
    c["details"]["bootstrap_slope_ci"] = list(slope_ci) if slope_ci[0] is not None else None
    return [c], {"tv_z_marginal": (times, tv, point_ci)}


def _xi_instances(p):
    """The three configured processes: a capped exponential martingale and two constants."""
    n, dt, s = int(p["paths"]), p["dt"], p["s"]
    times = np.arange(0.0, s + dt / 2, dt)
    rng = pathsim.batch_rng(p["seed"], 0)
    dW = rng.standard_normal((n, len(times) - 1)) * math.sqrt(dt)
    W = np.concatenate([np.zeros((n, 1)), np.cumsum(dW, axis=1)], axis=1)
    gbm = np.minimum(1.0, p["xi0"] * np.exp(W - times[None, :] / 2))
    const = np.full((n, len(times)), p["const"])
    return [("capped-martingale", times, gbm, p["r"]),
            ("constant-below", times, const, p["r"]),
            ("constant-above", times, const, p["r_low"])]


def run_maximal_inequality(model, p):
    claims = []
    for label, times, paths, r in _xi_instances(p):
        rep = stats.check_maximal_inequality(times, paths, r, p["s"], f=None)
        claims.append(claim(f"prop4.1-{label}", "prop4.1", rep.measured[0], rep.bound[0], None,
                            rep.passed, r=r, stderr=rep.details["stderr"], margin=rep.margins[0]))
    return claims, {}


def run_excursion_duration(model, p):
    """Start at V = r_q (|x| = 2r, V = p_2) and measure time spent above level 4
    against eps*r^2/12 (f = 1, phi(u) = 12u^2)."""
    V = zoo.lyapunov("p_m", m=2.0)
    claims, xs, ys, cis = [], [], [], []
    for r in _grid(p, "levels"):
        thr = p["eps"] * r * r / 12.0
        spec = pathsim.StoppingSpec("sublevel_entry", level=p["lower_level"],
                                    T_max=thr * 1.01)
        batch = pathsim.sample_stopping(model, 2.0 * r, spec, V, seed=p["seed"] + int(r),
                                        n_samples=int(p["paths"]), dt=p["dt"])
        hit = batch.functional >= thr
        prob = float(hit.mean())
        se = math.sqrt(max(prob * (1 - prob), 1e-300) / len(hit))
        ok = prob > p["q"] - 3 * se
        claims.append(claim(f"lemma4.2-r{r:g}", "lemma4.2", prob, p["q"], 3 * se, ok,
                            threshold=thr, start_abs_x=2 * r))
        xs.append(r), ys.append(prob), cis.append(3 * se)
    return claims, {"excursion_probability": (np.array(xs), np.array(ys), np.array(cis))}


def run_non_confinement(model, p):
    """Running max of V strictly grows from the first to the last horizon."""
    presets = p["presets"]
    claims = []
    for name in presets:
        mdl = zoo.preset(name)
        V = mdl.default_lyapunov()
        x0 = np.zeros(2) if isinstance(mdl, zoo.HamiltonianDamping) else p["x0"]
        hz, mx = pathsim.running_max_ladder(mdl, x0, V, p["horizon"], int(p["doublings"]),
                                            int(p["paths"]), seed=p["seed"], dt=p["dt"])
        grew = mx[:, -1] > mx[:, 0]
        frac = float(grew.mean())
        pairwise = float(np.mean(np.diff(mx, axis=1) > 0))
        claims.append(claim(f"appA-{name}", "appA", frac, p["min_fraction"], None,
                            frac >= p["min_fraction"], pairwise_fraction=pairwise,
                            horizons=hz.tolist()))
    return claims, {}


# ---------------------------------------------------------- registry

_TAIL = dict(x0=0.0, dt=0.05, chains=16, total_steps=10_000_000, burn_frac=0.05)

EXPERIMENTS = {e.name: e for e in [
    Experiment("poly-invariant-tail", "thm3.2a", "occupation tail of |x| for the k=3 Langevin model",
               "ap-langevin-k3",
               dict(_TAIL, thresholds=list(np.geomspace(1.5, 8.0, 10)), expected=-2.0,
                    tolerance=0.25, r2_min=0.97),
               run_poly_invariant_tail, 15, ("thm3.2a-slope",)),
    Experiment("poly-return-time", "thm3.2b", "return-time survival to {|x| <= 1}",
               "ap-langevin-k3",
               dict(x0=2.0, radius=1.0, delay=0.1, T_max=1000.0, dt=0.002, paths=100_000,
                    times=list(np.geomspace(1.0, 100.0, 12)), fit_range=[1.0, 100.0],
                    expected=-2.0, tolerance=0.3),
               run_poly_return_time, 20, ("thm3.2b-slope",)),
    Experiment("poly-tv-rate", "thm3.1", "TV to the invariant law, coupled reference ensemble",
               "ap-langevin-k3",
               dict(x0=0.0, dt=0.05, paths=100_000, times=[4, 8, 16, 32, 64, 128, 256],
                    bootstrap=100, expected=-1.0, tolerance=0.25, eps=0.1, q=0.5),
               run_poly_tv_rate, 30, ("thm3.1-slope", "thm3.1-bound")),
    Experiment("oscillating-tv-rate", "ex3.4", "TV decay for the oscillating-coefficient model",
               "ap-oscillating",
               dict(x0=0.0, dt=0.05, paths=100_000, times=[4, 8, 16, 32, 64, 128, 256],
                    bootstrap=0, expected=-1.0, tolerance=0.3),
               run_oscillating_tv_rate, 30, ("ex3.4-slope",)),
    Experiment("stretched-invariant-tail", "thm3.5", "stretched-exponential occupation tail",
               "ase-p05",
               dict(_TAIL, thresholds=list(np.geomspace(1.0, 64.0, 12)), rho=0.5, r2_min=0.98),
               run_stretched_invariant_tail, 15, ("thm3.5-shape",)),
    Experiment("exp-invariant-tail", "thm3.8", "exponential-type occupation tail",
               "ae-default",
               dict(_TAIL, thresholds=list(np.linspace(1.0, 6.0, 11)), rho=1.0, r2_min=0.98),
               run_exp_invariant_tail, 15, ("thm3.8-shape",)),
    Experiment("levy-return-time", "thm3.9b", "return-time survival to {x <= 1} (exact scheme)",
               "levy-mc2",
               dict(x0=1.0, radius=1.0, delay=0.1, T_max=1000.0, paths=1_000_000,
                    times=list(np.geomspace(1.0, 50.0, 10)), fit_range=[1.0, 50.0],
                    expected=-2.0, tolerance=0.4),
               run_levy_return_time, 3, ("thm3.9b-slope",)),
    Experiment("levy-invariant-tail", "thm3.9a", "occupation tail of log x (exact scheme)",
               "levy-mc2",
               dict(x0=1.0, chains=16, horizon=200_000.0, burn_frac=0.01,
                    thresholds=list(np.geomspace(1.5, 50.0, 10)), expected=-1.0,
                    tolerance=0.35),
               run_levy_invariant_tail, 5, ("thm3.9a-slope",)),
    Experiment("hamiltonian-tv-rate", "thm3.11", "TV of the position marginal, coupled reference",
               "hamiltonian-15",
               dict(x0=[0.0, 0.0], dt=0.05, paths=100_000, times=[4, 8, 16, 32, 64, 128],
                    bootstrap=0, expected=-1.0, tolerance=0.3),
               run_hamiltonian_tv_rate, 10, ("thm3.11-slope",)),
    Experiment("maximal-inequality", "prop4.1", "maximal inequality on three bounded processes",
               None,
               dict(paths=10_000, dt=0.01, s=5.0, xi0=0.1, r=0.5, const=0.3, r_low=0.2),
               run_maximal_inequality, 1,
               ("prop4.1-capped-martingale", "prop4.1-constant-below", "prop4.1-constant-above")),
    Experiment("excursion-duration", "lemma4.2", "time spent above a low level after reaching r_q",
               "ap-langevin-k3",
               dict(levels=[10.0, 20.0, 40.0], eps=0.25, q=0.5, lower_level=4.0, paths=10_000,
                    dt=0.002),
               run_excursion_duration, 20, ("lemma4.2-r10", "lemma4.2-r20", "lemma4.2-r40")),
    Experiment("non-confinement", "appA", "running max of V grows across doubling horizons",
               None,
               dict(presets=list(zoo.PRESETS), horizon=1.0, doublings=6, paths=100, dt=0.05,
                    x0=1.0, min_fraction=0.9),
               run_non_confinement, 1, tuple(f"appA-{n}" for n in zoo.PRESETS)),
]}


def list_experiments():
    return [{"name": e.name, "tag": e.tag, "preset": e.preset, "summary": e.summary,
             "runtime_s": e.runtime_s} for e in EXPERIMENTS.values()]


def get(name):
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}") from None


def run_experiment(name, seed, params=None, model_overrides=None, preset=None):
    """Resolve defaults, build the model and run. Returns (claims, curves, resolved, seconds)."""
    exp = get(name)
    resolved = dict(exp.defaults)
    resolved.update(params or {})
    resolved["seed"] = int(seed)
    for key in ("paths", "chains", "total_steps"):
        if key in resolved and not int(resolved[key]) > 0:
            raise ConfigError(f"'{key}' must be a positive count, got {resolved[key]}")
    preset = preset or exp.preset
    model = zoo.preset(preset, **(model_overrides or {})) if preset else None
    t0 = time.perf_counter()
    claims, curves = exp.runner(model, resolved)
    return claims, curves, dict(resolved, preset=preset), time.perf_counter() - t0


# ------------------------------------------------------- triple presets


def _k3_triple(phi_scale=12.0, psi_exp=2.25, phi_exp=2.0):
    return ratefn.LyapunovTriple(zoo.lyapunov("p_m", m=2.0),
                                 ratefn.power(phi_exp, phi_scale, (0.0, 1.0)),
                                 ratefn.power(psi_exp), name="k3")


TRIPLES = {
    "k3-p2": lambda: _k3_triple(),
    "k3-p2-phi-half": lambda: _k3_triple(phi_scale=6.0),
    "k3-p2-psi-low": lambda: _k3_triple(psi_exp=1.5),
}


def verify_triple(preset_name, triple_name, grid, model_overrides=None):
    """Run both drift inequalities on a grid; returns claims."""
    if triple_name not in TRIPLES:
        raise ConfigError(f"unknown triple preset {triple_name!r}; known: {', '.join(TRIPLES)}")
    grid = list(grid)
    if not grid:
        raise ConfigError("verification grid is empty")
    model = zoo.preset(preset_name, **(model_overrides or {}))
    triple = TRIPLES[triple_name]()
    out = []
    for which in ("super", "sub"):
        try:
            v = genkit.verify_drift(triple, model, grid, which)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        out.append(claim(f"drift-{which}", "thm2.6", v.max_violation, 0.0, v.margin, v.satisfied,
                         worst_point=float(np.ravel(v.worst_point)[0]), errors=v.errors))
    return out
