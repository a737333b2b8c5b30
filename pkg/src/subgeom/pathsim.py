"""Path simulation, stopping times and occupation-time tails.

Diffusions use Euler-Maruyama; the Lévy-driven OU process is simulated
exactly (exponential decay between Poisson jump epochs) in log coordinates,
since its jumps overflow doubles. Random streams are Philox generators keyed
by (seed, batch index), so results do not depend on execution order.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import BlowUpError, DomainError, ConfigError
from .stats import TailEstimate
from .zoo import HamiltonianDamping, LevyOU

BATCH = 32768
OVERFLOW_GUARD = 1e12
GUARD_EVERY = 64
MIN_BATCHES = 20


def batch_rng(seed, batch=0):
    """Counter-based stream for one batch of paths."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(batch),))
    return np.random.Generator(np.random.Philox(ss))


def _batches(n):
    for i, start in enumerate(range(0, n, BATCH)):
        yield i, min(BATCH, n - start)


@dataclass(frozen=True)
class Path:
    times: np.ndarray
    states: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times)
        if t.ndim != 1 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise DomainError("path times must start at 0 and increase strictly")
        if len(self.states) != len(t):
            raise DomainError("times and states differ in length")
        if not np.all(np.isfinite(self.states)):
            raise DomainError("path states must be finite")

    @property
    def final(self):
        return self.states[-1]

    def to_csv(self, filename):
        """Write (t, state components) with a header row."""
        st = np.asarray(self.states)
        cols = ["x"] if st.ndim == 1 else [f"x{i}" for i in range(st.shape[1])]
        if self.meta.get("coordinates") == "log":
            cols = ["log_x"]
        elif self.meta.get("model_kind") == "hamiltonian":
            cols = ["z", "y"]
        with open(filename, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *cols])
            for t, s in zip(self.times, st):
                w.writerow([repr(float(t)), *map(lambda v: repr(float(v)), np.atleast_1d(s))])


# ------------------------------------------------------------ diffusions


def _initial(model, x0, n):
    x0 = np.asarray(x0, dtype=float)
    if model.n == 1:
        return np.broadcast_to(x0, (n,)).copy() if x0.ndim <= 1 and x0.size in (1, n) else x0.copy()
    return np.broadcast_to(x0, (n, model.n)).copy()


def euler_step(model, x, dt, dW):
    if isinstance(model, HamiltonianDamping):
        z, y = x[..., 0], x[..., 1]
        out = np.empty_like(x)
        out[..., 0] = z + y * dt
        out[..., 1] = y - (model.c * y + model.potential.dU(z)) * dt + model.sigma * dW
        return out
    return x + model.drift(x) * dt + model.noise(x, dW)


def _noise_shape(model, n):
    if isinstance(model, HamiltonianDamping) or model.n == 1:
        return (n,)
    return (n, model.n)


def _guard(x, t, seed):
    if not np.all(np.abs(x) < OVERFLOW_GUARD):
        raise BlowUpError(f"state left |x| < {OVERFLOW_GUARD:g} by t = {t:g}", time=t, seed=seed)


def advance(model, x, t0, t1, dt, rng, seed=None, others=()):
    """Euler steps from t0 to t1 (step shrunk to land on t1); `others` share the noise."""
    steps = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    h = (t1 - t0) / steps
    sq = math.sqrt(h)
    shape = _noise_shape(model, len(x))
    others = list(others)
    for k in range(steps):
        dW = rng.standard_normal(shape) * sq
        x = euler_step(model, x, h, dW)
        for i, y in enumerate(others):
            others[i] = euler_step(model, y, h, dW)
        if k % GUARD_EVERY == GUARD_EVERY - 1:
            _guard(x, t0 + (k + 1) * h, seed)
    _guard(x, t1, seed)
    return x, others


def _simulate_path(model, x0, dt, T, seed, record_every, csv_path, kind):
    if not dt > 0 or T < dt:
        raise DomainError("need dt > 0 and T >= dt")
    rng = batch_rng(seed, 0)
    steps = math.ceil(T / dt - 1e-9)
    x = _initial(model, x0, 1)
    shape = _noise_shape(model, 1)
    sq = math.sqrt(dt)
    rec_t, rec_x = [0.0], [x[0].copy()]
    for k in range(1, steps + 1):
        x = euler_step(model, x, dt, rng.standard_normal(shape) * sq)
        if not np.all(np.abs(x) < OVERFLOW_GUARD):
            raise BlowUpError(f"state overflow at t = {k * dt:g}", time=k * dt, seed=seed)
        if k % record_every == 0 or k == steps:
            rec_t.append(k * dt)
            rec_x.append(x[0].copy())
    path = Path(np.array(rec_t), np.array(rec_x), seed,
                {"scheme": "euler-maruyama", "dt": dt, "steps": steps, "model_kind": kind})
    if csv_path:
        path.to_csv(csv_path)
    return path


def simulate_diffusion(model, x0, dt=1e-3, T=1.0, seed=0, record_every=1, csv_path=None):
    """One Euler-Maruyama path with ceil(T/dt) steps."""
    return _simulate_path(model, x0, dt, T, seed, record_every, csv_path, "diffusion")


def simulate_hamiltonian(model, point, dt=1e-3, T=1.0, seed=0, record_every=1, csv_path=None):
    """One Euler path of (z, y); noise enters the velocity only."""
    return _simulate_path(model, np.asarray(point, dtype=float), dt, T, seed, record_every,
                          csv_path, "hamiltonian")


def simulate_marginals(model, x0, times, n_paths, dt, seed, reference=None):
    """Ensemble states at each time in `times`.

    `reference(rng, n)` optionally draws starting states for a second
    ensemble driven by the same Brownian increments (a synchronous coupling).
    Returns (samples, reference_samples), lists aligned with `times`.
    """
    times = list(times)
    if sorted(times) != times or times[0] <= 0:
        raise DomainError("times must be positive and increasing")
    out = [[] for _ in times]
    ref_out = [[] for _ in times] if reference is not None else None
    for b, n in _batches(n_paths):
        rng = batch_rng(seed, b)
        x = _initial(model, x0, n)
        others = [reference(rng, n)] if reference is not None else []
        t = 0.0
        for i, T in enumerate(times):
            x, others = advance(model, x, t, T, dt, rng, seed, others)
            t = T
            out[i].append(x.copy())
            if others:
                ref_out[i].append(others[0].copy())
    samples = [np.concatenate(o) for o in out]
    refs = [np.concatenate(o) for o in ref_out] if ref_out is not None else None
    return samples, refs


def simulate_ensemble(model, x0, dt, T, n_paths, seed, record_every=1):
    """Independent paths on a common grid; returns (times, states) with one row per path."""
    steps = math.ceil(T / dt - 1e-9)
    keep = list(range(0, steps + 1, record_every))
    if keep[-1] != steps:
        keep.append(steps)
    times = np.array(keep) * dt
    rows = []
    for b, n in _batches(n_paths):
        rng = batch_rng(seed, b)
        x = _initial(model, x0, n)
        shape = _noise_shape(model, n)
        rec = [x.copy()]
        sq = math.sqrt(dt)
        for k in range(1, steps + 1):
            x = euler_step(model, x, dt, rng.standard_normal(shape) * sq)
            if k % GUARD_EVERY == 0:
                _guard(x, k * dt, seed)
            if k % record_every == 0 or k == steps:
                rec.append(x.copy())
        rows.append(np.stack(rec, axis=1))
    return times, np.concatenate(rows)


# ------------------------------------------------------------------ Lévy


def _log_disp(model, lx):
    if callable(model.sigma):
        return np.log(model.disp(np.exp(np.minimum(lx, 700.0))))
    return math.log(model.sigma)


def _log_x0(x0):
    x0 = float(x0)
    if x0 < 0:
        raise DomainError("the default jump law is positive; start at x0 >= 0")
    return math.log(x0) if x0 > 0 else -math.inf


def simulate_levy_ou(model, x0, T, seed=0, csv_path=None):
    """Exact path: knots at jump epochs (post-jump values) and at T, in log coordinates."""
    nu = model.nu
    rng = batch_rng(seed, 0)
    rate = nu.total_mass
    lx = _log_x0(x0)
    times, states, jumps = [0.0], [lx], []
    t = 0.0
    while True:
        w = rng.exponential(1.0 / rate) if rate > 0 else math.inf
        if t + w >= T:
            times.append(T)
            states.append(lx - model.mu * (T - t))
            break
        t += w
        lx = lx - model.mu * w
        lj = float(nu.log_sample(rng, 1)[0])
        lx = float(np.logaddexp(lx, _log_disp(model, lx) + lj))
        times.append(t)
        states.append(lx)
        jumps.append(lj)
    st = np.array(states)
    if not np.isfinite(st[0]):
        st = st.copy()
        st[0] = -745.0
    path = Path(np.array(times), st, seed,
                {"scheme": "exact", "coordinates": "log", "mu": model.mu,
                 "jump_count": len(jumps), "log_jumps": jumps, "model_kind": "levy"})
    if csv_path:
        path.to_csv(csv_path)
    return path


def levy_segments(model, x0, T, seed, n_chains=1, batch=0):
    """Exact piecewise-decay segments for independent chains run to time T.

    Returns (start_log_values, durations, start_times), each a list per chain.
    """
    rng = batch_rng(seed, batch)
    nu = model.nu
    rate = nu.total_mass
    lx = np.full(n_chains, _log_x0(x0))
    t = np.zeros(n_chains)
    starts, durs, t0s = [[] for _ in range(n_chains)], [[] for _ in range(n_chains)], \
        [[] for _ in range(n_chains)]
    chunk = max(64, int(rate * T / 8) + 1)
    buf_w = buf_j = None
    pos = chunk
    active = np.ones(n_chains, dtype=bool)
    S, D, S0 = [], [], []
    while active.any():
        if pos == chunk:
            buf_w = rng.exponential(1.0 / rate, size=(chunk, n_chains))
            buf_j = nu.log_sample(rng, chunk * n_chains).reshape(chunk, n_chains)
            pos = 0
        w = np.minimum(buf_w[pos], np.maximum(T - t, 0.0))
        ended = t + buf_w[pos] >= T
        S.append(np.where(active, lx, np.nan))
        D.append(np.where(active, w, 0.0))
        S0.append(t.copy())
        lx = lx - model.mu * w
        jumped = active & ~ended
        lx = np.where(jumped, np.logaddexp(lx, _log_disp(model, lx) + buf_j[pos]), lx)
        t = t + w
        active = jumped
        pos += 1
    S, D, S0 = np.array(S), np.array(D), np.array(S0)
    for c in range(n_chains):
        keep = D[:, c] > 0
        starts[c], durs[c], t0s[c] = S[keep, c], D[keep, c], S0[keep, c]
    return starts, durs, t0s


# -------------------------------------------------------------- stopping

KINDS = ("return_to_set", "sublevel_entry", "superlevel_exit")


@dataclass(frozen=True)
class StoppingSpec:
    """Which stopping time to sample.

    return_to_set: first t > delay with |x| <= radius (x <= radius for the
    positive jump model), or V <= level when no radius is given.
    sublevel_entry: first t >= delay with V < level.
    superlevel_exit: first t >= delay with V > level.
    """
    kind: str
    level: float | None = None
    radius: float | None = None
    delay: float = 0.0
    T_max: float = 1e3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown stopping kind {self.kind!r}")
        if self.delay < 0 or not self.T_max > self.delay:
            raise ConfigError("need delay >= 0 and T_max > delay")
        if self.kind != "return_to_set" and self.level is None:
            raise ConfigError(f"{self.kind} needs a level")
        if self.kind == "return_to_set" and self.level is None and self.radius is None:
            raise ConfigError("return_to_set needs a radius or a level")
        if self.level is not None and self.level < 1:
            raise ConfigError("levels of V lie in [1, inf)")

    def predicate(self, V):
        if self.kind == "return_to_set":
            if self.radius is not None:
                r = self.radius
                return lambda x: (np.abs(x) if x.ndim == 1 else np.linalg.norm(x, axis=-1)) <= r
            return lambda x: V(x) <= self.level
        if self.kind == "sublevel_entry":
            return lambda x: V(x) < self.level
        return lambda x: V(x) > self.level


@dataclass(frozen=True)
class StoppingSample:
    value: float
    censored: bool
    excursion_functional: float | None
    max_v: float

    def __post_init__(self):
        if self.excursion_functional is not None and self.excursion_functional < 0:
            raise DomainError("excursion functional must be non-negative")


@dataclass(frozen=True)
class StoppingBatch:
    """Arrays of stopping times with censoring flags, functionals and excursion heights."""
    values: np.ndarray
    censored: np.ndarray
    functional: np.ndarray | None
    max_v: np.ndarray
    spec: StoppingSpec
    seed: int

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        f = None if self.functional is None else float(self.functional[i])
        return StoppingSample(float(self.values[i]), bool(self.censored[i]), f, float(self.max_v[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _h_apply(h, v):
    if h is None:
        return 1.0
    return h(v)


def _stop_diffusion(model, x0, spec, V, h, seed, n, dt):
    pred = spec.predicate(V)
    vals = np.full(n, float(spec.T_max))
    cens = np.ones(n, dtype=bool)
    func = np.zeros(n)
    maxv = np.empty(n)
    done_at = 0
    for b, m in _batches(n):
        rng = batch_rng(seed, b)
        x = _initial(model, x0, m)
        idx = np.arange(done_at, done_at + m)
        mv = np.asarray(V(x), dtype=float).copy()
        maxv[idx] = mv
        if spec.delay == 0 and spec.kind != "return_to_set":
            hit = pred(x)
            vals[idx[hit]] = 0.0
            cens[idx[hit]] = False
            keep = ~hit
            x, idx = x[keep], idx[keep]
        t = 0.0
        shape1 = _noise_shape(model, 1)[1:]
        sq = math.sqrt(dt)
        steps = math.ceil(spec.T_max / dt - 1e-9)
        for k in range(1, steps + 1):
            if len(idx) == 0:
                break
            v_prev = np.asarray(V(x), dtype=float)
            func[idx] += _h_apply(h, v_prev) * dt
            x = euler_step(model, x, dt, rng.standard_normal((len(idx), *shape1)) * sq)
            t = k * dt
            if k % GUARD_EVERY == 0:
                _guard(x, t, seed)
            v_now = np.asarray(V(x), dtype=float)
            np.maximum.at(maxv, idx, v_now)
            if t > spec.delay:
                hit = pred(x)
                if hit.any():
                    vals[idx[hit]] = t
                    cens[idx[hit]] = False
                    keep = ~hit
                    x, idx = x[keep], idx[keep]
        done_at += m
    return vals, cens, func, maxv


def _gl_nodes(k=16):
    nodes, weights = np.polynomial.legendre.leggauss(k)
    return (nodes + 1) / 2, weights / 2


def _stop_levy(model, x0, spec, V, h, seed, n):
    """Exact stopping for the positive-jump OU process in log coordinates."""
    if spec.kind == "return_to_set" and spec.radius is not None:
        level_log = math.log(spec.radius)
    elif spec.kind in ("return_to_set", "sublevel_entry"):
        level_log = _v_level_to_log(V, spec.level)
    else:
        level_log = _v_level_to_log(V, spec.level)
    log_v = V.log_eval
    nodes, weights = _gl_nodes()
    vals = np.full(n, float(spec.T_max))
    cens = np.ones(n, dtype=bool)
    func = np.zeros(n)
    maxlog = np.full(n, _log_x0(x0))
    done_at = 0
    for b, m in _batches(n):
        rng = batch_rng(seed, b)
        lx = np.full(m, _log_x0(x0))
        t = np.zeros(m)
        idx = np.arange(done_at, done_at + m)
        if spec.kind == "superlevel_exit" and spec.delay == 0:
            hit = lx > level_log
            vals[idx[hit]], cens[idx[hit]] = 0.0, False
            lx, t, idx = lx[~hit], t[~hit], idx[~hit]
        while len(idx):
            w = rng.exponential(1.0 / model.nu.total_mass, len(idx))
            w = np.minimum(w, spec.T_max - t)
            if spec.kind == "superlevel_exit":
                te = np.full(len(idx), np.inf)
            else:
                # decay reaches the level at t + (lx - level)/mu; strict entry for the sublevel kind
                te = t + np.maximum(lx - level_log, 0.0) / model.mu
                if spec.kind == "sublevel_entry":
                    te = np.where(lx < level_log, t, te)
                te = np.maximum(te, spec.delay) if spec.kind == "return_to_set" else te
            stop_in = te <= t + w
            seg_end = np.where(stop_in, te, t + w)
            if h is not None:
                L = seg_end - t
                ys = lx[:, None] - model.mu * L[:, None] * nodes[None, :]
                func[idx] += L * (h(log_v(ys)) @ weights)
            else:
                func[idx] += seg_end - t
            vals[idx[stop_in]] = te[stop_in]
            cens[idx[stop_in]] = False
            timeout = ~stop_in & (t + w >= spec.T_max)
            go = ~stop_in & ~timeout
            lx_new = lx[go] - model.mu * w[go]
            lj = model.nu.log_sample(rng, int(go.sum()))
            lx_new = np.logaddexp(lx_new, _log_disp(model, lx_new) + lj)
            ig = idx[go]
            maxlog[ig] = np.maximum(maxlog[ig], lx_new)
            t_new = t[go] + w[go]
            if spec.kind == "superlevel_exit":
                hit = (lx_new > level_log) & (t_new >= spec.delay)
                vals[ig[hit]], cens[ig[hit]] = t_new[hit], False
                lx_new, t_new, ig = lx_new[~hit], t_new[~hit], ig[~hit]
            lx, t, idx = lx_new, t_new, ig
        done_at += m
    return vals, cens, func, np.asarray(log_v(maxlog), dtype=float)


def _v_level_to_log(V, level):
    """log x at which the (non-decreasing) V crosses `level`, by bisection in log coordinates."""
    from .ratefn import MonotoneFn, invert_monotone
    f = MonotoneFn(lambda lx: float(V.log_eval(lx)), (-50.0, math.inf), "non-decreasing")
    lo = -50.0
    if float(V.log_eval(lo)) >= level:
        return lo
    return invert_monotone(f, level, (lo, math.inf))


def sample_stopping(model, x0, spec, V, h=None, seed=0, n_samples=1, dt=1e-3):
    """Sample a stopping time and the excursion functional int_0^tau h(V(X_s)) ds.

    The functional uses left-endpoint quadrature on the Euler grid (exact
    segment quadrature for the jump model). Censoring at T_max is recorded
    in the batch, not raised.
    """
    if isinstance(model, LevyOU):
        if V.log_eval is None:
            raise ConfigError("the jump model needs a Lyapunov function with log_eval")
        out = _stop_levy(model, x0, spec, V, h, seed, n_samples)
    else:
        out = _stop_diffusion(model, x0, spec, V, h, seed, n_samples, dt)
    vals, cens, func, maxv = out
    return StoppingBatch(vals, cens, func, maxv, spec, seed)


# ------------------------------------------------------------- occupation


def _batch_means_ci(blocks, level=0.95):
    nb = blocks.shape[0]
    if nb < MIN_BATCHES:
        warnings.warn(f"only {nb} batches; confidence interval unavailable")
        return np.full(blocks.shape[1], np.nan)
    q = sps.t.ppf(0.5 + level / 2, nb - 1)
    return q * blocks.std(axis=0, ddof=1) / math.sqrt(nb)


def occupation_tail(model, x0, V, burn_in, T, thresholds, seed=0, dt=1e-3, n_chains=1,
                    n_batches=MIN_BATCHES):
    """Fraction of post-burn-in time with V(X_t) >= r, pooled over independent chains.

    Each chain runs to time T. The confidence interval is from batch means
    over `n_batches` consecutive time blocks.
    """
    if not T > burn_in:
        raise DomainError("need T > burn_in")
    thr = np.asarray(thresholds, dtype=float)
    if isinstance(model, LevyOU):
        return _occupation_levy(model, x0, V, burn_in, T, thr, seed, n_chains, n_batches)
    rng = batch_rng(seed, 0)
    x = _initial(model, x0, n_chains)
    shape = _noise_shape(model, n_chains)
    sq = math.sqrt(dt)
    steps = math.ceil(T / dt - 1e-9)
    burn = math.ceil(burn_in / dt - 1e-9)
    kept = steps - burn
    block_len = max(1, kept // n_batches)
    blocks = np.zeros((n_batches, len(thr)))
    block_n = np.zeros(n_batches)
    running_max = -np.inf
    for k in range(1, steps + 1):
        x = euler_step(model, x, dt, rng.standard_normal(shape) * sq)
        if k % GUARD_EVERY == 0:
            _guard(x, k * dt, seed)
        if k > burn:
            v = np.asarray(V(x), dtype=float)
            j = min((k - burn - 1) // block_len, n_batches - 1)
            blocks[j] += np.count_nonzero(v[:, None] >= thr[None, :], axis=0)
            block_n[j] += len(v)
            running_max = max(running_max, float(v.max()))
    return _tail_from_blocks(thr, blocks, block_n, running_max,
                             {"dt": dt, "T": T, "burn_in": burn_in, "chains": n_chains,
                              "steps": steps * n_chains})


def _tail_from_blocks(thr, blocks, block_n, running_max, meta):
    counts = blocks.sum(axis=0)
    total = block_n.sum()
    surv = counts / total
    surv = np.minimum.accumulate(surv)
    full = block_n > 0
    ci = _batch_means_ci(blocks[full] / block_n[full, None])
    meta = dict(meta, running_max=running_max,
                beyond_max=[float(r) for r in thr if r > running_max])
    return TailEstimate(thr, surv, counts, float(total), ci, None, meta)


def _occupation_levy(model, x0, V, burn_in, T, thr, seed, n_chains, n_batches):
    """Exact time above each level along decay segments, in log coordinates."""
    levels = np.array([_v_level_to_log(V, r) if r > 1 else -np.inf for r in thr])
    starts, durs, t0s = levy_segments(model, x0, T, seed, n_chains)
    blocks = np.zeros((n_batches, len(thr)))
    block_n = np.zeros(n_batches)
    span = (T - burn_in) / n_batches
    running_max = -np.inf
    for s, d, t0 in zip(starts, durs, t0s):
        t1 = t0 + d
        a = np.maximum(t0, burn_in)
        keep = t1 > a
        s, t0, a, t1 = s[keep], t0[keep], a[keep], t1[keep]
        y0 = s - model.mu * (a - t0)  # log value at the (clipped) segment start
        L = t1 - a
        j = np.minimum(((a - burn_in) // span).astype(int), n_batches - 1)
        above = np.clip((y0[:, None] - levels[None, :]) / model.mu, 0.0, L[:, None])
        np.add.at(blocks, j, above)
        np.add.at(block_n, j, L)
        if len(y0):
            running_max = max(running_max, float(np.max(V.log_eval(y0))))
    return _tail_from_blocks(thr, blocks, block_n, running_max,
                             {"scheme": "exact", "T": T, "burn_in": burn_in, "chains": n_chains,
                              "coordinates": "V"})


# -------------------------------------------------------- non-confinement


def running_max_ladder(model, x0, V, T, n_doublings, n_paths, seed=0, dt=1e-2):
    """Running max of V(X) at horizons T * 2^k, k = 0..n_doublings; one row per path."""
    horizons = T * 2.0 ** np.arange(n_doublings + 1)
    out = np.empty((n_paths, len(horizons)))
    if isinstance(model, LevyOU):
        starts, durs, t0s = levy_segments(model, x0, horizons[-1], seed, n_paths)
        for p in range(n_paths):
            s, t0 = starts[p], t0s[p]
            for k, H in enumerate(horizons):
                sel = s[t0 < H]
                out[p, k] = float(V.log_eval(np.max(sel))) if len(sel) else float(V.log_eval(_log_x0(x0)))
        return horizons, out
    row = 0
    for b, m in _batches(n_paths):
        rng = batch_rng(seed, b)
        x = _initial(model, x0, m)
        run = np.asarray(V(x), dtype=float).copy()
        t = 0.0
        shape = _noise_shape(model, m)
        for k, H in enumerate(horizons):
            steps = max(1, math.ceil((H - t) / dt - 1e-9))
            h = (H - t) / steps
            sq = math.sqrt(h)
            for i in range(steps):
                x = euler_step(model, x, h, rng.standard_normal(shape) * sq)
                np.maximum(run, V(x), out=run)
                if i % GUARD_EVERY == 0:
                    _guard(x, t + (i + 1) * h, seed)
            t = H
            out[row:row + m, k] = run
        row += m
    return horizons, out
