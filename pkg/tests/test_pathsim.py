import math

import numpy as np
import pytest
from scipy import stats as sps

from subgeom import pathsim as ps, zoo
from subgeom.errors import BlowUpError, ConfigError, DomainError
from subgeom.zoo import HamiltonianDamping, LevyMeasure, Potential

FLAT = Potential(lambda z: 0.0 * np.asarray(z), lambda z: 0.0 * np.asarray(z),
                 lambda z: 0.0 * np.asarray(z), "0")


def ou(var=1.0):
    # invariant law N(0, var)
    return zoo.make_diffusion(lambda x: -x, math.sqrt(2 * var))


def test_deterministic_decay():
    m = zoo.make_diffusion(lambda x: -x, 0.0)
    for dt in [1e-2, 1e-3]:
        p = ps.simulate_diffusion(m, 1.0, dt=dt, T=1.0)
        assert p.final == pytest.approx(math.exp(-1), abs=dt)
        assert p.times[-1] == pytest.approx(1.0)


def test_brownian_variance():
    m = zoo.make_diffusion(lambda x: 0.0 * x, 1.0)
    (x,), _ = ps.simulate_marginals(m, 0.0, [2.0], 10_000, 0.01, seed=1)
    # Var of the sample variance is about 2 T^2 / N
    assert np.var(x) == pytest.approx(2.0, abs=4 * 2.0 * math.sqrt(2 / 10_000))


def test_ou_reaches_its_gaussian_law():
    (x,), _ = ps.simulate_marginals(ou(), 3.0, [12.0], 10_000, 0.01, seed=2)
    assert abs(x.mean()) < 4 / math.sqrt(10_000)
    assert np.var(x) == pytest.approx(1.0, abs=0.06)


def test_levy_without_jumps_is_exact_decay():
    m = zoo.make_levy_ou(mu=1.0, nu=LevyMeasure.atom(2.0, weight=1e-300))
    p = ps.simulate_levy_ou(m, 4.0, math.log(2.0), seed=0)
    assert p.meta["jump_count"] == 0
    assert math.exp(p.final) == pytest.approx(2.0, rel=1e-14)


def test_levy_knots_compose():
    m = zoo.preset("levy-mc2")
    p = ps.simulate_levy_ou(m, 1.0, 5.0, seed=4)
    assert p.meta["jump_count"] == len(p.times) - 2
    lx = p.states[0]
    for k, lj in enumerate(p.meta["log_jumps"]):
        pre = lx - m.mu * (p.times[k + 1] - p.times[k])
        lx = np.logaddexp(pre, math.log(m.sigma) + lj)
        assert p.states[k + 1] == pytest.approx(lx, rel=1e-12)
    assert p.states[-1] == pytest.approx(lx - m.mu * (p.times[-1] - p.times[-2]), rel=1e-12)


def test_hamiltonian_free_motion():
    h = HamiltonianDamping(0.0, 0.0, 1.0, FLAT)
    p = ps.simulate_hamiltonian(h, (0.0, 1.0), dt=0.01, T=1.0)
    assert p.final[0] == pytest.approx(1.0, rel=1e-9)
    assert p.final[1] == 1.0


def test_hamiltonian_damping():
    h = HamiltonianDamping(0.0, 1.0, 1.0, FLAT)
    p = ps.simulate_hamiltonian(h, (0.0, 1.0), dt=1e-3, T=1.0)
    assert p.final[1] == pytest.approx(math.exp(-1), abs=1e-3)


def test_hamiltonian_z_marginal_stays_invariant():
    h = zoo.preset("hamiltonian-15")
    rng = np.random.default_rng(0)
    start = h.sample_invariant(rng, 10_000)
    (zy,), _ = ps.simulate_marginals(h, start, [10.0], 10_000, 0.01, seed=3)
    z = zy[:, 0]
    u = np.asarray(h.z_law.cdf(z))
    obs = np.bincount(np.minimum((u * 20).astype(int), 19), minlength=20)
    assert sps.chisquare(obs).pvalue > 1e-3


def test_hitting_time_under_constant_drift():
    m = zoo.make_diffusion(lambda x: -1.0 + 0.0 * x, 0.0)
    spec = ps.StoppingSpec("return_to_set", radius=1.0, T_max=10.0)
    b = ps.sample_stopping(m, 2.0, spec, lambda x: 1 + x * x, seed=0, n_samples=3, dt=1e-3)
    assert np.allclose(b.values, 1.0, atol=2e-3)
    assert not b.censored.any()
    assert np.allclose(b.functional, b.values, atol=2e-3)


def test_immediate_sublevel_entry():
    m = ou()
    spec = ps.StoppingSpec("sublevel_entry", level=10.0, T_max=1.0)
    b = ps.sample_stopping(m, 0.5, spec, lambda x: 1 + x * x, n_samples=5)
    assert np.all(b.values == 0.0) and not b.censored.any()


def test_censoring_is_recorded():
    m = zoo.make_diffusion(lambda x: 0.0 * x, 0.0)
    spec = ps.StoppingSpec("return_to_set", radius=1.0, T_max=2.0)
    b = ps.sample_stopping(m, 3.0, spec, lambda x: 1 + x * x, n_samples=4, dt=0.01)
    assert b.censored.all() and np.all(b.values == 2.0)
    assert b[0].censored and b[0].value == 2.0


@pytest.mark.parametrize("kw", [dict(kind="bogus", level=2.0), dict(kind="sublevel_entry"),
                                dict(kind="return_to_set"), dict(kind="superlevel_exit", level=0.5),
                                dict(kind="return_to_set", radius=1.0, delay=5.0, T_max=1.0)])
def test_stopping_spec_validation(kw):
    with pytest.raises(ConfigError):
        ps.StoppingSpec(**kw)


def test_levy_stopping_matches_deterministic_decay():
    m = zoo.make_levy_ou(mu=1.0, nu=LevyMeasure.atom(2.0, weight=1e-300))
    V = zoo.lyapunov("g_m_log", m=1.0)
    spec = ps.StoppingSpec("return_to_set", radius=1.0, T_max=10.0)
    b = ps.sample_stopping(m, math.e ** 2, spec, V, n_samples=2)
    assert np.allclose(b.values, 2.0, rtol=1e-12)
    assert np.allclose(b.functional, 2.0, rtol=1e-12)


def test_ou_occupation_tail():
    est = ps.occupation_tail(ou(), 0.0, lambda x: 1 + x * x, burn_in=5.0, T=200.0,
                             thresholds=[2.0], seed=5, dt=0.01, n_chains=64)
    want = 2 * sps.norm.sf(1.0)  # 0.3173
    assert abs(est.survival[0] - want) <= est.ci_half_width[0] + 0.003


def test_occupation_extremes_and_flag():
    est = ps.occupation_tail(ou(), 0.0, lambda x: 1 + x * x, burn_in=1.0, T=20.0,
                             thresholds=[0.5, 1e6], seed=6, dt=0.01, n_chains=4)
    assert est.survival[0] == 1.0 and est.survival[1] == 0.0
    assert est.meta["beyond_max"] == [1e6]


def test_levy_occupation_exact_without_jumps():
    m = zoo.make_levy_ou(mu=1.0, nu=LevyMeasure.atom(2.0, weight=1e-300))
    V = zoo.lyapunov("g_m_log", m=1.0)
    # log x falls from 10 to 0 over [0, 10]; V >= 5 exactly while log x >= 5
    with pytest.warns(UserWarning, match="confidence interval unavailable"):
        est = ps.occupation_tail(m, math.exp(10.0), V, 0.0, 10.0, [5.0], n_chains=1)
    assert est.survival[0] == pytest.approx(0.5, rel=1e-12)


def test_same_seed_same_path():
    m = zoo.preset("ap-langevin-k3")
    a = ps.simulate_diffusion(m, 1.0, dt=0.01, T=5.0, seed=9)
    b = ps.simulate_diffusion(m, 1.0, dt=0.01, T=5.0, seed=9)
    c = ps.simulate_diffusion(m, 1.0, dt=0.01, T=5.0, seed=10)
    assert np.array_equal(a.states, b.states) and not np.array_equal(a.states, c.states)


def test_blow_up_reports_time():
    m = zoo.make_diffusion(lambda x: x ** 3, 0.0)
    with pytest.raises(BlowUpError) as info:
        ps.simulate_diffusion(m, 2.0, dt=1e-3, T=1.0, seed=3)
    assert 0 < info.value.time <= 1.0 and info.value.seed == 3


def test_csv_dump(tmp_path):
    m = ou()
    p = ps.simulate_diffusion(m, 0.0, dt=0.1, T=1.0, csv_path=tmp_path / "p.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "t,x" and len(rows) == len(p.times) + 1
    assert float(rows[-1].split(",")[1]) == p.final


def test_path_validation():
    with pytest.raises(DomainError):
        ps.Path(np.array([0.0, 1.0, 1.0]), np.zeros(3), 0)
    with pytest.raises(DomainError):
        ps.Path(np.array([0.0, 1.0]), np.array([0.0, np.nan]), 0)


def test_halving_dt_keeps_terminal_mean():
    m = zoo.preset("ap-langevin-k3")
    means = []
    for dt in [0.02, 0.01]:
        (x,), _ = ps.simulate_marginals(m, 3.0, [2.0], 10_000, dt, seed=7)
        means.append(np.abs(x).mean())
        se = np.abs(x).std() / math.sqrt(len(x))
    assert abs(means[0] - means[1]) < 4 * math.sqrt(2) * se


def test_coupled_reference_shares_noise():
    m = zoo.make_diffusion(lambda x: 0.0 * x, 1.0)
    (x,), (y,) = ps.simulate_marginals(m, 0.0, [1.0], 200, 0.1, seed=0,
                                       reference=lambda rng, n: np.full(n, 5.0))
    assert np.allclose(y - x, 5.0)


def test_running_max_ladder_grows():
    h, mx = ps.running_max_ladder(ou(), 0.0, lambda x: 1 + x * x, 1.0, 5, 50, seed=1, dt=0.05)
    assert np.allclose(h, 2.0 ** np.arange(6))
    assert np.all(np.diff(mx, axis=1) >= 0)
    assert np.mean(mx[:, -1] > mx[:, 0]) >= 0.9
