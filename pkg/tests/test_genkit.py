import math
import time

import numpy as np
import pytest

from subgeom import genkit as gk, ratefn as rf, zoo
from subgeom.errors import AssumptionError, OutOfRangeError
from subgeom.zoo import LevyMeasure


@pytest.fixture(scope="module")
def k3():
    return zoo.preset("ap-langevin-k3")


def test_ou_generator_on_square():
    r = gk.diffusion_generator(lambda x: -x, lambda x: 1.0, lambda x: x * x, 1.0)
    assert r.value == pytest.approx(-1.0, rel=1e-6)
    assert r.scheme == "finite-difference" and r.step > 0


def test_power_drift_generator():
    r = gk.diffusion_generator(lambda x: -3 / x, lambda x: 2.0, lambda x: x ** -2, 2.0)
    assert r.value == pytest.approx(0.75, rel=1e-5)


@pytest.mark.parametrize("x", [-3.0, 0.5, 7.0])
def test_generator_kills_constants(x):
    assert abs(gk.diffusion_generator(lambda p: 5 * p, lambda p: 3.0, lambda p: 4.2, x).value) <= 1e-9
    assert abs(gk.hamiltonian_generator(1.0, 1.0, lambda z: z * z, lambda p: 4.2, (x, 1.0)).value) <= 1e-9


def test_generator_linearity(k3):
    g1 = lambda x: x * x
    g2 = lambda x: math.log(1 + x * x)
    x = 3.0
    a = gk.model_generator(k3, lambda x: 2 * g1(x) - 0.5 * g2(x), x).value
    b = 2 * gk.model_generator(k3, g1, x).value - 0.5 * gk.model_generator(k3, g2, x).value
    assert a == pytest.approx(b, rel=1e-8)


def test_two_dimensional_generator():
    # b = -x, Sigma = I in 2D, g = |x|^2: A g = -2|x|^2 + 2
    r = gk.diffusion_generator(lambda p: -p, lambda p: np.eye(2), lambda p: float(p @ p),
                               np.array([1.0, 2.0]))
    assert r.value == pytest.approx(-8.0, rel=1e-6)


def test_hamiltonian_generator_examples():
    U = lambda z: 0.5 * math.log(1 + z * z)
    assert gk.hamiltonian_generator(1.0, 1.0, U, lambda p: p[1] ** 2, (0.0, 1.0)).value == \
        pytest.approx(-1.0, rel=1e-6)
    assert gk.hamiltonian_generator(1.0, 1.0, U, lambda p: p[0], (2.0, -0.7)).value == \
        pytest.approx(-0.7, rel=1e-8)


def test_jump_generator_atoms():
    nu = LevyMeasure.atom(2.0)
    for x in [0.5, 3.0]:
        r = gk.jump_generator(1.0, 1.0, nu, lambda y: y, x)
        assert r.value == pytest.approx(-x + 2, rel=1e-9)
    assert gk.jump_generator(0.0, 1.0, nu, lambda y: y * y, 1.0).value == pytest.approx(8.0)


def test_jump_generator_without_jumps_is_pure_drift():
    g = lambda y: y ** 3
    x = 1.7
    r = gk.jump_generator(0.8, 1.0, None, g, x)
    assert r.value == pytest.approx(-0.8 * x * 3 * x * x, rel=1e-8)


def test_jump_generator_log_lyapunov_bounded():
    model = zoo.preset("levy-mc2")
    g = zoo.lyapunov("g_m_log", m=1.0)
    vals = [gk.model_generator(model, g, x).value for x in np.geomspace(10, 1e8, 12)]
    assert max(vals) < 2.0
    closed = [gk.closed_form_generator(g, model, x).value for x in np.geomspace(1e3, 1e8, 6)]
    fd = [gk.model_generator(model, g, x).value for x in np.geomspace(1e3, 1e8, 6)]
    assert np.allclose(fd, closed, rtol=0.05, atol=0.02)


@pytest.mark.parametrize("m, x, want", [(-2.0, 2.0, 0.75), (2.0, 10.0, -4.0), (6.0, 10.0, 1.2e5)])
def test_closed_form_hand_values(k3, m, x, want):
    fam = zoo.lyapunov("p_m", m=m)
    assert gk.closed_form_generator(fam, k3, x).value == pytest.approx(want, rel=1e-12)


def test_closed_form_inside_radius(k3):
    with pytest.raises(OutOfRangeError):
        gk.closed_form_generator(zoo.lyapunov("p_m", m=2.0), k3, 1.0)


@pytest.mark.parametrize("m", [-2.0, 2.0, 4.5, 6.0])
def test_fd_matches_closed_form_far_out(k3, m):
    fam = zoo.lyapunov("p_m", m=m)
    for x in np.linspace(20, 100, 20):
        fd = gk.model_generator(k3, fam, x).value
        cf = gk.closed_form_generator(fam, k3, x).value
        assert abs(fd - cf) <= 1e-3 * abs(cf)


def test_richardson_halving(k3):
    fam = zoo.lyapunov("p_m", m=-2.0)
    x = 30.0
    cf = gk.closed_form_generator(fam, k3, x).value
    e1 = abs(gk.model_generator(k3, fam, x, h=0.3, order=2).value - cf)
    e2 = abs(gk.model_generator(k3, fam, x, h=0.15, order=2).value - cf)
    assert e1 >= 3 * e2


def test_hamiltonian_closed_form_matches_fd():
    model = zoo.preset("hamiltonian-15")
    fam = model.default_lyapunov()
    for p in [(5.0, 2.0), (-20.0, 3.0), (40.0, -10.0)]:
        cf = gk.closed_form_generator(fam, model, p).value
        fd = gk.model_generator(model, fam, p).value
        assert fd == pytest.approx(cf, rel=1e-4, abs=1e-9)


def k3_triple(phi_scale=12.0, phi_exp=2.0, psi_exp=2.25):
    return rf.LyapunovTriple(zoo.lyapunov("p_m", m=2.0),
                             rf.power(phi_exp, phi_scale, (0.0, 1.0)), rf.power(psi_exp))


GRID = list(np.geomspace(2.0, 100.0, 20))


def test_verify_super_and_sub_pass(k3):
    t0 = time.perf_counter()
    sup = gk.verify_drift(k3_triple(), k3, GRID, "super")
    sub = gk.verify_drift(k3_triple(), k3, GRID, "sub")
    assert sup.satisfied and sub.satisfied
    assert sup.satisfied == (sup.max_violation <= sup.margin)
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.parametrize("triple", [k3_triple(phi_scale=6.0), k3_triple(phi_scale=1.0, phi_exp=3.0)])
def test_verify_super_detects_wrong_phi(k3, triple):
    assert not gk.verify_drift(triple, k3, GRID, "super").satisfied


def test_verify_sub_detects_low_psi(k3):
    v = gk.verify_drift(k3_triple(psi_exp=1.5), k3, GRID, "sub")
    assert not v.satisfied and v.max_violation > 0


def test_verify_sub_with_p45(k3):
    triple = k3_triple(psi_exp=4.5 / 2.0)
    assert gk.verify_drift(triple, k3, [x for x in GRID if x >= 2.0], "sub").satisfied


def test_verdict_serializes(k3):
    d = gk.verify_drift(k3_triple(), k3, GRID[:3], "super").to_dict()
    assert d["inequality"] == "super" and d["n_points"] == 3 and d["satisfied"]


def test_verify_sub_refuses_jump_model():
    model = zoo.preset("levy-mc2")
    triple = rf.LyapunovTriple(zoo.lyapunov("g_m_log", m=1.0), rf.power(2.0, 1.0, (0.0, 1.0)),
                               rf.power(2.0))
    with pytest.raises(AssumptionError, match="bounded jumps"):
        gk.verify_drift(triple, model, [10.0, 100.0], "sub")
