"""Numerical extended generators and grid checks of the two drift inequalities."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import AccuracyError, AssumptionError, EvaluationError, OutOfRangeError, SubgeomError
from .zoo import EllipticDiffusion, HamiltonianDamping, Langevin1D, LevyOU, CustomDiffusion, Diffusion

SCHEMES = ("finite-difference", "closed-form", "quadrature-jump")


@dataclass(frozen=True)
class GeneratorResult:
    x: object
    value: float
    scheme: str
    step: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not math.isfinite(self.value):
            raise EvaluationError(f"generator value not finite at {self.x!r}")
        if self.scheme == "finite-difference" and not (self.step and self.step > 0):
            raise ValueError("finite-difference results need a positive step")


def default_step(x):
    return 1e-3 * max(1.0, float(np.max(np.abs(x))))


# first and second derivative stencils: offsets and weights
_D1 = {2: ((-1, 1), (-0.5, 0.5)), 4: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12))}
_D2 = {2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
       4: ((-2, -1, 0, 1, 2), (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12))}


def _call(g, x):
    v = float(np.asarray(g(x)))
    if not math.isfinite(v):
        raise EvaluationError(f"g not finite at stencil point {x!r}")
    return v


def fd_derivatives(g, x, h, order=2):
    """Central-difference gradient and Hessian of a scalar field at one point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    one_d = n == 1
    ev = (lambda p: _call(g, float(p[0]))) if one_d else (lambda p: _call(g, p))
    eye = np.eye(n)
    grad = np.empty(n)
    hess = np.empty((n, n))
    o1, w1 = _D1[order]
    o2, w2 = _D2[order]
    for i in range(n):
        grad[i] = sum(w * ev(x + k * h * eye[i]) for k, w in zip(o1, w1)) / h
        hess[i, i] = sum(w * ev(x + k * h * eye[i]) for k, w in zip(o2, w2)) / (h * h)
        for j in range(i):
            acc = 0.0
            for ki, wi in zip(o1, w1):
                for kj, wj in zip(o1, w1):
                    acc += wi * wj * ev(x + ki * h * eye[i] + kj * h * eye[j])
            hess[i, j] = hess[j, i] = acc / (h * h)
    return grad, hess


def diffusion_generator(b, Sigma, g, x, h=None, order=2):
    """<b, grad g> + Tr(Sigma Hess g)/2 by central differences (order 2 or 4)."""
    h = default_step(x) if h is None else h
    if not h > 0:
        raise ValueError("step must be positive")
    grad, hess = fd_derivatives(g, x, h, order)
    bx = np.atleast_1d(np.asarray(b(x), dtype=float))
    S = np.asarray(Sigma(x), dtype=float)
    S = S.reshape(1, 1) if S.size == 1 else S
    val = float(bx @ grad + 0.5 * np.sum(S * hess))
    return GeneratorResult(x, val, "finite-difference", h, {"order": order})


def hamiltonian_generator(sigma, c, U, g, point, h=None, order=2):
    """sigma^2/2 g_yy + y g_z - (c y + U'(z)) g_y at (z, y)."""
    z, y = map(float, point)
    h = default_step(point) if h is None else h
    if hasattr(U, "dU"):
        dU = float(U.dU(z))
    else:
        hz = 1e-5 * max(1.0, abs(z))
        dU = (float(U(z + hz)) - float(U(z - hz))) / (2 * hz)
    grad, hess = fd_derivatives(g, np.array([z, y]), h, order)
    val = 0.5 * sigma ** 2 * hess[1, 1] + y * grad[0] - (c * y + dU) * grad[1]
    return GeneratorResult((z, y), float(val), "finite-difference", h, {"order": order})


def _derivative(g, x):
    if hasattr(g, "grad"):
        return float(g.grad(x))
    h = default_step(x)
    o, w = _D1[4]
    return sum(wk * _call(g, x + k * h) for k, wk in zip(o, w)) / h


def jump_generator(mu, sigma, nu, g, x, rtol=1e-8, u_min=1e-10):
    """-mu x g'(x) + int (g(x + sigma(x) y) - g(x)) nu(dy) for finite-activity nu.

    The small-jump compensator is dropped (finite activity). Atoms are summed
    exactly; otherwise the integral runs over the quantile u of the jump law,
    truncated at u_min (reported as `truncated_mass`), in log space when g
    offers `log_eval`.
    """
    x = float(x)
    s = float(sigma(x)) if callable(sigma) else float(sigma)
    drift = -mu * x * _derivative(g, x) if mu else 0.0
    gx = _call(g, x)
    meta = {"compensator": "dropped (finite activity)", "truncated_mass": 0.0}
    if nu is None or nu.total_mass == 0:
        return GeneratorResult(x, drift, "closed-form", None, meta)
    if nu.atoms is not None:
        sizes, w = nu.atoms
        scale = nu.total_mass / float(np.sum(w))
        jump = sum(wi * scale * (_call(g, x + s * yi) - gx) for yi, wi in zip(sizes, w))
        meta["atoms"] = len(sizes)
        return GeneratorResult(x, drift + jump, "closed-form", None, meta)

    log_ev = getattr(g, "log_eval", None)
    if log_ev is not None and nu.log_sampler is not None and x > 0:
        lx, ls = math.log(x), math.log(s)
        base = float(log_ev(lx))

        def integrand(w):
            u = math.exp(w)
            ly = float(nu.log_sampler(u))
            return u * (float(log_ev(np.logaddexp(lx, ls + ly))) - base)
    else:
        def integrand(w):
            u = math.exp(w)
            return u * (_call(g, x + s * float(nu.sampler(u))) - gx)

    val, err = integrate.quad(integrand, math.log(u_min), 0.0, limit=500, epsrel=rtol, epsabs=0.0)
    if err > max(1e-6, 1e-4 * abs(val)):
        raise AccuracyError(f"jump integral did not converge (error estimate {err:g})", err)
    meta.update(truncated_mass=u_min * nu.total_mass, quad_error=err)
    return GeneratorResult(x, drift + nu.total_mass * val, "quadrature-jump", None, meta)


def _radial_generator(model, d1, d2, s):
    """A g for g = G(|x|) under exact power-law radial coefficients."""
    radial_drift = -model.alpha * s ** (model.drift_power + 1.0)
    sl = s ** model.ell
    return d1 * radial_drift + 0.5 * (model.beta * sl * d2 + (model.gamma - model.beta) * sl * d1 / s)


def closed_form_generator(family, model, x):
    """Exact or leading-term generator of a Lyapunov family beyond its blend radius."""
    fam = family.family
    if isinstance(model, EllipticDiffusion) and fam in ("p_m", "g_u", "exp_u"):
        s = float(np.linalg.norm(np.atleast_1d(x)))
        r0 = max(family.radius, 1.0)
        if s < r0:
            raise OutOfRangeError(f"|x| = {s:g} is inside the asymptotic radius {r0:g}")
        if fam == "p_m":
            if model.regime != "A_p":
                raise OutOfRangeError("the p_m formula is stated for the polynomial regime")
            m = family.params["m"]
            val = -(m * model.beta / 2.0) * (model.m_c - m) * s ** (m + model.ell - 2.0)
        else:
            _, g1, g2 = family.profile
            val = _radial_generator(model, float(g1(s)), float(g2(s)), s)
        return GeneratorResult(x, float(val), "closed-form", None, {"family": fam})
    if isinstance(model, LevyOU) and fam == "g_m_log":
        m = family.params["m"]
        x = float(x)
        if x < family.radius:
            raise OutOfRangeError(f"x = {x:g} is inside the asymptotic radius {family.radius:g}")
        if callable(model.sigma):
            raise OutOfRangeError("the leading-term formula needs constant sigma")
        if not m < model.m_c:
            raise OutOfRangeError("need m < m_c for an integrable jump term")
        # decay term plus the mass pushed past x by jumps exceeding x
        L = math.log(x)
        val = -model.mu * m * L ** (m - 1) + model.nu.total_mass * m / (model.m_c - m) \
            * (L - math.log(model.sigma)) ** (m - model.m_c)
        return GeneratorResult(x, val, "closed-form", None, {"family": fam, "terms": "leading two"})
    if isinstance(model, HamiltonianDamping) and fam == "g_k_eps":
        z, y = map(float, x)
        k, eps, c = family.params["k"], family.params["eps"], model.c
        ce = c * (1 - eps)
        pot = model.potential
        G = 0.5 * y * y + float(pot.U(z)) + ce * (z * y + 0.5 * c * z * z) + family.params["b_const"] + 1.0
        gy = y + ce * z
        a1 = model.sigma ** 2 / 2 - eps * c * y * y - ce * z * float(pot.dU(z))
        val = k * G ** (k - 1) * a1 + 0.5 * model.sigma ** 2 * k * (k - 1) * G ** (k - 2) * gy * gy
        return GeneratorResult((z, y), float(val), "closed-form", None, {"family": fam})
    raise OutOfRangeError(f"no closed form for family {fam!r} on a {type(model).__name__}")


def model_generator(model, g, x, h=None, order=4):
    """Dispatch to the generator matching the model class."""
    if isinstance(model, (EllipticDiffusion, Langevin1D, CustomDiffusion, Diffusion)):
        if model.n == 1:
            x = float(np.asarray(x).reshape(-1)[0])
            return diffusion_generator(model.drift, model.cov, g, x, h, order)
        x = np.asarray(x, dtype=float)
        return diffusion_generator(lambda p: model.drift(p[None])[0],
                                   lambda p: model.cov(p[None])[0], g, x, h, order)
    if isinstance(model, HamiltonianDamping):
        return hamiltonian_generator(model.sigma, model.c, model.potential, g, x, h, order)
    if isinstance(model, LevyOU):
        return jump_generator(model.mu, model.sigma, model.nu, g, float(x))
    raise TypeError(f"no generator for {type(model).__name__}")


@dataclass(frozen=True)
class DriftVerdict:
    grid: list
    max_violation: float
    margin: float
    satisfied: bool
    inequality: str
    values: list = field(default_factory=list)
    worst_point: object = None
    errors: list = field(default_factory=list)

    def __post_init__(self):
        if self.inequality not in ("super", "sub"):
            raise ValueError("inequality is 'super' or 'sub'")
        if self.satisfied != (self.max_violation <= self.margin):
            raise ValueError("satisfied must equal max_violation <= margin")

    def to_dict(self):
        return {"inequality": self.inequality, "max_violation": self.max_violation,
                "margin": self.margin, "satisfied": self.satisfied,
                "worst_point": _plain(self.worst_point), "n_points": len(self.grid),
                "errors": self.errors}


def _plain(x):
    if x is None:
        return None
    arr = np.asarray(x, dtype=float)
    return float(arr) if arr.ndim == 0 else arr.tolist()


def scalar_derivs(F, v):
    """F'(v), F''(v) from `F.derivs` when available, else 4th-order differences."""
    if getattr(F, "derivs", None) is not None:
        d1, d2 = F.derivs(v)
        return float(d1), float(d2), None
    h = 1e-4 * max(1.0, abs(v))
    lo = getattr(F, "domain", (-math.inf, math.inf))[0]
    if v - 2 * h >= lo:
        f = [float(F(v + k * h)) for k in (-2, -1, 0, 1, 2)]
        d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
        d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
    else:
        f = [float(F(v + k * h)) for k in range(4)]
        d1 = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        d2 = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / (h * h)
    return d1, d2, h


def composite_generator(model, V, F, dF, d2F, x, step=None):
    """A(F o V) by the chain rule, using the analytic gradient and Hessian of V.

    For a diffusion: F'(V) AV + F''(V) <grad V, Sigma grad V>/2.
    """
    if isinstance(model, HamiltonianDamping):
        p = np.asarray(x, dtype=float)
        z, y = p
        g = np.asarray(V.grad(p))
        H = np.asarray(V.hess(p))
        AV = 0.5 * model.sigma ** 2 * H[1, 1] + y * g[0] - (model.c * y + float(model.potential.dU(z))) * g[1]
        quad = model.sigma ** 2 * g[1] ** 2
    else:
        if model.n == 1:
            p = float(np.asarray(x).reshape(-1)[0])
            g = float(V.grad(p))
            H = float(V.hess(p))
            b = float(model.drift(np.array([p]))[0])
            S = float(model.cov(np.array([p]))[0])
            AV = b * g + 0.5 * S * H
            quad = S * g * g
        else:
            p = np.asarray(x, dtype=float)
            g = np.asarray(V.grad(p))
            H = np.asarray(V.hess(p))
            b = model.drift(p[None])[0]
            S = model.cov(p[None])[0]
            AV = float(b @ g + 0.5 * np.sum(S * H))
            quad = float(g @ S @ g)
    val = dF * AV + 0.5 * d2F * quad
    if step is None:
        return GeneratorResult(x, float(val), "closed-form", None, {"method": "chain rule"})
    return GeneratorResult(x, float(val), "finite-difference", step, {"method": "chain rule"})


def _field_generator(model, triple, which, p, h):
    V = triple.V
    v = float(np.asarray(V(p)))
    analytic = hasattr(V, "grad") and hasattr(V, "hess") and not isinstance(model, LevyOU)
    if analytic:
        if which == "super":
            d1, d2, step = -1.0 / v ** 2, 2.0 / v ** 3, None
        else:
            d1, d2, step = scalar_derivs(triple.psi, v)
        return composite_generator(model, V, None, d1, d2, p, step).value, v
    if which == "super":
        field_fn = lambda q: 1.0 / float(np.asarray(V(q)))
    else:
        field_fn = lambda q: float(triple.psi(float(np.asarray(V(q)))))
    return model_generator(model, field_fn, p, h=h).value, v


def verify_drift(triple, model, grid, which, margin=None, rel_margin=1e-6, h=None):
    """Evaluate a drift inequality at every grid point.

    super: A(1/V) - phi(1/V) - b 1{V <= ell0} <= margin
    sub:   -A(psi o V) - c 1{V <= ell0} <= margin
    When V carries a gradient and Hessian the generator is applied through the
    chain rule; otherwise the composite field is differenced directly.
    Per-point generator failures are recorded in `errors` and skipped.
    """
    if which not in ("super", "sub"):
        raise ValueError("which is 'super' or 'sub'")
    grid = list(grid)
    if not grid:
        raise ValueError("empty verification grid")
    if which == "sub" and isinstance(model, LevyOU):
        # jumps are unbounded, so a generator bound says nothing about overshoot
        raise AssumptionError("the sub inequality needs bounded jumps; check the jump model's "
                              "exit probabilities by simulation instead")
    vals, scales, errors = [], [], []
    for p in grid:
        try:
            gen, v = _field_generator(model, triple, which, p, h)
            low = v <= triple.ell0
            if which == "super":
                ph = float(triple.phi(1.0 / v))
                val = gen - ph - (triple.b if low else 0.0)
                scales.append(max(abs(gen), abs(ph)))
            else:
                val = -gen - (triple.c if low else 0.0)
                scales.append(abs(gen))
            vals.append(val)
        except SubgeomError as exc:
            errors.append({"point": _plain(p), "error": str(exc)})
            vals.append(float("nan"))
    if not any(math.isfinite(v) for v in vals):
        raise EvaluationError("generator failed at every grid point")
    if margin is None:
        margin = rel_margin * max(scales)
    i = int(np.nanargmax(vals))
    worst = float(vals[i])
    return DriftVerdict(grid, worst, float(margin), worst <= margin, which, vals, grid[i], errors)
