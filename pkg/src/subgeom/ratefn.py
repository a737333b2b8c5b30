"""Scalar monotone maps and the bound functions assembled from them.

All functions here are opaque callables. Monotonicity is checked on sampled
geometric grids, never proved, and inverses are computed by bisection.
"""
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import (AccuracyError, AssumptionError, ConfigError,
                     DegeneracyError, DomainError, RangeError)

TOL_ABS = 1e-12
TOL_REL = 1e-10
MAX_ITER = 200
GRID_POINTS = 64
GRID_SPAN = 1e6
_BRACKET_LIMIT = 1e300

DIRECTIONS = ("increasing", "decreasing", "non-decreasing", "non-increasing")


def log_conv(x):
    """Natural log floored at 1: equals 1 on (0, e] and log x beyond."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_conv needs x > 0, got {x!r}")
    out = np.log(np.maximum(arr, math.e))
    return float(out) if out.ndim == 0 else out


def sample_grid(lo, hi, n=GRID_POINTS, span=GRID_SPAN):
    """Geometric grid on [lo, hi] (open at 0, capped at `span` when hi is infinite)."""
    lo, hi = float(lo), float(hi)
    if math.isinf(hi):
        hi = max(lo, 1.0) * span if lo > 0 else span
    if lo > 0:
        return np.geomspace(lo, hi, n)
    if lo == 0:
        return np.geomspace(hi / span, hi, n)
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class MonotoneFn:
    """A scalar map with a declared direction on an interval.

    `vectorized=True` promises that `eval` accepts numpy arrays; otherwise
    array arguments are mapped point by point. `derivs`, when given, returns
    the first and second derivatives at a point.
    """
    eval: Callable
    domain: tuple = (1.0, math.inf)
    direction: str = "increasing"
    name: str = ""
    vectorized: bool = False
    derivs: Callable | None = None

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"empty domain {self.domain}")

    def __call__(self, x):
        if np.ndim(x) == 0:
            return float(self.eval(float(x)))
        arr = np.asarray(x, dtype=float)
        if self.vectorized:
            return np.asarray(self.eval(arr), dtype=float)
        return np.array([float(self.eval(v)) for v in arr.ravel()]).reshape(arr.shape)

    @property
    def increasing(self):
        return self.direction in ("increasing", "non-decreasing")

    @property
    def strict(self):
        return self.direction in ("increasing", "decreasing")

    def check(self, n=GRID_POINTS, grid=None):
        """Raise AssumptionError naming the first sampled pair that breaks the direction."""
        xs = sample_grid(*self.domain, n=n) if grid is None else np.asarray(grid, float)
        ys = self(xs)
        if not np.all(np.isfinite(ys)):
            bad = xs[~np.isfinite(ys)][0]
            raise AssumptionError(f"{self.name or 'function'} is not finite at {bad:g}")
        d = np.diff(ys) if self.increasing else -np.diff(ys)
        bad = np.flatnonzero(d <= 0) if self.strict else np.flatnonzero(d < 0)
        if bad.size:
            i = bad[0]
            raise AssumptionError(
                f"{self.name or 'function'} is not {self.direction}: "
                f"f({xs[i]:g})={ys[i]:g}, f({xs[i + 1]:g})={ys[i + 1]:g}")
        return True


def power(k, c=1.0, domain=(1.0, math.inf), name=None):
    """c*r**k as a MonotoneFn (direction read off the signs)."""
    if k == 0:
        direction = "non-decreasing"
    else:
        direction = "increasing" if k * c > 0 else "decreasing"
    return MonotoneFn(lambda r: c * np.power(r, k), domain, direction,
                      name or f"{c:g}*r^{k:g}", vectorized=True,
                      derivs=lambda r: (c * k * r ** (k - 1), c * k * (k - 1) * r ** (k - 2)))


def constant(c, domain=(1.0, math.inf)):
    return MonotoneFn(lambda r: c + 0.0 * np.asarray(r, float), domain,
                      "non-decreasing", f"const {c:g}", vectorized=True)


def invert_monotone(f, y, bracket=None, tol_abs=TOL_ABS, tol_rel=TOL_REL,
                    max_iter=MAX_ITER):
    """Solve f(x) = y by bisection.

    An infinite right end of the bracket is expanded by doubling. The result
    satisfies |f(x) - y| <= tol_abs + tol_rel*|y|.
    """
    if np.ndim(y) > 0:
        return np.array([invert_monotone(f, v, bracket, tol_abs, tol_rel, max_iter)
                         for v in np.ravel(y)]).reshape(np.shape(y))
    y = float(y)
    if bracket is None:
        bracket = getattr(f, "domain", (1.0, math.inf))
    lo, hi = float(bracket[0]), float(bracket[1])
    sgn = 1.0 if getattr(f, "increasing", True) else -1.0

    def F(x):
        v = float(f(x))
        if not math.isfinite(v):
            raise DomainError(f"function not finite at {x:g}")
        return sgn * v

    target = sgn * y
    tol = tol_abs + tol_rel * abs(y)
    flo = F(lo)
    if math.isinf(hi):
        step = max(1.0, abs(lo))
        hi = lo + step
        fhi = F(hi)
        while fhi < target - tol:
            step *= 2.0
            hi = lo + step
            if hi > _BRACKET_LIMIT:
                raise RangeError(f"value {y:g} not reached before {_BRACKET_LIMIT:g}")
            fhi = F(hi)
    else:
        fhi = F(hi)
    if flo == fhi:
        raise DegeneracyError(f"equal values {sgn * flo:g} at both ends of [{lo:g}, {hi:g}]")
    if flo > fhi:
        raise AssumptionError(f"function runs against its declared direction on [{lo:g}, {hi:g}]")
    if target < flo - tol or target > fhi + tol:
        raise RangeError(f"value {y:g} outside [{sgn * flo:g}, {sgn * fhi:g}]")
    if abs(flo - target) <= tol and abs(fhi - target) > tol:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = F(mid)
        if fm == target:
            lo = hi = mid
            break
        if fm < target:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    best = lo if abs(flo - target) <= abs(fhi - target) else hi
    resid = abs(F(best) - target)
    if resid > tol:
        raise AccuracyError(f"bisection residual {resid:g} above tolerance {tol:g}", resid)
    return best


@dataclass(frozen=True)
class BoundParams:
    eps: float
    q: float
    c_fit: float | None = None

    def __post_init__(self):
        if not 0 < self.eps < 1 or not 0 < self.q < 1:
            raise DomainError(f"need eps, q in (0,1), got eps={self.eps}, q={self.q}")
        if self.c_fit is not None and not self.c_fit > 0:
            raise DomainError("c_fit must be positive")

    def require_excursion_range(self):
        """The excursion bounds need eps <= (1-q)/2."""
        if self.eps > (1 - self.q) / 2 + 1e-15:
            raise AssumptionError(f"eps={self.eps} exceeds (1-q)/2={(1 - self.q) / 2}")
        return self

    def with_c(self, c):
        return BoundParams(self.eps, self.q, c)


def l_eps_q(triple, params, r):
    """r*phi(1/r)*psi(2r/(1-q))*(loglog r)^eps, both logs floored at 1."""
    if np.ndim(r) > 0:
        return np.array([l_eps_q(triple, params, v) for v in np.ravel(r)]).reshape(np.shape(r))
    r = float(r)
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    loglog = log_conv(log_conv(r))
    return r * triple.phi(1.0 / r) * triple.psi(2.0 * r / (1.0 - params.q)) * loglog ** params.eps


def invariant_tail_lower(triple, params, r):
    """c/L: lower bound for the invariant mass of {V >= r}."""
    if params.c_fit is None:
        raise ConfigError("invariant_tail_lower needs params.c_fit")
    return params.c_fit / l_eps_q(triple, params, r)


def _threshold_map(h, phi, eps):
    def m(r):
        return eps * h(r) / (r * phi(1.0 / r))
    return MonotoneFn(m, (1.0, math.inf), "increasing", "eps*h(r)/(r*phi(1/r))")


def g_h_inverse(h, phi, eps, t, bracket=(1.0, math.inf)):
    """Inverse of r -> eps*h(r)/(r*phi(1/r)) on [1, inf)."""
    m = _threshold_map(h, phi, eps)
    lowest = m(bracket[0])
    if np.min(t) < lowest * (1 - 1e-12):
        raise RangeError(f"t={np.min(t):g} below the map's value {lowest:g} at r={bracket[0]:g}")
    return invert_monotone(m, t, bracket)


def excursion_threshold(h, phi, eps, r):
    """h(r)*eps/(r*phi(1/r)), the excursion-functional level reached after visiting r."""
    if np.any(np.asarray(r) < 1):
        raise DomainError("r must be >= 1")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0,1)")
    r = np.asarray(r, dtype=float)
    out = h(r) * eps / (r * phi(1.0 / r))
    return float(out) if np.ndim(out) == 0 else out


class XiTransform:
    """Xi(u) = int_1^u ds/xi(s) and its inverse.

    The integral is accumulated over a fixed dyadic ladder of nodes so that
    Xi is the same function whichever order it is queried in.
    """

    def __init__(self, xi, tol=1e-10, max_nodes=1024):
        self.xi = xi
        self.tol = tol
        self.max_nodes = max_nodes
        grid = sample_grid(1.0, math.inf)
        vals = np.array([float(xi(s)) for s in grid])
        if np.any(~np.isfinite(vals)) or np.any(vals < 1):
            bad = grid[~(vals >= 1)][0]
            raise DomainError(f"xi must be >= 1 on [1, inf); xi({bad:g})={float(xi(bad)):g}")
        self._nodes = [1.0]
        self._cum = [0.0]

    def _piece(self, a, b):
        val, err = integrate.quad(lambda s: 1.0 / float(self.xi(s)), a, b,
                                  epsabs=self.tol * 1e-2, epsrel=1e-13, limit=200)
        if err > self.tol:
            raise AccuracyError(f"quadrature error {err:g} on [{a:g}, {b:g}]", err)
        return val

    def _extend(self):
        if len(self._nodes) >= self.max_nodes:
            raise RangeError("Xi did not reach the requested value")
        a = self._nodes[-1]
        self._cum.append(self._cum[-1] + self._piece(a, 2.0 * a))
        self._nodes.append(2.0 * a)

    def __call__(self, u):
        if np.ndim(u) > 0:
            return np.array([self(v) for v in np.ravel(u)]).reshape(np.shape(u))
        u = float(u)
        if u < 1:
            raise DomainError(f"Xi is defined on [1, inf), got {u}")
        while self._nodes[-1] < u:
            self._extend()
        k = int(np.searchsorted(self._nodes, u, side="right")) - 1
        a = self._nodes[k]
        return self._cum[k] + (self._piece(a, u) if u > a else 0.0)

    def inverse(self, t):
        if np.ndim(t) > 0:
            return np.array([self.inverse(v) for v in np.ravel(t)]).reshape(np.shape(t))
        t = float(t)
        if t < 0:
            raise RangeError("Xi takes values in [0, inf)")
        while self._cum[-1] < t or len(self._nodes) < 2:
            self._extend()
        k = max(int(np.searchsorted(self._cum, t, side="left")) - 1, 0)
        f = MonotoneFn(self, (1.0, math.inf), "increasing")
        return invert_monotone(f, t, (self._nodes[k], self._nodes[k + 1]),
                               tol_abs=1e-13, tol_rel=1e-13)


def xi_transform(xi):
    """Return (Xi, Xi_inv) as MonotoneFn objects sharing one quadrature cache."""
    xt = XiTransform(xi)
    return (MonotoneFn(xt, (1.0, math.inf), "increasing", "Xi"),
            MonotoneFn(xt.inverse, (0.0, math.inf), "increasing", "Xi_inv"))


def expected_growth_bound(xi, H0, t):
    """Xi^{-1}(Xi(H0) + t): bound on E[H(X_t)] when A H <= xi(H)."""
    if H0 < 1 or t < 0:
        raise DomainError("need H0 >= 1 and t >= 0")
    xt = xi if isinstance(xi, XiTransform) else XiTransform(xi)
    return xt.inverse(xt(H0) + t)


@dataclass(frozen=True)
class RateAssembly:
    """h, f_star, a and the growth bound v(x, t) defining r_f = a(A^{-1}(2v)).

    g = h/f_star and A(t) = t*a(t) are derived and checked on construction.
    """
    h: MonotoneFn
    f_star: MonotoneFn
    a: MonotoneFn
    v: Callable
    span: float = GRID_SPAN
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g1 = self.g(1.0)
        if abs(g1 - 1.0) > 1e-12:
            raise AssumptionError(f"g = h/f_star must satisfy g(1) = 1, got {g1:g}")
        grid = sample_grid(1.0, self.span)
        self.g.check(grid=grid)
        self.A.check(grid=grid)
        if self.A(grid[-1]) < 10 * self.A(grid[0]):
            raise AssumptionError("A(t) = t*a(t) looks bounded on the sampled range")

    @property
    def g(self):
        return MonotoneFn(lambda r: self.h(r) / self.f_star(r), (1.0, math.inf), "increasing", "g")

    @property
    def A(self):
        return MonotoneFn(lambda s: s * self.a(s), (1.0, math.inf), "increasing", "A")

    def curve(self, x_start, times):
        """The exported lower-bound curve r_f/2 on a time grid."""
        return np.array([assemble_rate(self, x_start, t) for t in np.ravel(times)]) / 2.0


def assemble_rate(asm, x_start, t):
    """r_f(x, t) = a(A^{-1}(2 v(x, t)))."""
    if t < 1:
        raise DomainError("the rate is defined for t >= 1")
    target = 2.0 * float(asm.v(x_start, t))
    return asm.a(invert_monotone(asm.A, target, (1.0, math.inf)))


def tail_comparison(a, v, r):
    """a(r) - v/r, the pointwise f-variation lower bound before optimising r.

    Its value at r = A^{-1}(2v) is exactly a(r)/2 = r_f/2.
    """
    return a(r) - v / r


def rate_from_triple(triple, params, h, f_star, v, c=1.0, span=GRID_SPAN):
    """RateAssembly with a(t) = c*f_star(g^{-1}(t))/L(g^{-1}(t)), i.e. the largest allowed a."""
    g = MonotoneFn(lambda r: h(r) / f_star(r), (1.0, math.inf), "increasing", "g")

    def a(t):
        r = invert_monotone(g, t, (1.0, math.inf))
        return c * f_star(r) / l_eps_q(triple, params, r)

    return RateAssembly(h, f_star, MonotoneFn(a, (1.0, math.inf), "decreasing", "a"), v,
                        span=span, meta={"eps": params.eps, "q": params.q, "c": c})


@dataclass(frozen=True)
class LyapunovTriple:
    """V with its two comparison maps and the drift allowances.

    phi acts on (0, 1] (the argument is 1/V), psi on [1, inf). `submult_c`
    is the recorded constant C in psi(r1 + r2) <= C psi(r1) psi(r2); when
    left as None it is measured on the sampled grid at construction.
    """
    V: Callable
    phi: MonotoneFn
    psi: MonotoneFn
    ell0: float = 1.0
    b: float = 0.0
    c: float = 0.0
    jump_bound_d: float | None = None
    submult_c: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.ell0 < 1 or self.b < 0 or self.c < 0:
            raise DomainError("need ell0 >= 1 and b, c >= 0")
        if self.jump_bound_d is not None and self.jump_bound_d < 0:
            raise DomainError("jump bound must be non-negative")
        self.phi.check(grid=sample_grid(0.0, 1.0))
        self.psi.check(grid=sample_grid(1.0, math.inf))
        rs = sample_grid(1.0, math.inf)
        decay = MonotoneFn(lambda r: r * self.phi(1.0 / r), (1.0, math.inf), "decreasing",
                           "r*phi(1/r)")
        decay.check(grid=rs)
        if decay(rs[-1]) > 1e-2 * decay(rs[0]):
            raise AssumptionError("r*phi(1/r) does not decay to 0 on the sampled range")
        measured = self.submultiplicativity()
        if self.submult_c is None:
            object.__setattr__(self, "submult_c", measured)
        elif measured > self.submult_c * (1 + 1e-9):
            raise AssumptionError(
                f"psi breaks submultiplicativity: ratio {measured:g} > C={self.submult_c:g}")

    def submultiplicativity(self, n=24):
        """max psi(r1 + r2)/(psi(r1) psi(r2)) over a sampled grid of pairs."""
        rs = sample_grid(1.0, math.inf, n=n)
        ps = self.psi(rs)
        ratio = self.psi(rs[:, None] + rs[None, :]) / (ps[:, None] * ps[None, :])
        return float(ratio.max())

    def check_v(self, states):
        vals = np.asarray(self.V(states), dtype=float)
        if np.any(vals < 1 - 1e-12):
            raise AssumptionError(f"V < 1 at a sampled state (min {vals.min():g})")
        return True

    def with_phi(self, phi):
        return LyapunovTriple(self.V, phi, self.psi, self.ell0, self.b, self.c,
                              self.jump_bound_d, None, self.name)
