"""Model families, heavy-tailed jump measures and Lyapunov function families.

Diffusion coefficients use exact power laws for |x| >= 1 and a smooth
polynomial blend inside the unit ball, so asymptotic generator formulas hold
exactly outside the blend.
"""
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import AssumptionError, DomainError

# ---------------------------------------------------------------- blending


def smoothstep(s, a, b):
    """Quintic step from 0 at s<=a to 1 at s>=b, with its first two derivatives in s."""
    w = b - a
    t = np.clip((np.asarray(s, dtype=float) - a) / w, 0.0, 1.0)
    val = t ** 3 * (10 - 15 * t + 6 * t * t)
    d1 = 30 * t * t * (1 - t) ** 2 / w
    d2 = 60 * t * (1 - t) * (1 - 2 * t) / (w * w)
    return val, d1, d2


def _radial(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return x, np.abs(x)
    return x, np.linalg.norm(x, axis=-1)


# --------------------------------------------------------- invariant laws


class InvariantLaw1D:
    """A 1D law known through its log-density, tabulated for cdf and sampling.

    The table lives on u = x/(1+|x|) in (-1, 1), which keeps heavy tails
    inside a finite grid.
    """

    def __init__(self, logpdf, n_grid=200_001, name=""):
        self.logpdf_unnormalized = logpdf
        self.name = name
        u = np.linspace(-1.0, 1.0, n_grid + 2)[1:-1]
        x = u / (1.0 - np.abs(u))
        lp = np.asarray(logpdf(x), dtype=float)
        if not np.all(np.isfinite(lp)):
            raise DomainError(f"log-density not finite on the grid ({name})")
        w = lp + 2.0 * np.log1p(np.abs(x))
        shift = w.max()
        dens_u = np.exp(w - shift)
        cdf = integrate.cumulative_trapezoid(dens_u, u, initial=0.0)
        total = cdf[-1]
        self.log_norm = shift + math.log(total)
        self._u = u
        self._cdf = cdf / total

    def logpdf(self, x):
        return np.asarray(self.logpdf_unnormalized(np.asarray(x, dtype=float))) - self.log_norm

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        u = x / (1.0 + np.abs(x))
        return np.interp(u, self._u, self._cdf, left=0.0, right=1.0)

    def abs_survival(self, r):
        """P(|X| >= r)."""
        r = np.asarray(r, dtype=float)
        return 1.0 - self.cdf(r) + self.cdf(-r)

    def sample(self, rng, n):
        u = np.interp(rng.random(n), self._cdf, self._u)
        return u / (1.0 - np.abs(u))


# ------------------------------------------------------------------ models


class Diffusion:
    """Base for Euler-stepped models: drift(x), cov(x), noise(x, dW).

    States are float arrays of shape (N,) when n == 1 and (N, n) otherwise.
    """
    n = 1
    name = ""
    kind = "diffusion"
    law = None

    def drift(self, x):
        raise NotImplementedError

    def cov(self, x):
        raise NotImplementedError

    def noise(self, x, dW):
        """sigma(x) @ dW for Gaussian increments dW."""
        if self.n == 1:
            return np.sqrt(self.cov(x)) * dW
        C = self.cov(x)
        L = np.linalg.cholesky(C + 1e-300 * np.eye(self.n))
        return np.einsum("...ij,...j->...i", L, dW)

    def exponents(self):
        return {}

    def default_lyapunov(self):
        return lyapunov("p_m", m=2.0, R0=2.0, dim=self.n)


class CustomDiffusion(Diffusion):
    """dX = b(X)dt + sigma(X)dB with user-supplied coefficients (sigma may be 0)."""

    def __init__(self, b, sigma=0.0, n=1, name="custom"):
        self.b = b
        self.sigma = sigma
        self.n = n
        self.name = name
        self.regime = "custom"

    def drift(self, x):
        return np.asarray(self.b(x), dtype=float)

    def _disp(self, x):
        s = self.sigma(x) if callable(self.sigma) else self.sigma
        return np.asarray(s, dtype=float)

    def cov(self, x):
        s = self._disp(x)
        if self.n == 1:
            return s * s + 0.0 * np.asarray(x, float)
        if s.ndim == 0:
            return s * s * np.eye(self.n)
        return np.einsum("...ij,...kj->...ik", s, s)

    def noise(self, x, dW):
        s = self._disp(x)
        if self.n == 1 or s.ndim == 0:
            return s * dW
        return np.einsum("...ij,...j->...i", s, dW)


def make_diffusion(b, sigma=0.0, n=1, name="custom"):
    return CustomDiffusion(b, sigma, n, name)


class EllipticDiffusion(Diffusion):
    """Radially symmetric elliptic diffusion in one of three tail regimes.

    Outside the unit ball b(x) = -alpha |x|^e x, with e = ell-2 (polynomial),
    ell-p-1 (stretched exponential) or -1 (exponential). The covariance has
    radial eigenvalue beta|x|^ell and trace gamma|x|^ell. Inside, the drift
    factor is the quadratic matching value and slope at |x| = 1, and the
    covariance blends to (gamma/n) I over [1/2, 1].
    """
    kind = "elliptic"

    def __init__(self, regime, alpha, beta, gamma, ell=0.0, n=1, p=None, name=""):
        self.regime = regime
        self.alpha, self.beta, self.gamma, self.ell = float(alpha), float(beta), float(gamma), float(ell)
        self.n = int(n)
        self.p = p
        self.name = name
        self.flags = []
        self.drift_power = {"A_p": ell - 2.0, "A_se": ell - (p or 0.0) - 1.0, "A_e": -1.0}[regime]
        e = self.drift_power
        self._inner = (1.0 - e / 2.0, e / 2.0)
        self.kappa = (self.gamma - self.beta) / (self.n - 1) if self.n > 1 else self.beta
        self.const_cov = self.ell == 0.0 and (self.n == 1 or self.kappa == self.beta) \
            and abs(self.beta - self.gamma / self.n) < 1e-15
        self._law = None

    @property
    def params(self):
        d = {"regime": self.regime, "alpha": self.alpha, "beta": self.beta,
             "gamma": self.gamma, "ell": self.ell, "n": self.n}
        if self.p is not None:
            d["p"] = self.p
        return d

    @property
    def m_c(self):
        return 2.0 + (2.0 * self.alpha - self.gamma) / self.beta

    def _factor(self, s):
        """Radial drift factor f with b(x) = -alpha f(|x|) x."""
        A, B = self._inner
        out = A + B * s * s
        outer = s >= 1.0
        if np.ndim(s) == 0:
            return float(s ** self.drift_power) if outer else float(out)
        out = np.array(out, dtype=float)
        out[outer] = s[outer] ** self.drift_power
        return out

    def drift(self, x):
        x, s = _radial(x, self.n)
        fac = self._factor(s)
        if self.n == 1:
            return -self.alpha * fac * x
        return -self.alpha * fac[..., None] * x

    def _eigs(self, s):
        """Radial and transverse covariance eigenvalues."""
        if self.const_cov:
            v = self.gamma / self.n + 0.0 * s
            return v, v
        chi, _, _ = smoothstep(s, 0.5, 1.0)
        sl = np.power(np.maximum(s, 0.5), self.ell)
        base = self.gamma / self.n
        return chi * sl * self.beta + (1 - chi) * base, chi * sl * self.kappa + (1 - chi) * base

    def cov(self, x):
        x, s = _radial(x, self.n)
        a, c = self._eigs(s)
        if self.n == 1:
            return a
        xh = x / np.maximum(s, 1e-300)[..., None]
        P = xh[..., :, None] * xh[..., None, :]
        eye = np.eye(self.n)
        return a[..., None, None] * P + c[..., None, None] * (eye - P)

    def noise(self, x, dW):
        if self.const_cov:
            return math.sqrt(self.gamma / self.n) * dW
        x, s = _radial(x, self.n)
        a, c = self._eigs(s)
        if self.n == 1:
            return np.sqrt(a) * dW
        xh = x / np.maximum(s, 1e-300)[..., None]
        proj = np.sum(xh * dW, axis=-1)
        return np.sqrt(c)[..., None] * dW + ((np.sqrt(a) - np.sqrt(c)) * proj)[..., None] * xh

    def radial_log_density(self, s):
        """log of the 1D invariant density at |x| = s (unnormalised); n == 1 only."""
        if self.n != 1:
            raise DomainError("the invariant density is tabulated for n = 1 only")
        s = np.abs(np.asarray(s, dtype=float))
        if not hasattr(self, "_inside"):
            grid = np.linspace(0.0, 1.0, 20001)
            integrand = 2 * self.drift(grid) / self.cov(grid)
            self._inside = (grid, integrate.cumulative_trapezoid(integrand, grid, initial=0.0))
        grid, cum = self._inside
        out = np.interp(np.minimum(s, 1.0), grid, cum)
        k = self.drift_power + 2.0 - self.ell
        so = np.maximum(s, 1.0)
        tail = np.log(so) if k == 0 else (so ** k - 1.0) / k
        out = out - (2 * self.alpha / self.beta) * tail
        return out + np.log(2.0 / self.cov(s))

    @property
    def law(self):
        if self._law is None and self.n == 1:
            self._law = InvariantLaw1D(self.radial_log_density, name=self.name)
        return self._law

    def exponents(self):
        e = {"regime": self.regime}
        if self.regime == "A_p":
            e.update(m_c=self.m_c, invariant_tail=self.m_c + self.ell - 2.0,
                     return_time=self.m_c / (2.0 - self.ell), tv=self.tv_exponent(0))
        elif self.regime == "A_se":
            e.update(tail_shape=1.0 - self.p, time_shape=(1.0 - self.p) / (1.0 + self.p - self.ell))
        else:
            e.update(tail_shape=1.0, time_shape=1.0)
        if self.flags:
            e["flags"] = list(self.flags)
        return e

    def tv_exponent(self, k=0.0):
        """Polynomial rate for f = 1 + |x|^k under the polynomial regime."""
        return self.m_c / (2.0 - self.ell) - 1.0 - k / (2.0 - self.ell)


def _check_positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise AssumptionError(f"{k} must be positive, got {v}")


def make_ap_model(alpha, beta, gamma, ell=0.0, n=1, name="A_p"):
    """Polynomial-tail diffusion; rejects 2-ell > m_c, flags the boundary case 2-ell = m_c."""
    _check_positive(alpha=alpha, beta=beta, gamma=gamma)
    if not 0 <= ell < 2:
        raise AssumptionError(f"need ell in [0, 2), got {ell}")
    m_c = 2.0 + (2.0 * alpha - gamma) / beta
    if 2.0 - ell > m_c + 1e-12:
        raise AssumptionError(f"2 - ell < m_c fails: 2 - ell = {2 - ell:g}, m_c = {m_c:g}")
    if n == 1 and beta != gamma:
        raise AssumptionError("in one dimension the radial eigenvalue is the trace: need beta == gamma")
    if n > 1 and gamma <= beta:
        raise AssumptionError("need gamma > beta for a positive transverse eigenvalue")
    model = EllipticDiffusion("A_p", alpha, beta, gamma, ell, n, name=name)
    if abs(m_c + ell - 2.0) < 1e-12:
        model.flags.append("boundary-degenerate: invariant tail exponent m_c + ell - 2 = 0")
    return model


def make_ase_model(p, ell=0.0, alpha=1.0, beta=2.0, gamma=None, n=1, name="A_se"):
    gamma = beta if gamma is None else gamma
    _check_positive(alpha=alpha, beta=beta, gamma=gamma)
    if not 0 < p < 1:
        raise AssumptionError(f"need p in (0, 1), got {p}")
    if not 0 <= ell < 2 * p:
        raise AssumptionError(f"need ell in [0, 2p), got ell={ell}, p={p}")
    if n == 1 and beta != gamma:
        raise AssumptionError("in one dimension need beta == gamma")
    return EllipticDiffusion("A_se", alpha, beta, gamma, ell, n, p=p, name=name)


def make_ae_model(alpha=1.0, beta=2.0, gamma=None, n=1, name="A_e"):
    gamma = beta if gamma is None else gamma
    _check_positive(alpha=alpha, beta=beta, gamma=gamma)
    if n == 1 and beta != gamma:
        raise AssumptionError("in one dimension need beta == gamma")
    return EllipticDiffusion("A_e", alpha, beta, gamma, 0.0, n, name=name)


class Langevin1D(Diffusion):
    """dX = (sigma2/2) (log pi)'(X) dt + sqrt(sigma2) dB, invariant law pi."""
    kind = "langevin"

    def __init__(self, log_pi, log_pi_prime, sigma2=2.0, name="langevin", params=None):
        self.log_pi = log_pi
        self.log_pi_prime = log_pi_prime
        self.sigma2 = float(sigma2)
        self.name = name
        self.regime = "langevin"
        self.params = dict(params or {})
        self._law = None

    def drift(self, x):
        return 0.5 * self.sigma2 * np.asarray(self.log_pi_prime(np.asarray(x, dtype=float)))

    def cov(self, x):
        return self.sigma2 + 0.0 * np.asarray(x, dtype=float)

    def noise(self, x, dW):
        return math.sqrt(self.sigma2) * dW

    @property
    def law(self):
        if self._law is None:
            self._law = InvariantLaw1D(self.log_pi, name=self.name)
        return self._law

    def exponents(self):
        return dict(self.params.get("exponents", {}))

    def limsup_radial_drift(self, lo=1e3, hi=1e4, n=200_001):
        """max of x * (log pi)'(x) over a dense grid far out."""
        xs = np.linspace(lo, hi, n)
        return float(np.max(xs * self.log_pi_prime(xs)))


def make_langevin_from_density(pi_unnormalized, sigma2=2.0, log_pi_prime=None,
                               check_grid=None, name="langevin"):
    """Langevin diffusion for a positive density; (log pi)' by central differences when not given."""
    grid = np.linspace(-50, 50, 2001) if check_grid is None else np.asarray(check_grid)
    vals = np.asarray(pi_unnormalized(grid), dtype=float)
    if np.any(~(vals > 0)):
        raise DomainError("density must be positive on the check grid")

    def log_pi(x):
        return np.log(pi_unnormalized(x))

    if log_pi_prime is None:
        def log_pi_prime(x):
            h = 1e-5 * np.maximum(1.0, np.abs(x))
            return (log_pi(x + h) - log_pi(x - h)) / (2 * h)

    return Langevin1D(log_pi, log_pi_prime, sigma2, name)


def make_oscillating(k=3.0, alpha=2.0, name="ap-oscillating"):
    """Langevin model with density |x|^-k ((1+b) + sin(k|x|)/|x|) for |x| >= 1, b = alpha/(k-alpha).

    The log-density is blended to its value at |x| = 1 over [1/2, 1].
    """
    if not 0 < alpha < k:
        raise AssumptionError("need 0 < alpha < k")
    bb = alpha / (k - alpha)

    def outer(s):
        return -k * np.log(s) + np.log(1 + bb + np.sin(k * s) / s)

    def outer_d(s):
        q = 1 + bb + np.sin(k * s) / s
        return -k / s + (k * np.cos(k * s) / s - np.sin(k * s) / (s * s)) / q

    L1 = float(outer(1.0))

    def log_pi(x):
        s = np.maximum(np.abs(np.asarray(x, dtype=float)), 0.5)
        chi, _, _ = smoothstep(s, 0.5, 1.0)
        return chi * outer(s) + (1 - chi) * L1

    def log_pi_prime(x):
        x = np.asarray(x, dtype=float)
        s = np.maximum(np.abs(x), 0.5)
        chi, dchi, _ = smoothstep(s, 0.5, 1.0)
        return np.sign(x) * (dchi * (outer(s) - L1) + chi * outer_d(s))

    params = {"k": k, "alpha": alpha, "b": bb,
              "exponents": {"tv": (k - 1.0) / 2.0, "limsup_radial_drift": -k * bb / (1 + bb)}}
    return Langevin1D(log_pi, log_pi_prime, 2.0, name, params)


# ------------------------------------------------------------ Lévy driven


@dataclass(frozen=True)
class LevyMeasure:
    """Finite-activity jump law: tails, total mass and an inverse-tail sampler.

    `sampler(u)` maps u in (0, 1] to a jump size, `log_sampler(u)` to its log,
    for laws whose jumps overflow floats.
    """
    tail_pos: Callable
    tail_neg: Callable
    total_mass: float
    sampler: Callable | None = None
    log_sampler: Callable | None = None
    atoms: tuple | None = None
    name: str = ""

    def sample(self, rng, n):
        if self.atoms is not None:
            sizes, w = self.atoms
            return rng.choice(np.asarray(sizes), size=n, p=np.asarray(w) / np.sum(w))
        return self.sampler(1.0 - rng.random(n))

    def log_sample(self, rng, n):
        if self.log_sampler is not None:
            return self.log_sampler(1.0 - rng.random(n))
        return np.log(self.sample(rng, n))

    @staticmethod
    def log_tail(m_c, mass=1.0):
        """nu([r, inf)) = mass (log r)^-m_c for r >= e, nothing below e or on the negative side."""
        if not m_c > 1:
            raise AssumptionError(f"need m_c > 1, got {m_c}")

        def tail_pos(r):
            r = np.asarray(r, dtype=float)
            return mass * np.where(r >= math.e, np.log(np.maximum(r, math.e)) ** -m_c, 1.0)

        return LevyMeasure(tail_pos, lambda r: 0.0 * np.asarray(r, float), float(mass),
                           lambda u: np.exp(np.asarray(u) ** (-1.0 / m_c)),
                           lambda u: np.asarray(u) ** (-1.0 / m_c), None, f"log-tail m_c={m_c:g}")

    @staticmethod
    def atom(size, weight=1.0):
        def tail_pos(r):
            r = np.asarray(r, dtype=float)
            return np.where((size > 0) & (r <= size), weight, 0.0)

        def tail_neg(r):
            r = np.asarray(r, dtype=float)
            return np.where((size < 0) & (r <= -size), weight, 0.0)

        return LevyMeasure(tail_pos, tail_neg, float(weight),
                           lambda u: np.full(np.shape(u), float(size)), None,
                           ((float(size),), (1.0,)), f"atom at {size:g}")


class LevyOU:
    """dX = -mu X dt + sigma(X-) dL with L a compound Poisson process of jump law nu."""
    kind = "levy"
    n = 1

    def __init__(self, mu, sigma, nu, m_c, name="levy-ou"):
        self.mu = float(mu)
        self.sigma = sigma
        self.nu = nu
        self.m_c = float(m_c)
        self.name = name
        self.regime = "A_L"

    @property
    def params(self):
        s = self.sigma if not callable(self.sigma) else "callable"
        return {"mu": self.mu, "sigma": s, "m_c": self.m_c, "nu": self.nu.name}

    def disp(self, x):
        if callable(self.sigma):
            return np.asarray(self.sigma(x), dtype=float)
        return self.sigma + 0.0 * np.asarray(x, dtype=float)

    def exponents(self):
        return {"m_c": self.m_c, "log_tail": self.m_c - 1.0, "return_time": self.m_c,
                "tv": self.m_c - 1.0}

    def default_lyapunov(self):
        return lyapunov("g_m_log", m=1.0, x0=6.0)


def make_levy_ou(mu, sigma=1.0, m_c=2.0, nu=None, name="levy-ou"):
    if not mu > 0:
        raise AssumptionError("need mu > 0")
    if not m_c > 1:
        raise AssumptionError(f"need m_c > 1, got {m_c}")
    if callable(sigma):
        vals = np.asarray(sigma(np.concatenate([-np.geomspace(1e6, 1e-6, 50), np.geomspace(1e-6, 1e6, 50)])))
        if not (vals.min() > 0 and np.isfinite(vals.max())):
            raise AssumptionError("sigma must be bounded and bounded away from 0")
    elif not sigma > 0:
        raise AssumptionError("sigma must be positive")
    return LevyOU(mu, sigma, nu or LevyMeasure.log_tail(m_c), m_c, name)


# ------------------------------------------------------------- Hamiltonian


@dataclass(frozen=True)
class Potential:
    U: Callable
    dU: Callable
    d2U: Callable
    name: str = ""

    @staticmethod
    def log_type(a):
        """U(z) = (a/2) log(1 + z^2), so z U'(z) -> a."""
        return Potential(lambda z: 0.5 * a * np.log1p(np.asarray(z) ** 2),
                         lambda z: a * np.asarray(z) / (1 + np.asarray(z) ** 2),
                         lambda z: a * (1 - np.asarray(z) ** 2) / (1 + np.asarray(z) ** 2) ** 2,
                         f"(a/2)log(1+z^2), a={a:g}")


def potential_floor(U, bracket=(-50.0, 50.0), n=2001):
    """-inf U on the bracket: coarse grid search refined by bounded Brent."""
    zs = np.linspace(*bracket, n)
    vals = np.asarray(U(zs), dtype=float)
    i = int(np.argmin(vals))
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, n - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda z: float(U(z)), bounds=(lo, hi), method="bounded")
        best = min(float(res.fun), float(vals[i]))
    else:
        best = float(vals[i])
    return -best


class HamiltonianDamping:
    """dZ = Y dt, dY = -(cY + U'(Z)) dt + sigma dB; state columns (z, y)."""
    kind = "hamiltonian"
    n = 2

    def __init__(self, sigma, c, a, potential, name="hamiltonian", bracket=(-50.0, 50.0)):
        self.sigma, self.c, self.a = float(sigma), float(c), float(a)
        self.potential = potential
        self.name = name
        self.regime = "A_H"
        self.b_const = potential_floor(potential.U, bracket)
        self._zlaw = None

    @property
    def params(self):
        return {"sigma": self.sigma, "c": self.c, "a": self.a, "U": self.potential.name}

    @property
    def ratio(self):
        return self.a * self.c / self.sigma ** 2

    def exponents(self):
        return {"ac_over_sigma2": self.ratio, "tv": self.f_exponent(0.0)}

    def f_exponent(self, m=0.0):
        """Polynomial rate for f = 1 + |z|^m."""
        return self.ratio - 0.5 - m / 2.0

    def log_density(self, z, y):
        return -2 * self.c / self.sigma ** 2 * (0.5 * np.asarray(y) ** 2 + self.potential.U(z))

    @property
    def z_law(self):
        if self._zlaw is None:
            k = 2 * self.c / self.sigma ** 2
            self._zlaw = InvariantLaw1D(lambda z: -k * self.potential.U(z), name="z-marginal")
        return self._zlaw

    @property
    def y_sd(self):
        return self.sigma / math.sqrt(2 * self.c)

    def sample_invariant(self, rng, n):
        z = self.z_law.sample(rng, n)
        return np.column_stack([z, self.y_sd * rng.standard_normal(n)])

    def default_lyapunov(self, eps=0.25):
        return lyapunov("g_k_eps", eps=eps, model=self)


def make_hamiltonian(sigma=1.0, c=1.0, a=1.5, U=None, name="hamiltonian"):
    if not (sigma > 0 and c > 0 and a > 0):
        raise AssumptionError("need sigma, c, a > 0")
    if not a * c / sigma ** 2 > 0.5:
        raise AssumptionError(f"need ac/sigma^2 > 1/2, got {a * c / sigma ** 2:g}")
    return HamiltonianDamping(sigma, c, a, U or Potential.log_type(a), name)


# -------------------------------------------------------- Lyapunov families


@dataclass(frozen=True)
class LyapunovFamily:
    """A Lyapunov function with value, gradient and Hessian.

    `radius` is where the asymptotic formula becomes exact. `log_eval`, when
    present, evaluates the function from log x (used for jump models whose
    states overflow floats).
    """
    family: str
    params: dict
    dim: int
    eval: Callable
    grad: Callable
    hess: Callable
    radius: float = 0.0
    profile: tuple | None = None
    log_eval: Callable | None = None

    def __call__(self, x):
        return self.eval(x)


def _lift_radial(g, g1, g2, dim):
    def ev(x):
        _, s = _radial(x, dim)
        return g(s)

    def gr(x):
        x, s = _radial(x, dim)
        d = g1(s)
        if dim == 1:
            return d * np.sign(x)
        return d[..., None] * x / np.maximum(s, 1e-300)[..., None]

    def he(x):
        x, s = _radial(x, dim)
        if dim == 1:
            return g2(s)
        ss = np.maximum(s, 1e-300)
        xh = x / ss[..., None]
        P = xh[..., :, None] * xh[..., None, :]
        eye = np.eye(dim)
        return g2(s)[..., None, None] * P + (g1(s) / ss)[..., None, None] * (eye - P)

    return ev, gr, he


def _power_profile(m, R0):
    c0 = (R0 / 2.0) ** m

    def parts(s):
        s = np.asarray(s, dtype=float)
        chi, d1, d2 = smoothstep(s, R0 / 2.0, R0)
        ss = np.maximum(s, R0 / 2.0)
        q, q1, q2 = ss ** m, m * ss ** (m - 1), m * (m - 1) * ss ** (m - 2)
        return chi, d1, d2, q - c0, q1, q2

    def g(s):
        chi, _, _, dq, _, _ = parts(s)
        return c0 + chi * dq

    def g1(s):
        chi, d1, _, dq, q1, _ = parts(s)
        return d1 * dq + chi * q1

    def g2(s):
        chi, d1, d2, dq, q1, q2 = parts(s)
        return d2 * dq + 2 * d1 * q1 + chi * q2

    return g, g1, g2


def _exp_profile(u, kappa, R0):
    """exp(u E(s)) with E blending (R0/2)^kappa into s^kappa."""
    q0 = (R0 / 2.0) ** kappa

    def E(s):
        s = np.asarray(s, dtype=float)
        chi, d1, d2 = smoothstep(s, R0 / 2.0, R0)
        ss = np.maximum(s, R0 / 2.0)
        q, q1, q2 = ss ** kappa, kappa * ss ** (kappa - 1), kappa * (kappa - 1) * ss ** (kappa - 2)
        return q0 + chi * (q - q0), d1 * (q - q0) + chi * q1, d2 * (q - q0) + 2 * d1 * q1 + chi * q2

    def g(s):
        return np.exp(u * E(s)[0])

    def g1(s):
        e0, e1, _ = E(s)
        return u * e1 * np.exp(u * e0)

    def g2(s):
        e0, e1, e2 = E(s)
        return (u * e2 + (u * e1) ** 2) * np.exp(u * e0)

    return g, g1, g2, lambda s: u * E(s)[0]


def _log_family(m, x0):
    lo = x0 / 2.0

    def parts(x):
        x = np.asarray(x, dtype=float)
        chi, d1, d2 = smoothstep(x, lo, x0)
        xs = np.maximum(x, lo)
        L = np.log(xs)
        q = L ** m - 1.0
        q1 = m * L ** (m - 1) / xs
        q2 = m * ((m - 1) * L ** (m - 2) - L ** (m - 1)) / (xs * xs)
        return chi, d1, d2, q, q1, q2

    def ev(x):
        chi, _, _, q, _, _ = parts(x)
        return 1.0 + chi * q

    def gr(x):
        chi, d1, _, q, q1, _ = parts(x)
        return d1 * q + chi * q1

    def he(x):
        chi, d1, d2, q, q1, q2 = parts(x)
        return d2 * q + 2 * d1 * q1 + chi * q2

    lx0 = math.log(x0)

    def log_ev(lx):
        lx = np.asarray(lx, dtype=float)
        inner = ev(np.exp(np.minimum(lx, lx0)))
        return np.where(lx >= lx0, np.maximum(lx, lx0) ** m, inner)

    return ev, gr, he, log_ev


def _hamiltonian_family(k, eps, c, pot, b_const):
    ce = c * (1 - eps)

    def g1(x):
        x = np.asarray(x, dtype=float)
        z, y = x[..., 0], x[..., 1]
        return (0.5 * y * y + pot.U(z) + ce * (z * y + 0.5 * c * z * z) + b_const + 1.0,
                pot.dU(z) + ce * (y + c * z), y + ce * z, pot.d2U(z) + ce * c)

    def ev(x):
        return g1(x)[0] ** k

    def gr(x):
        G, gz, gy, _ = g1(x)
        f = k * G ** (k - 1)
        return np.stack([f * gz, f * gy], axis=-1)

    def he(x):
        G, gz, gy, gzz = g1(x)
        f1, f2 = k * G ** (k - 1), k * (k - 1) * G ** (k - 2)
        hzz = f1 * gzz + f2 * gz * gz
        hzy = f1 * ce + f2 * gz * gy
        hyy = f1 + f2 * gy * gy
        return np.stack([np.stack([hzz, hzy], -1), np.stack([hzy, hyy], -1)], -2)

    return ev, gr, he


def lyapunov(family, **kw):
    """Build one of: p_m(m, R0, dim), g_u(u, p, R0, dim), exp_u(u, R0, dim),
    g_m_log(m, x0), g_k_eps(eps, model or (k, sigma, c, a, potential))."""
    if family == "p_m":
        m, R0, dim = float(kw["m"]), float(kw.get("R0", 2.0)), int(kw.get("dim", 1))
        if m == 0:
            raise DomainError("p_m needs m != 0")
        if m > 0 and R0 < 2:
            raise DomainError("p_m with m > 0 needs R0 >= 2 to stay >= 1 across the blend")
        g, g1, g2 = _power_profile(m, R0)
        ev, gr, he = _lift_radial(g, g1, g2, dim)
        return LyapunovFamily("p_m", {"m": m, "R0": R0}, dim, ev, gr, he, R0, (g, g1, g2))
    if family in ("g_u", "exp_u"):
        u, R0, dim = float(kw["u"]), float(kw.get("R0", 2.0)), int(kw.get("dim", 1))
        if family == "g_u":
            p = float(kw["p"])
            if not 0 < p < 1:
                raise DomainError("g_u needs p in (0, 1)")
            kappa, params = 1.0 - p, {"u": u, "p": p, "R0": R0}
        else:
            kappa, params = 1.0, {"u": u, "R0": R0}
        if u == 0:
            raise DomainError("need u != 0")
        g, g1, g2, log_g = _exp_profile(u, kappa, R0)
        ev, gr, he = _lift_radial(g, g1, g2, dim)
        log_ev = lambda x: log_g(_radial(x, dim)[1])
        return LyapunovFamily(family, params, dim, ev, gr, he, R0, (g, g1, g2), log_ev)
    if family == "g_m_log":
        m, x0 = float(kw.get("m", 1.0)), float(kw.get("x0", 6.0))
        if m < 1:
            raise DomainError("g_m_log needs m >= 1")
        if x0 < 2 * math.e:
            raise DomainError("g_m_log needs x0 >= 2e so the blend stays monotone")
        ev, gr, he, log_ev = _log_family(m, x0)
        return LyapunovFamily("g_m_log", {"m": m, "x0": x0}, 1, ev, gr, he, x0, None, log_ev)
    if family == "g_k_eps":
        eps = float(kw["eps"])
        if not 0 < eps < 0.5:
            raise DomainError("g_k_eps needs eps in (0, 1/2)")
        model = kw.get("model")
        if model is not None:
            sigma, c, a, pot, b_const = model.sigma, model.c, model.a, model.potential, model.b_const
        else:
            sigma, c, a = kw["sigma"], kw["c"], kw["a"]
            pot = kw.get("potential") or Potential.log_type(a)
            b_const = kw.get("b_const", potential_floor(pot.U))
        k = float(kw.get("k", 0.5 + a * c * (1 - 2 * eps) / sigma ** 2))
        if not k > 0:
            raise DomainError("need k > 0")
        form = np.array([[c * c * (1 - eps) / 2, c * (1 - eps) / 2], [c * (1 - eps) / 2, 0.5]])
        if np.linalg.eigvalsh(form).min() < -1e-14:
            raise DomainError("quadratic part is not positive semidefinite")
        ev, gr, he = _hamiltonian_family(k, eps, c, pot, b_const)
        return LyapunovFamily("g_k_eps", {"k": k, "eps": eps, "c": c, "b_const": b_const},
                              2, ev, gr, he, 0.0)
    raise DomainError(f"unknown Lyapunov family {family!r}")


# ----------------------------------------------------------------- presets


PRESETS = {
    "ap-langevin-k3": lambda **kw: make_ap_model(**{"alpha": 3.0, "beta": 2.0, "gamma": 2.0,
                                                    "ell": 0.0, "n": 1, "name": "ap-langevin-k3", **kw}),
    "ap-oscillating": lambda **kw: make_oscillating(**{"k": 3.0, "alpha": 2.0, **kw}),
    "ase-p05": lambda **kw: make_ase_model(**{"p": 0.5, "ell": 0.0, "alpha": 0.5, "beta": 2.0,
                                              "gamma": 2.0, "name": "ase-p05", **kw}),
    "ae-default": lambda **kw: make_ae_model(**{"alpha": 1.0, "beta": 2.0, "gamma": 2.0,
                                                "name": "ae-default", **kw}),
    "levy-mc2": lambda **kw: make_levy_ou(**{"mu": 2.0, "sigma": 1.0, "m_c": 2.0,
                                             "name": "levy-mc2", **kw}),
    "hamiltonian-15": lambda **kw: make_hamiltonian(**{"sigma": 1.0, "c": 1.0, "a": 1.5,
                                                       "name": "hamiltonian-15", **kw}),
}


def preset(name, **overrides):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None
    return factory(**overrides)
