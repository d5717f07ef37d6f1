"""Symmetric transition densities on R^d.

All kernels here are translation invariant and radial, so the basic
evaluator is ``radial(t, r)`` with ``r = |x - y|``.  Point-pair evaluation
``eval(t, x, y)`` reduces to it.

Two auxiliary radial quantities drive the spatial quadratures elsewhere:

* ``tail_moment(t, w) = int_w^inf p_t(v) v dv`` (d >= 2).  The mean of
  ``p_t(|y - z|)`` over the sphere ``|y| = rho`` with ``|z| = D`` is, in
  d = 3, ``(T(|rho - D|) - T(rho + D)) / (2 rho D)``.
* ``cdf(t, x)`` (d = 1), the distribution function of ``p_t``.

The alpha-stable kernel is built by subordination of the Gaussian kernel
``g_t(x) = (4 pi t)^{-d/2} exp(-|x|^2 / 4t)`` (heat semigroup of the
Laplacian, Fourier symbol ``|xi|^2``) against the alpha/2-stable
subordinator.  For alpha = 1 the subordinator density is explicit and the
kernel has the Cauchy closed form.
"""

from __future__ import annotations

import csv
import functools
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import special as sps
from scipy.interpolate import CubicSpline

from .quadrature import (
    IntegralResult,
    QuadratureConfig,
    integrate_fourier_radial,
    integrate_halfline,
    integrate_improper,
    integrate_interval,
    integrate_line,
    integrate_radial,
    sphere_area,
)
from .special import DomainError, levy_normalizer, lgamma

__all__ = [
    "Unsupported",
    "NegativeDensity",
    "SubordinatorDensity",
    "LevySymbol",
    "TransitionKernel",
    "GaussianKernel",
    "StableKernel",
    "LevyKernel",
    "TabulatedKernel",
    "ModulatedKernel",
    "gaussian_eval",
    "subordinator_density",
    "stable_eval",
    "levy_eval",
    "ck_residual",
    "markov_defect",
]

ALPHA_RANGE = (0.1, 1.9)


class Unsupported(ValueError):
    """Parameters outside the validated range of a numerical representation."""


class NegativeDensity(UserWarning):
    """Fourier inversion returned a clearly negative density value."""


def _as_float_array(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# alpha/2-stable subordinator
# ---------------------------------------------------------------------------


def _kanter_log_density(a: float, x: float, cfg: QuadratureConfig) -> float:
    """log of the one-sided a-stable density (Laplace transform exp(-u^a)) at x.

    Zolotarev/Kanter integral::

        f(x) = k/pi x^{-1/(1-a)} int_0^pi A(th) exp(-x^{-k} A(th)) dth,
        A(th) = (sin(a th)/sin th)^{1/(1-a)} sin((1-a) th)/sin(a th),  k = a/(1-a).
    """
    k = a / (1.0 - a)
    big_x = x ** (-k)
    a0 = a ** k * (1.0 - a)

    def integrand(th):
        log_a = (np.log(np.sin(a * th)) - np.log(np.sin(th))) / (1.0 - a) \
            + np.log(np.sin((1.0 - a) * th)) - np.log(np.sin(a * th))
        amp = np.exp(np.minimum(log_a, 700.0))
        return np.exp(np.minimum(log_a, 700.0) - big_x * (amp - a0))

    res = integrate_interval(integrand, 0.0, math.pi, cfg)
    return math.log(k / math.pi) - (1.0 + k) * math.log(x) - big_x * a0 + math.log(res.value)


def _series_log_density(a: float, x: np.ndarray, terms: int = 80) -> np.ndarray:
    """log of the convergent large-x series (1/pi) sum (-1)^{j+1} G(aj+1)/j! sin(pi a j) x^{-aj-1}."""
    j = np.arange(1, terms + 1)
    coef = np.exp(sps.gammaln(a * j + 1) - sps.gammaln(j + 1)) * np.sin(np.pi * a * j) * (-1.0) ** (j + 1)
    lx = np.log(x)[:, None]
    s = (coef[None, :] * np.exp(-a * j[None, :] * lx)).sum(axis=1)
    return np.log(s / math.pi) - np.log(x)


@functools.lru_cache(maxsize=16)
def _subordinator_table(a: float):
    k = a / (1.0 - a)
    a0 = a ** k * (1.0 - a)
    log_x_lo = -math.log(800.0 / a0) / k
    log_x_s = math.log(2.0) / a
    nodes = np.linspace(log_x_lo, log_x_s + 0.5, 700)
    cfg = QuadratureConfig(rel_tol=1e-13, abs_tol=0.0, max_subdivisions=4000)
    vals = np.array([_kanter_log_density(a, math.exp(v), cfg) for v in nodes])
    return log_x_lo, log_x_s, CubicSpline(nodes, vals)


class SubordinatorDensity:
    """Density eta_t(s) of the alpha/2-stable subordinator, int e^{-us} eta_t(s) ds = exp(-t u^{alpha/2}).

    alpha = 1 uses the closed form ``t (4 pi)^{-1/2} s^{-3/2} exp(-t^2/4s)``.
    Other alpha in [0.1, 1.9] use a cubic spline of log eta_1 tabulated from
    the Kanter integral on the bulk, the convergent power series for large
    arguments (``s^{-alpha/2} <= 1/2``), and the scaling
    ``eta_t(s) = t^{-2/alpha} eta_1(s t^{-2/alpha})``.
    """

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not 0.0 < alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
        self.alpha = alpha
        self.a = alpha / 2.0
        self.closed_form = alpha == 1.0
        if not self.closed_form and not ALPHA_RANGE[0] <= alpha <= ALPHA_RANGE[1]:
            raise Unsupported(f"subordinator density validated for alpha in {ALPHA_RANGE}, got {alpha}")
        self._table = None if self.closed_form else _subordinator_table(self.a)

    def _log_eta1(self, x: np.ndarray) -> np.ndarray:
        lx = np.log(x)
        lo, hi, spline = self._table
        out = np.full(lx.shape, -np.inf)
        mid = (lx >= lo) & (lx < hi)
        out[mid] = spline(lx[mid])
        big = lx >= hi
        if np.any(big):
            out[big] = _series_log_density(self.a, x[big])
        return out

    def log_eval(self, t, s) -> np.ndarray:
        t, s = np.broadcast_arrays(_as_float_array(t), _as_float_array(s))
        with np.errstate(divide="ignore"):
            if self.closed_form:
                return np.log(t) - 0.5 * math.log(4 * math.pi) - 1.5 * np.log(s) - t * t / (4.0 * s)
            log_scale = np.log(t) / self.a
            x = np.exp(np.log(s) - log_scale)
            return self._log_eta1(np.atleast_1d(x)).reshape(x.shape) - log_scale

    def __call__(self, t, s) -> np.ndarray:
        return np.exp(self.log_eval(t, s))

    def laplace(self, t: float, u: float, cfg: QuadratureConfig | None = None) -> IntegralResult:
        """Numerical Laplace transform int e^{-us} eta_t(s) ds."""
        scale = t ** (1.0 / self.a)
        cfg = (cfg or QuadratureConfig()).with_splits([scale])
        return integrate_improper(lambda s: np.exp(self.log_eval(t, s) - u * s), cfg)


def subordinator_density(alpha: float, t: float, s) -> np.ndarray:
    return SubordinatorDensity(alpha)(t, s)


# ---------------------------------------------------------------------------
# Levy symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevySymbol:
    """Radial Levy symbol psi with optional declared scaling indices.

    Validation checks psi(0) = 0, psi >= 0 and the almost-monotonicity
    ``pi^2 psi(r) >= sup_{p <= r} psi(p)`` on a log grid.
    """

    psi: Callable[[np.ndarray], np.ndarray]
    tag: str = "custom"
    lower_index: float | None = None
    upper_index: float | None = None

    def __post_init__(self):
        grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 241)])
        vals = _as_float_array(self.psi(grid))
        if abs(vals[0]) > 1e-14:
            raise ValueError(f"psi(0) must vanish, got {vals[0]}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("psi must be finite and nonnegative")
        if np.any(math.pi**2 * vals < np.maximum.accumulate(vals) * (1 - 1e-12)):
            raise ValueError("psi fails the almost-increasing check pi^2 psi(r) >= sup_{p<=r} psi(p)")

    def __call__(self, r) -> np.ndarray:
        return _as_float_array(self.psi(_as_float_array(r)))

    @classmethod
    def power(cls, alpha: float) -> "LevySymbol":
        return cls(lambda r: np.abs(r) ** alpha, tag=f"power({alpha:g})", lower_index=alpha, upper_index=alpha)

    @classmethod
    def log_perturbed(cls) -> "LevySymbol":
        """psi(r) = r sqrt(log(1 + r))."""
        return cls(lambda r: np.abs(r) * np.sqrt(np.log1p(np.abs(r))), tag="r_sqrt_log1p")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


class TransitionKernel:
    """Radial, translation-invariant transition density on R^d."""

    kind: str = "abstract"
    is_translation_invariant: bool = True
    closed_form: bool = False

    def __init__(self, d: int, cfg: QuadratureConfig | None = None):
        if int(d) != d or d < 1:
            raise DomainError(f"dimension must be a positive integer, got {d}")
        self.d = int(d)
        self.cfg = cfg or QuadratureConfig()

    # -- to implement -----------------------------------------------------
    def radial(self, t, r) -> np.ndarray:
        raise NotImplementedError

    def time_scale(self, r) -> np.ndarray:
        """Time at which p_t(r) turns from its short-time to its long-time regime."""
        raise NotImplementedError

    @property
    def kernel_id(self) -> str:
        return f"{self.kind}(d={self.d})"

    # -- generic ----------------------------------------------------------
    def eval(self, t, x, y) -> np.ndarray:
        """p_t(x, y); points are scalars (or length-1 vectors) in d = 1 and have a trailing axis of length d otherwise."""
        diff = _as_float_array(x) - _as_float_array(y)
        if self.d == 1:
            r = np.abs(diff[..., 0]) if diff.ndim >= 1 and diff.shape[-1] == 1 else np.abs(diff)
        else:
            r = np.linalg.norm(diff, axis=-1)
        return self.radial(t, r)

    def log_radial(self, t, r) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.radial(t, r))

    def mass(self, t: float) -> float:
        return integrate_radial(lambda r: self.radial(t, r), self.d, self.cfg).value

    def tail_moment(self, t: float, w) -> np.ndarray:
        """int_w^inf p_t(v) v dv, numerically."""
        w = np.atleast_1d(_as_float_array(w))
        out = np.empty_like(w)
        for i, wi in enumerate(w.ravel()):
            out.ravel()[i] = integrate_halfline(lambda v: self.radial(t, v) * v, wi, self.cfg).value
        return out

    def tail_moment_antiderivatives(self, t: float, w) -> tuple[np.ndarray, np.ndarray] | None:
        """Antiderivatives U, U1 of T(w) and w T(w) when available in closed form."""
        return None

    def cdf(self, t: float, x) -> np.ndarray:
        """Distribution function in d = 1."""
        if self.d != 1:
            raise DomainError("cdf is defined for d = 1 only")
        x = np.atleast_1d(_as_float_array(x))
        out = np.empty_like(x)
        for i, xi in enumerate(x.ravel()):
            part = integrate_halfline(lambda v: self.radial(t, v), abs(xi), self.cfg).value
            out.ravel()[i] = 1.0 - part if xi >= 0 else part
        return out

    def sphere_mean(self, t: float, rho, D: float) -> np.ndarray:
        """Mean of p_t(|y - z|) over the sphere |y| = rho, for a fixed z with |z| = D."""
        rho = np.atleast_1d(_as_float_array(rho))
        D = float(D)
        if self.d == 1:
            return 0.5 * (self.radial(t, np.abs(rho - D)) + self.radial(t, rho + D))
        out = np.empty_like(rho)
        small = 2.0 * rho * D < 1e-3 * (rho + D) ** 2
        if self.d == 3:
            big = ~small
            if np.any(big):
                rb = rho[big]
                tm = self.tail_moment(t, np.concatenate([np.abs(rb - D), rb + D]))
                n = len(rb)
                out[big] = (tm[:n] - tm[n:]) / (2.0 * rb * D)
        else:
            small = np.ones_like(rho, dtype=bool)
        if np.any(small):
            out[small] = self._angular_mean(t, rho[small], D)
        return out

    def _angular_mean(self, t, rho, D, n: int = 64) -> np.ndarray:
        # Gauss-Jacobi in c = cos(angle) with weight (1 - c^2)^{(d-3)/2}.
        ex = (self.d - 3) / 2.0
        c, wts = sps.roots_jacobi(n, ex, ex)
        wts = wts / wts.sum()
        dist = np.sqrt(np.maximum(rho[:, None] ** 2 + D * D - 2.0 * rho[:, None] * D * c[None, :], 0.0))
        return self.radial(t, dist) @ wts

    def convolve_radial(self, t: float, H: Callable[[np.ndarray], np.ndarray], x_norm: float,
                        cfg: QuadratureConfig | None = None, splits: Sequence[float] = ()) -> IntegralResult:
        """int p_t(x - y) H(|y|) dy for a radial H, by the two-center reduction."""
        cfg = (cfg or self.cfg).with_splits([x_norm, *splits])
        if self.d == 1:
            return integrate_line(lambda y: self.radial(t, np.abs(y - x_norm)) * H(np.abs(y)),
                                  cfg.with_splits([-x_norm, *[-s for s in splits]]), center=0.0)
        omega = sphere_area(self.d)
        return integrate_improper(lambda rho: omega * rho ** (self.d - 1) * H(rho) * self.sphere_mean(t, rho, x_norm),
                                  cfg)


class GaussianKernel(TransitionKernel):
    """g_t(x) = (4 pi t)^{-d/2} exp(-|x|^2/4t), optionally killed at constant rate kappa."""

    kind = "gaussian"
    closed_form = True

    def __init__(self, d: int, killing_rate: float = 0.0, cfg: QuadratureConfig | None = None):
        super().__init__(d, cfg)
        if not killing_rate >= 0:
            raise DomainError("killing_rate must be >= 0")
        self.kappa = float(killing_rate)

    @property
    def kernel_id(self) -> str:
        kill = f",kappa={self.kappa:g}" if self.kappa else ""
        return f"gaussian(d={self.d}{kill})"

    def log_radial(self, t, r) -> np.ndarray:
        t = _as_float_array(t)
        r = _as_float_array(r)
        return -0.5 * self.d * np.log(4 * math.pi * t) - r * r / (4.0 * t) - self.kappa * t

    def radial(self, t, r) -> np.ndarray:
        return np.exp(self.log_radial(t, r))

    def time_scale(self, r):
        return _as_float_array(r) ** 2

    def symbol(self, k):
        return _as_float_array(k) ** 2 + self.kappa

    def mass(self, t: float) -> float:
        return math.exp(-self.kappa * t)

    def tail_moment(self, t, w):
        w = _as_float_array(w)
        return 2.0 * t * np.exp(self.log_radial(t, w))

    def tail_moment_antiderivatives(self, t, w):
        w = _as_float_array(w)
        c = 2.0 * t * (4 * math.pi * t) ** (-0.5 * self.d) * math.exp(-self.kappa * t)
        u = c * math.sqrt(math.pi * t) * sps.erf(w / (2.0 * math.sqrt(t)))
        u1 = -2.0 * t * c * np.exp(-w * w / (4.0 * t))
        return u, u1

    def cdf(self, t, x):
        if self.d != 1:
            raise DomainError("cdf is defined for d = 1 only")
        return 0.5 * math.exp(-self.kappa * t) * sps.erfc(-_as_float_array(x) / (2.0 * math.sqrt(t)))


class StableKernel(TransitionKernel):
    """Isotropic alpha-stable density p_t(x) = int_0^inf g_s(x) eta_t(s) ds, Fourier symbol |xi|^alpha.

    ``method="auto"`` uses the Cauchy closed form
    ``Gamma((d+1)/2) pi^{-(d+1)/2} t (t^2+|x|^2)^{-(d+1)/2}`` for alpha = 1 and
    subordination otherwise; ``method="subordination"`` forces the integral.
    """

    kind = "stable"

    def __init__(self, alpha: float, d: int, method: str = "auto", cfg: QuadratureConfig | None = None):
        super().__init__(d, cfg)
        if not 0.0 < alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
        if method not in ("auto", "closed", "subordination"):
            raise ValueError(f"unknown method {method!r}")
        self.alpha = float(alpha)
        if method == "auto":
            method = "closed" if self.alpha == 1.0 else "subordination"
        if method == "closed" and self.alpha != 1.0:
            raise Unsupported("closed form is available for alpha = 1 only")
        self.method = method
        self.closed_form = method == "closed"
        self.eta = SubordinatorDensity(self.alpha)
        self._log_c_cauchy = lgamma((d + 1) / 2) - (d + 1) / 2 * math.log(math.pi)

    @property
    def kernel_id(self) -> str:
        return f"stable(alpha={self.alpha:g},d={self.d})"

    def time_scale(self, r):
        return _as_float_array(r) ** self.alpha

    def symbol(self, k):
        return np.abs(_as_float_array(k)) ** self.alpha

    def jump_density(self, r):
        """Levy density A_{d,-alpha} r^{-d-alpha}."""
        return levy_normalizer(self.d, self.alpha) * _as_float_array(r) ** (-self.d - self.alpha)

    def _subordinate(self, log_g: Callable[[np.ndarray], np.ndarray], rho: float) -> float:
        """int_0^inf exp(log_g(s)) eta_1(s) ds, panels split at s = 1, rho^2 and around the peak.

        The integrand peaks near s = rho^2 / (2(d + 2 + alpha)); the tolerance
        is purely relative because p_1(rho) is tiny for large rho.
        """
        peak = rho * rho / (2.0 * (self.d + 2.0 + self.alpha))
        pts = (rho * rho, 1.0, peak / 10.0, peak, peak * 10.0)
        cfg = replace(self.cfg, abs_tol=0.0).with_splits(sorted({p for p in pts if p > 0}))
        return integrate_improper(lambda s: np.exp(log_g(s) + self.eta.log_eval(1.0, s)), cfg).value

    def _unit_radial(self, rho: float) -> float:
        # p_1(rho); beyond rho = 1e30 the jump asymptotics A rho^{-d-alpha} are exact to double precision
        if rho > 1e30:
            return float(self.jump_density(rho))
        d = self.d
        return self._subordinate(lambda s: -0.5 * d * np.log(4 * math.pi * s) - rho * rho / (4 * s), rho)

    def _unit_tail(self, w: float) -> float:
        # int_w^inf p_1(v) v dv, using G_s(w) = int_w^inf g_s(v) v dv = 2 s (4 pi s)^{-d/2} exp(-w^2/4s)
        d = self.d
        if w > 1e30:
            return float(self.jump_density(w)) * w * w / (d + self.alpha - 2)
        return self._subordinate(lambda s: -0.5 * d * np.log(4 * math.pi * s) + np.log(2 * s) - w * w / (4 * s), w)

    def log_radial(self, t, r):
        if self.closed_form:
            t, r = np.broadcast_arrays(_as_float_array(t), _as_float_array(r))
            with np.errstate(divide="ignore"):
                lt = np.log(t)
                lr = np.log(np.abs(r))
            return self._log_c_cauchy + lt - 0.5 * (self.d + 1) * np.logaddexp(2 * lt, 2 * lr)
        with np.errstate(divide="ignore"):
            return np.log(self.radial(t, r))

    def radial(self, t, r):
        if self.closed_form:
            return np.exp(self.log_radial(t, r))
        # p_t(r) = t^{-d/alpha} p_1(r t^{-1/alpha})
        t, r = np.broadcast_arrays(_as_float_array(t), _as_float_array(r))
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            scale = float(t[idx]) ** (1.0 / self.alpha)
            out[idx] = self._unit_radial(abs(float(r[idx])) / scale) * scale ** (-self.d)
        return out

    def mass(self, t: float) -> float:
        return integrate_radial(lambda r: self.radial(t, r), self.d,
                                self.cfg.with_splits([t ** (1 / self.alpha)])).value

    def tail_moment(self, t, w):
        w = _as_float_array(w)
        if self.closed_form:
            if self.d < 2:
                raise DomainError("tail moment diverges in d = 1")
            # c t (t^2 + w^2)^{-(d-1)/2} / (d - 1)
            return np.exp(self._log_c_cauchy + math.log(t) - 0.5 * (self.d - 1) * np.log(t * t + w * w)) / (self.d - 1)
        scale = t ** (1.0 / self.alpha)
        out = np.empty(w.shape)
        for idx in np.ndindex(w.shape):
            out[idx] = self._unit_tail(float(w[idx]) / scale) * scale ** (2 - self.d)
        return out

    def tail_moment_antiderivatives(self, t, w):
        if not (self.closed_form and self.d == 3):
            return None
        w = _as_float_array(w)
        u = np.arctan(w / t) / (2 * math.pi**2)
        u1 = t * np.log(t * t + w * w) / (4 * math.pi**2)
        return u, u1

    def cdf(self, t, x):
        if self.d != 1:
            raise DomainError("cdf is defined for d = 1 only")
        if self.closed_form:
            return 0.5 + np.arctan(_as_float_array(x) / t) / math.pi
        return super().cdf(t, x)


class LevyKernel(TransitionKernel):
    """Density with Fourier transform exp(-t psi(|xi|)), evaluated by radial Fourier inversion."""

    kind = "levy"

    def __init__(self, symbol: LevySymbol, d: int, cfg: QuadratureConfig | None = None):
        super().__init__(d, cfg)
        self.symbol_obj = symbol

    @property
    def kernel_id(self) -> str:
        return f"levy(psi={self.symbol_obj.tag},d={self.d})"

    def symbol(self, k):
        return self.symbol_obj(k)

    def time_scale(self, r):
        r = _as_float_array(r)
        with np.errstate(divide="ignore"):
            return 1.0 / self.symbol_obj(1.0 / r)

    def _invert(self, t: float, r: float, d: int) -> float:
        res = integrate_fourier_radial(lambda k: np.exp(-t * self.symbol_obj(k)), d, r, self.cfg)
        if res.value < -max(self.cfg.abs_tol, res.error_estimate):
            warnings.warn(f"Fourier inversion gave negative density {res.value:.3e} at t={t}, r={r}",
                          NegativeDensity, stacklevel=3)
        return res.value

    # Outside t in [SHORT, LONG] * time_scale(r) the inversion integral is
    # either too oscillatory or resolves nothing beyond p_t(0); there the
    # density is continued by p_t(r) ~ t p_t*(r) / t* (the jump regime) and
    # by p_t(r) ~ p_t(0) respectively.  Relative errors are O(SHORT) and
    # O((r / spread of p_t)^2).
    SHORT, LONG = 1e-2, 1e6

    @functools.lru_cache(maxsize=4096)
    def _short_time_slope(self, r: float) -> float:
        t_star = self.SHORT * float(self.time_scale(r))
        return self._invert(t_star, r, self.d) / t_star

    def _radial_one(self, t: float, r: float) -> float:
        if r > 0:
            tau = float(self.time_scale(r))
            if t < self.SHORT * tau:
                return t * self._short_time_slope(r)
            if t > self.LONG * tau:
                return self._invert(t, 0.0, self.d)
        return self._invert(t, r, self.d)

    def radial(self, t, r):
        t, r = np.broadcast_arrays(_as_float_array(t), _as_float_array(r))
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            out[idx] = self._radial_one(float(t[idx]), float(r[idx]))
        return out

    def tail_moment(self, t, w):
        # int_w^inf p_t(v) v dv equals (1/2pi) times the one-dimensional inverse transform at w.
        if self.d != 3:
            return super().tail_moment(t, w)
        w = _as_float_array(w)
        out = np.empty(w.shape)
        for idx in np.ndindex(w.shape):
            out[idx] = self._invert(t, float(w[idx]), 1) / (2 * math.pi)
        return out


class TabulatedKernel(TransitionKernel):
    """Kernel tabulated on a (t, r) grid, linearly interpolated in (log t, log r).

    Values are zero beyond the largest radius and constant below the
    smallest; times outside the grid are rejected.
    """

    kind = "tabulated"

    def __init__(self, d: int, t_grid, r_grid, values, cfg: QuadratureConfig | None = None):
        super().__init__(d, cfg)
        t_grid = _as_float_array(t_grid)
        r_grid = _as_float_array(r_grid)
        values = _as_float_array(values)
        if values.shape != (len(t_grid), len(r_grid)):
            raise ValueError(f"values shape {values.shape} does not match grid ({len(t_grid)}, {len(r_grid)})")
        if np.any(np.diff(t_grid) <= 0) or np.any(np.diff(r_grid) <= 0) or t_grid[0] <= 0 or r_grid[0] <= 0:
            raise ValueError("t and r grids must be positive and strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite and nonnegative")
        self.t_grid, self.r_grid, self.values = t_grid, r_grid, values
        self._lt, self._lr = np.log(t_grid), np.log(r_grid)

    @classmethod
    def from_kernel(cls, kernel: TransitionKernel, t_grid, r_grid) -> "TabulatedKernel":
        t_grid = _as_float_array(t_grid)
        r_grid = _as_float_array(r_grid)
        vals = np.stack([kernel.radial(t, r_grid) for t in t_grid])
        return cls(kernel.d, t_grid, r_grid, vals, kernel.cfg)

    def with_scaled_slice(self, t_index: int, factor: float) -> "TabulatedKernel":
        vals = self.values.copy()
        vals[t_index] *= factor
        return TabulatedKernel(self.d, self.t_grid, self.r_grid, vals, self.cfg)

    def time_scale(self, r):
        return _as_float_array(r) ** 2

    def radial(self, t, r):
        t, r = np.broadcast_arrays(_as_float_array(t), _as_float_array(r))
        lt = np.log(t)
        if np.any(lt < self._lt[0] - 1e-12) or np.any(lt > self._lt[-1] + 1e-12):
            raise DomainError(f"time outside the tabulated range [{self.t_grid[0]}, {self.t_grid[-1]}]")
        lt = np.clip(lt, self._lt[0], self._lt[-1])
        with np.errstate(divide="ignore"):
            lr = np.clip(np.log(np.abs(r)), self._lr[0], self._lr[-1])
        i = np.clip(np.searchsorted(self._lt, lt, side="right") - 1, 0, max(len(self._lt) - 2, 0))
        j = np.clip(np.searchsorted(self._lr, lr, side="right") - 1, 0, len(self._lr) - 2)
        if len(self._lt) == 1:
            wt = np.zeros_like(lt)
            i1 = i
        else:
            wt = (lt - self._lt[i]) / (self._lt[i + 1] - self._lt[i])
            i1 = i + 1
        wr = (lr - self._lr[j]) / (self._lr[j + 1] - self._lr[j])
        v = self.values
        out = ((1 - wt) * ((1 - wr) * v[i, j] + wr * v[i, j + 1])
               + wt * ((1 - wr) * v[i1, j] + wr * v[i1, j + 1]))
        return np.where(np.abs(r) > self.r_grid[-1], 0.0, out)

    def mass(self, t: float) -> float:
        cfg = self.cfg.with_splits(list(self.r_grid))
        omega = sphere_area(self.d)
        return integrate_interval(lambda r: omega * r ** (self.d - 1) * self.radial(t, r), 0.0,
                                  float(self.r_grid[-1]), cfg).value

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "r", "value"])
            for a, t in enumerate(self.t_grid):
                for b, r in enumerate(self.r_grid):
                    wr.writerow([repr(float(t)), repr(float(r)), repr(float(self.values[a, b]))])

    @classmethod
    def from_csv(cls, path, d: int, cfg: QuadratureConfig | None = None) -> "TabulatedKernel":
        rows = []
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if [h.strip() for h in header] != ["t", "r", "value"]:
                raise ValueError(f"expected header t,r,value, got {header}")
            for row in rd:
                if row:
                    rows.append(tuple(float(v) for v in row))
        arr = np.array(rows)
        t_grid = np.unique(arr[:, 0])
        r_grid = np.unique(arr[:, 1])
        if len(arr) != len(t_grid) * len(r_grid):
            raise ValueError("CSV does not describe a full (t, r) grid")
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        if not np.array_equal(order, np.arange(len(arr))):
            raise ValueError("CSV rows must be sorted by time, then radius")
        return cls(d, t_grid, r_grid, arr[:, 2].reshape(len(t_grid), len(r_grid)), cfg)


class ModulatedKernel(TransitionKernel):
    """Base kernel times a factor(t, r) with values in [1/c, c].

    The product is generally not a semigroup; it models a kernel known only
    through two-sided estimates against ``base``.
    """

    kind = "modulated"

    def __init__(self, base: TransitionKernel, factor: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 c: float, tag: str = "factor"):
        super().__init__(base.d, base.cfg)
        if not c >= 1:
            raise ValueError("comparability constant must be >= 1")
        self.base, self.factor, self.c, self.tag = base, factor, float(c), tag
        t = np.geomspace(1e-6, 1e6, 61)[:, None]
        r = np.geomspace(1e-6, 1e6, 61)[None, :]
        f = np.asarray(factor(t, r), dtype=float)
        if np.any(f < 1.0 / self.c * (1 - 1e-12)) or np.any(f > self.c * (1 + 1e-12)):
            raise ValueError(f"factor leaves [1/{c:g}, {c:g}] on the sample grid")

    @property
    def kernel_id(self) -> str:
        return f"modulated({self.base.kernel_id},{self.tag},c={self.c:g})"

    def time_scale(self, r):
        return self.base.time_scale(r)

    def log_radial(self, t, r):
        t, r = np.broadcast_arrays(_as_float_array(t), _as_float_array(r))
        return self.base.log_radial(t, r) + np.log(np.asarray(self.factor(t, r), dtype=float))

    def radial(self, t, r):
        t, r = np.broadcast_arrays(_as_float_array(t), _as_float_array(r))
        return self.base.radial(t, r) * np.asarray(self.factor(t, r), dtype=float)


# ---------------------------------------------------------------------------
# Function-style entry points and kernel diagnostics
# ---------------------------------------------------------------------------


def gaussian_eval(t, x, y, d: int) -> np.ndarray:
    return GaussianKernel(d).eval(t, x, y)


def stable_eval(alpha: float, t, x, y, d: int, cfg: QuadratureConfig | None = None,
                method: str = "subordination") -> np.ndarray:
    return StableKernel(alpha, d, method=method, cfg=cfg).eval(t, x, y)


def levy_eval(symbol: LevySymbol, t, x, y, d: int, cfg: QuadratureConfig | None = None) -> np.ndarray:
    return LevyKernel(symbol, d, cfg).eval(t, x, y)


def _distance(x, z, d: int) -> float:
    diff = np.atleast_1d(_as_float_array(x)) - np.atleast_1d(_as_float_array(z))
    if diff.shape != (d,):
        raise ValueError(f"points must have shape ({d},)")
    return float(np.linalg.norm(diff))


def ck_residual(k: TransitionKernel, s: float, t: float, x, z, cfg: QuadratureConfig | None = None) -> float:
    """|int p_s(x,y) p_t(y,z) dy - p_{s+t}(x,z)|."""
    cfg = cfg or k.cfg
    D = _distance(x, z, k.d)
    if k.d == 1:
        lhs = integrate_line(lambda y: k.radial(s, np.abs(y)) * k.radial(t, np.abs(y - D)),
                             cfg.with_splits(sorted({0.0, D})), center=0.0).value
    else:
        lhs = k.convolve_radial(t, lambda rho: k.radial(s, rho), D, cfg).value
    return abs(lhs - float(k.radial(s + t, D)))


def markov_defect(k: TransitionKernel, t: float, x=None, cfg: QuadratureConfig | None = None) -> float:
    """1 - int p_t(x, y) dy (independent of x for translation-invariant kernels)."""
    return 1.0 - k.mass(t)
