"""Time-weighted potentials h and Hardy weights q of a transition density.

For a time weight ``f(t) = t_+^beta`` and a finite atomic measure mu::

    h(x) = int_0^inf f(s) p_s mu(x) ds,
    q(x) = (1/h(x)) int_0^inf f'(s) p_s mu(x) ds   (q = 0 where h is 0 or inf),

with ``p_s mu(x) = sum_i m_i p_s(x, y_i)``.  ``h`` is supermedian:
``p_t h(x) = int_t^inf f(s - t) p_s mu(x) ds <= h(x)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernels import GaussianKernel, StableKernel, TransitionKernel
from .quadrature import IntegralResult, NonConvergent, QuadratureConfig, integrate_improper, integrate_interval
from .special import (
    DomainError,
    StableParams,
    gaussian_h_prefactor,
    hardy_constant_laplacian,
    hardy_constant_stable,
    stable_h_prefactor,
)

__all__ = [
    "TimeWeight",
    "AtomicMeasure",
    "SupermedianPair",
    "SupermedianResidual",
    "build_h",
    "build_k",
    "build_q",
    "supermedian_residual",
    "power_supermedian_check",
    "power_bound_admissible",
]

_DIVERGENCE_SLOPE_TOL = 1e-3


@dataclass(frozen=True)
class TimeWeight:
    """f(t) = t_+^beta, beta >= 0 (f = 1 on (0, inf) when beta = 0)."""

    beta: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, np.abs(t) ** self.beta, 0.0)

    def log(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, self.beta * np.log(np.abs(t)), -np.inf)

    def prime(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.beta == 0:
            return np.zeros_like(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(t > 0, self.beta * np.abs(t) ** (self.beta - 1), 0.0)

    def log_prime(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.beta == 0:
            return np.full(t.shape, -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, math.log(self.beta) + (self.beta - 1) * np.log(np.abs(t)), -np.inf)

    def absolute_continuity_gap(self, a: float, b: float, cfg: QuadratureConfig | None = None) -> float:
        """f(b) - f(a) - int_a^b f'(s) ds, which must be >= 0 (and is 0 up to quadrature error)."""
        cfg = (cfg or QuadratureConfig()).with_splits([0.0])
        integral = integrate_interval(self.prime, a, b, cfg).value if b > a else 0.0
        return float(self(b) - self(a) - integral)

    def increment_constant(self) -> float:
        """Smallest c with [f(s) - f(s-t)]/t <= c f'(s) for all s, t > 0 (inf when beta = 0)."""
        if self.beta == 0:
            return math.inf
        return max(1.0, 1.0 / self.beta)

    def increment_ratio(self, s_grid, t_grid) -> float:
        """max over the grid of [f(s) - f(s-t)] / (t f'(s))."""
        s = np.asarray(s_grid, dtype=float)[:, None]
        t = np.asarray(t_grid, dtype=float)[None, :]
        num = self(s) - self(s - t)
        den = t * self.prime(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
        return float(ratio.max())


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of point masses sum_i m_i delta_{y_i}."""

    points: tuple
    masses: tuple

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.points)
        ms = tuple(float(m) for m in self.masses)
        if len(pts) != len(ms) or not pts:
            raise ValueError("need one positive mass per point and at least one atom")
        if any(not m > 0 for m in ms):
            raise ValueError("atom masses must be positive")
        if len(set(pts)) != len(pts):
            raise ValueError("atom points must be distinct")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("atom points must share one dimension")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", ms)

    @classmethod
    def dirac(cls, d: int, mass: float = 1.0) -> "AtomicMeasure":
        return cls(((0.0,) * d,), (mass,))

    @property
    def d(self) -> int:
        return len(self.points[0])

    @property
    def is_origin_dirac(self) -> bool:
        return len(self.points) == 1 and not any(self.points[0])

    def distances(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.linalg.norm(np.asarray(self.points) - x[None, :], axis=1)

    def describe(self) -> str:
        if self.is_origin_dirac and self.masses[0] == 1.0:
            return "delta_0"
        return ";".join(f"{m:g}@{list(p)}" for p, m in zip(self.points, self.masses))


def _as_point(x, d: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise ValueError(f"point must have shape ({d},), got {x.shape}")
    return x


def _loglog_slope(log_g: Callable[[np.ndarray], np.ndarray], s0: float, s1: float) -> float:
    """Slope of log(integrand) against log s between s0 and s1 (nan if both values vanish)."""
    vals = log_g(np.array([s0, s1]))
    if np.all(np.isneginf(vals)):
        return math.nan
    return float((vals[1] - vals[0]) / (math.log(s1) - math.log(s0)))


def _time_potential(k: TransitionKernel, log_weight: Callable[[np.ndarray], np.ndarray], r: float,
                    cfg: QuadratureConfig) -> IntegralResult:
    """int_0^inf exp(log_weight(s)) p_s(r) ds, with +inf returned for divergent tails."""
    tau = float(k.time_scale(r)) if r > 0 else 1.0
    if not (tau > 0 and math.isfinite(tau)):
        tau = 1.0

    def log_g(s):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return log_weight(s) + k.log_radial(s, r)

    # Integrable at infinity needs a log-log slope below -1 over the last two
    # decades, integrable at 0 needs a slope above -1.
    hi = _loglog_slope(log_g, 1e6 * tau, 1e8 * tau)
    lo = _loglog_slope(log_g, 1e-8 * tau, 1e-6 * tau)
    if (not math.isnan(hi) and hi >= -1.0 - _DIVERGENCE_SLOPE_TOL) or \
            (not math.isnan(lo) and lo <= -1.0 + _DIVERGENCE_SLOPE_TOL):
        return IntegralResult(math.inf, 0.0, True, 4)
    return integrate_improper(lambda s: np.exp(log_g(s)), cfg.with_splits([tau]))


def _measure_potential(k, mu, log_weight, x, cfg) -> float:
    if mu.d != k.d:
        raise ValueError("measure and kernel dimensions differ")
    x = _as_point(x, k.d)
    total = 0.0
    for r, m in zip(mu.distances(x), mu.masses):
        val = _time_potential(k, log_weight, float(r), cfg).value
        if math.isinf(val):
            return math.inf
        total += m * val
    return total


def build_h(k: TransitionKernel, w: TimeWeight, mu: AtomicMeasure, x, cfg: QuadratureConfig | None = None) -> float:
    """h(x) = int_0^inf f(s) p_s mu(x) ds; +inf when the time integral diverges."""
    return _measure_potential(k, mu, w.log, x, cfg or k.cfg)


def build_k(k: TransitionKernel, w: TimeWeight, mu: AtomicMeasure, x, cfg: QuadratureConfig | None = None) -> float:
    """int_0^inf f'(s) p_s mu(x) ds (zero for beta = 0)."""
    if w.beta == 0:
        return 0.0
    return _measure_potential(k, mu, w.log_prime, x, cfg or k.cfg)


def build_q(k: TransitionKernel, w: TimeWeight, mu: AtomicMeasure, x, cfg: QuadratureConfig | None = None) -> float:
    """q(x) = build_k / build_h, with q = 0 where h is 0 or infinite."""
    h = build_h(k, w, mu, x, cfg)
    if h == 0.0 or math.isinf(h):
        return 0.0
    return build_k(k, w, mu, x, cfg) / h


@dataclass(frozen=True)
class SupermedianPair:
    """h and q attached to a kernel, a time weight and an atomic measure.

    ``h_radial`` and ``q_radial`` are available when mu is a point mass at the
    origin; ``h`` and ``q`` take points.
    """

    h: Callable
    q: Callable
    mode: str
    kernel_id: str
    beta: float
    measure: str
    h_radial: Callable | None = None
    q_radial: Callable | None = None
    kernel: TransitionKernel | None = field(default=None, repr=False)
    mu: AtomicMeasure | None = field(default=None, repr=False)

    @property
    def weight(self) -> TimeWeight:
        return TimeWeight(self.beta)

    @classmethod
    def numeric(cls, k: TransitionKernel, w: TimeWeight, mu: AtomicMeasure,
                cfg: QuadratureConfig | None = None) -> "SupermedianPair":
        cfg = cfg or k.cfg
        radial = mu.is_origin_dirac
        m0 = mu.masses[0]

        def h_rad(r):
            r = np.asarray(r, dtype=float)
            return np.vectorize(lambda ri: m0 * _time_potential(k, w.log, float(ri), cfg).value)(r)

        def q_rad(r):
            def one(ri):
                hv = _time_potential(k, w.log, float(ri), cfg).value
                if hv == 0 or math.isinf(hv) or w.beta == 0:
                    return 0.0
                return _time_potential(k, w.log_prime, float(ri), cfg).value / hv
            return np.vectorize(one)(np.asarray(r, dtype=float))

        return cls(
            h=lambda x: build_h(k, w, mu, x, cfg),
            q=lambda x: build_q(k, w, mu, x, cfg),
            mode="numeric", kernel_id=k.kernel_id, beta=w.beta, measure=mu.describe(),
            h_radial=h_rad if radial else None, q_radial=q_rad if radial else None,
            kernel=k, mu=mu,
        )

    @classmethod
    def _radial(cls, h_rad, q_rad, kernel, beta, d) -> "SupermedianPair":
        return cls(
            h=lambda x: float(h_rad(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))),
            q=lambda x: float(q_rad(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))),
            mode="closed_form", kernel_id=kernel.kernel_id, beta=beta, measure="delta_0",
            h_radial=h_rad, q_radial=q_rad, kernel=kernel, mu=AtomicMeasure.dirac(d),
        )

    @classmethod
    def closed_form_stable(cls, d: int, alpha: float, beta: float) -> "SupermedianPair":
        """Stable kernel, f = t^beta, mu = delta_0: h = c |x|^{alpha(beta+1)-d}, q = C |x|^{-alpha}."""
        p = StableParams(d, alpha, beta)
        c_h = stable_h_prefactor(p)
        c_q = hardy_constant_stable(p)
        e = p.h_exponent
        with np.errstate(divide="ignore"):
            h_rad = lambda r: c_h * np.asarray(r, dtype=float) ** e
            q_rad = lambda r: c_q * np.asarray(r, dtype=float) ** (-alpha)
        return cls._radial(h_rad, q_rad, StableKernel(alpha, d), beta, d)

    @classmethod
    def closed_form_gaussian(cls, d: int, gamma: float) -> "SupermedianPair":
        """Gaussian kernel, f = t^{gamma/2}, mu = delta_0: q = gamma(d-2-gamma)/|x|^2."""
        c_h = gaussian_h_prefactor(d, gamma)
        c_q = hardy_constant_laplacian(d, gamma)
        h_rad = lambda r: c_h * np.asarray(r, dtype=float) ** (gamma - d + 2)
        q_rad = lambda r: c_q * np.asarray(r, dtype=float) ** (-2.0)
        return cls._radial(h_rad, q_rad, GaussianKernel(d), gamma / 2, d)

    @classmethod
    def closed_form_killed_gaussian(cls, kappa: float) -> "SupermedianPair":
        """Gaussian kernel on R killed at rate kappa, f = t, mu = delta_0.

        h(x) = exp(-sqrt(kappa)|x|)(1 + sqrt(kappa)|x|) / (4 kappa^{3/2}),
        q(x) = 2 kappa / (1 + sqrt(kappa)|x|).
        """
        if not kappa > 0:
            raise DomainError("kappa must be positive")
        sk = math.sqrt(kappa)
        h_rad = lambda r: np.exp(-sk * np.asarray(r, dtype=float)) * (1 + sk * np.asarray(r, dtype=float)) / (4 * kappa**1.5)
        q_rad = lambda r: 2 * kappa / (1 + sk * np.asarray(r, dtype=float))
        return cls._radial(h_rad, q_rad, GaussianKernel(1, killing_rate=kappa), 1.0, 1)

    def to_csv(self, path, radii: Sequence[float]) -> None:
        if self.h_radial is None:
            raise ValueError("CSV export needs a radial pair")
        radii = np.asarray(radii, dtype=float)
        hs = np.asarray(self.h_radial(radii), dtype=float)
        qs = np.asarray(self.q_radial(radii), dtype=float)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "h", "q"])
            for r, h, q in zip(radii, hs, qs):
                wr.writerow([repr(float(r)), repr(float(h)), repr(float(q))])


@dataclass(frozen=True)
class SupermedianResidual:
    h: float
    pth: float
    margin: float
    error_estimate: float
    identity_residual: float = math.nan

    @property
    def holds(self) -> bool:
        return self.margin >= -self.error_estimate


def _convolution_splits(k: TransitionKernel, t: float, D: float) -> list[float]:
    width = float(np.sqrt(t)) if isinstance(k, GaussianKernel) else float(t ** (1.0 / getattr(k, "alpha", 2.0)))
    return [p for p in (D - width, D + width, D - 5 * width, D + 5 * width) if p > 0]


def _shifted_potential(k: TransitionKernel, w: TimeWeight, r: float, t: float, cfg: QuadratureConfig) -> float:
    """int_t^inf f(s - t) p_s(r) ds."""
    tau = float(k.time_scale(r)) if r > 0 else 1.0
    def log_g(u):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return w.log(u) + k.log_radial(u + t, r)
    hi = _loglog_slope(log_g, 1e6 * max(tau, t), 1e8 * max(tau, t))
    if not math.isnan(hi) and hi >= -1.0 - _DIVERGENCE_SLOPE_TOL:
        return math.inf
    return integrate_improper(lambda u: np.exp(log_g(u)), cfg.with_splits([tau, t])).value


def supermedian_residual(k: TransitionKernel, pair: SupermedianPair, t: float, x,
                         cfg: QuadratureConfig | None = None) -> SupermedianResidual:
    """h(x) - int p_t(x, y) h(y) dy, and the defect of p_t h(x) = int_t^inf f(s-t) p_s mu(x) ds."""
    if pair.h_radial is None:
        raise ValueError("supermedian_residual needs a radial pair (mu = delta_0)")
    cfg = cfg or k.cfg
    D = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    hx = float(pair.h_radial(D))
    if not math.isfinite(hx):
        raise DomainError("h must be finite at x")
    res = k.convolve_radial(t, pair.h_radial, D, cfg, splits=_convolution_splits(k, t, D))
    ident = math.nan
    if pair.mu is not None:
        m0 = pair.mu.masses[0]
        ident = abs(res.value - m0 * _shifted_potential(k, pair.weight, D, t, cfg))
    return SupermedianResidual(hx, res.value, hx - res.value, res.error_estimate + cfg.rel_tol * abs(hx), ident)


def power_bound_admissible(k: TransitionKernel, r: float) -> bool:
    """Whether 0 <= r <= d - alpha (stable) or 0 <= r <= d - 2 (Gaussian)."""
    if isinstance(k, StableKernel):
        return 0.0 <= r <= k.d - k.alpha
    if isinstance(k, GaussianKernel):
        return k.d >= 3 and 0.0 <= r <= k.d - 2 and k.kappa == 0
    return False


def power_supermedian_check(k: TransitionKernel, r: float, t: float, x_norm: float,
                            cfg: QuadratureConfig | None = None) -> SupermedianResidual:
    """Margin |x|^{-r} - int p_t(y - x) |y|^{-r} dy for a radial power."""
    if not power_bound_admissible(k, r):
        raise DomainError(f"power {r} is outside the admissible range for {k.kernel_id}")
    cfg = cfg or k.cfg
    H = lambda rho: np.asarray(rho, dtype=float) ** (-r)
    res = k.convolve_radial(t, H, x_norm, cfg, splits=_convolution_splits(k, t, x_norm))
    hx = x_norm ** (-r)
    return SupermedianResidual(hx, res.value, hx - res.value, res.error_estimate + cfg.rel_tol * hx)
