"""Quadratic forms of radial test functions and the Hardy identity harness.

All double integrals are over R^d x R^d with radial integrands and a
translation-invariant radial kernel ``K(|x - y|)``; they reduce to

    int_0^inf int_0^inf G(rho, rho') N(rho, rho') drho drho',

with pair weight ``N = 2 (K(|rho - rho'|) + K(rho + rho'))`` in d = 1 and
``N = 8 pi^2 rho rho' (T(|rho - rho'|) - T(rho + rho'))`` in d = 3, where
``T(w) = int_w^inf K(v) v dv``.  Other dimensions are not supported by the
double-integral routes.  The integral is taken as twice the part with
``rho' = rho + z``, ``z > 0``; the outer integral in z runs over (0, inf) so
the diagonal singularity sits at an endpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

from .kernels import GaussianKernel, LevyKernel, LevySymbol, StableKernel, TransitionKernel
from .quadrature import (
    IntegralResult,
    QuadratureConfig,
    UnsupportedDimension,
    integrate_halfline,
    integrate_improper,
    integrate_interval,
    integrate_radial,
    sphere_area,
)
from .special import hardy_constant_stable, levy_normalizer, StableParams
from .supermedian import SupermedianPair

__all__ = [
    "TestFunction",
    "JumpKernel",
    "HardyReport",
    "NoLimitDetected",
    "MissingGradient",
    "PreconditionError",
    "gaussian_bump",
    "smoothed_power",
    "hat",
    "annular_bump",
    "zero_function",
    "standard_battery",
    "BATTERY_VERSION",
    "form_Et",
    "form_limit",
    "FormLimit",
    "jump_form",
    "fourier_form",
    "dirichlet_form",
    "weighted_l2",
    "remainder_term",
    "remainder_jump",
    "remainder_limit",
    "gradient_remainder",
    "hardy_verify",
    "comparable_kernel_bound",
    "tabulated_weight",
    "check_square_integrable",
]

BATTERY_VERSION = "battery-v1"


class NoLimitDetected(ArithmeticError):
    """The t-sequence of E^(t) values is not monotone, so no limit is reported."""


class MissingGradient(ValueError):
    pass


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Radial test function u(x) = profile(|x|) on R^d.

    ``support`` is the closed radial range outside of which u vanishes,
    ``knots`` are radii where u or its derivative is not smooth or changes
    scale, and ``feature`` is the smallest length scale of u.  ``fourier``,
    when set, is the radial profile of the transform with the convention
    ``u^(xi) = (2 pi)^{-d} int e^{-i<xi,x>} u(x) dx``.
    """

    __test__ = False  # not a pytest class

    profile: Callable[[np.ndarray], np.ndarray]
    d: int
    tag: str
    family: str
    support: tuple[float, float]
    feature: float
    derivative: Callable[[np.ndarray], np.ndarray] | None = None
    knots: tuple[float, ...] = ()
    fourier: Callable[[np.ndarray], np.ndarray] | None = None

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.asarray(self.profile(r), dtype=float) * np.ones_like(r)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.d == 1 else np.linalg.norm(x, axis=-1)
        return self.radial(r)

    def gradient_radial(self, r) -> np.ndarray:
        if self.derivative is None:
            raise MissingGradient(f"test function {self.tag} has no gradient")
        r = np.asarray(r, dtype=float)
        return np.asarray(self.derivative(r), dtype=float) * np.ones_like(r)

    @property
    def splits(self) -> list[float]:
        pts = [p for p in (*self.support, *self.knots) if 0 < p < math.inf]
        return sorted(set(pts))

    def scaled(self, a: float) -> "TestFunction":
        """a * u."""
        p, dp, f = self.profile, self.derivative, self.fourier
        return replace(
            self, tag=f"{a:g}*{self.tag}", profile=lambda r: a * p(r),
            derivative=None if dp is None else (lambda r: a * dp(r)),
            fourier=None if f is None else (lambda k: a * f(k)),
        )

    def dilated(self, lam: float) -> "TestFunction":
        """x -> u(x / lam)."""
        p, dp, f, d = self.profile, self.derivative, self.fourier, self.d
        return replace(
            self, tag=f"{self.tag}@x/{lam:g}", profile=lambda r: p(np.asarray(r) / lam),
            derivative=None if dp is None else (lambda r: dp(np.asarray(r) / lam) / lam),
            fourier=None if f is None else (lambda k: lam**d * f(lam * np.asarray(k))),
            support=(self.support[0] * lam, self.support[1] * lam), feature=self.feature * lam,
            knots=tuple(c * lam for c in self.knots),
        )

    def check_lipschitz(self, n: int = 4001) -> float:
        """Finite-difference Lipschitz constant on the support (raises if not finite)."""
        lo, hi = self.support
        if hi <= lo:
            return 0.0
        hi = hi if math.isfinite(hi) else lo + 50 * self.feature
        r = np.linspace(lo, hi, n)
        vals = self.radial(r)
        lip = float(np.max(np.abs(np.diff(vals)) / np.diff(r)))
        if not math.isfinite(lip) or lip > 1e6 / self.feature:
            raise PreconditionError(f"{self.tag} does not look Lipschitz (slope {lip:.3e})")
        return lip


def check_square_integrable(u: TestFunction) -> None:
    """Reject test functions whose tail u(r)^2 r^d does not decay (e.g. nonzero constants)."""
    if math.isfinite(u.support[1]) or u.support[1] <= u.support[0]:
        return
    r = u.feature * np.array([1e2, 1e4, 1e6])
    tail = u.radial(r) ** 2 * r ** u.d
    if not np.all(np.isfinite(tail)) or (tail[0] > 0 and tail[2] >= tail[0]):
        raise PreconditionError(f"{u.tag} does not look square integrable")


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 1e-300, 1 - 1e-16)
    with np.errstate(over="ignore", divide="ignore"):
        a = np.exp(-1.0 / xc)
        b = np.exp(-1.0 / (1.0 - xc))
        s = a / (a + b)
    return np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, s))


def _smooth_step_prime(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xc = np.where(inside, x, 0.5)
    # S' = ab (1/x^2 + 1/(1-x)^2) / (a+b)^2, evaluated through logs
    la, lb = -1.0 / xc, -1.0 / (1.0 - xc)
    m = np.maximum(la, lb)
    log_ratio = la + lb - 2 * (m + np.log(np.exp(la - m) + np.exp(lb - m)))
    val = np.exp(log_ratio) * (1 / xc**2 + 1 / (1 - xc) ** 2)
    return np.where(inside, val, 0.0)


def gaussian_bump(d: int, sigma: float = 1.0) -> TestFunction:
    """exp(-|x|^2 / 2 sigma^2)."""
    s2 = sigma * sigma
    return TestFunction(
        profile=lambda r: np.exp(-np.asarray(r) ** 2 / (2 * s2)),
        derivative=lambda r: -np.asarray(r) / s2 * np.exp(-np.asarray(r) ** 2 / (2 * s2)),
        fourier=lambda k: (2 * math.pi) ** (-d) * (2 * math.pi * s2) ** (d / 2) * np.exp(-s2 * np.asarray(k) ** 2 / 2),
        d=d, tag=f"gaussian_bump(sigma={sigma:g})", family="gaussian_bump",
        support=(0.0, math.inf), feature=sigma, knots=(sigma, 4 * sigma),
    )


def smoothed_power(d: int, exponent: float, eps: float = 0.1, R: float = 10.0, width: float = math.log(2.0)) -> TestFunction:
    """|x|^{-exponent} times a smooth cutoff equal to 1 on [eps, R].

    The cutoff ramps up on [eps e^{-width}, eps] and down on [R, R e^{width}],
    smoothly in log |x|.
    """
    lo, hi = eps * math.exp(-width), R * math.exp(width)
    le, lr = math.log(eps), math.log(R)

    def chi(r):
        lr_ = np.log(np.maximum(r, 1e-300))
        return _smooth_step((lr_ - le + width) / width) * _smooth_step((lr + width - lr_) / width)

    def chi_prime(r):
        lr_ = np.log(np.maximum(r, 1e-300))
        a, b = (lr_ - le + width) / width, (lr + width - lr_) / width
        return (_smooth_step_prime(a) * _smooth_step(b) - _smooth_step(a) * _smooth_step_prime(b)) / (width * r)

    def prof(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((r > lo) & (r < hi), np.maximum(r, 1e-300) ** (-exponent) * chi(r), 0.0)

    def deriv(r):
        r = np.asarray(r, dtype=float)
        rr = np.maximum(r, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = -exponent * rr ** (-exponent - 1) * chi(rr) + rr ** (-exponent) * chi_prime(rr)
        return np.where((r > lo) & (r < hi), val, 0.0)

    return TestFunction(
        profile=prof, derivative=deriv, d=d,
        tag=f"smoothed_power(p={exponent:g},eps={eps:g},R={R:g},w={width:.3g})", family="smoothed_power",
        support=(lo, hi), feature=eps * width * math.exp(-width), knots=(eps, R),
    )


def hat(d: int, radius: float = 1.0) -> TestFunction:
    """max(0, 1 - |x|/radius)."""
    def fourier(k):
        k = np.asarray(k, dtype=float)
        kr = k * radius
        small = kr < 1e-4
        safe = np.where(small, 1.0, kr)
        val = np.where(small, radius * (1 - kr**2 / 12), 2 * (1 - np.cos(safe)) / (safe**2) * radius)
        return val / (2 * math.pi)

    return TestFunction(
        profile=lambda r: np.maximum(0.0, 1.0 - np.asarray(r) / radius),
        derivative=lambda r: np.where(np.asarray(r) < radius, -1.0 / radius, 0.0),
        fourier=fourier if d == 1 else None,
        d=d, tag=f"hat(radius={radius:g})", family="hat",
        support=(0.0, radius), feature=radius, knots=(radius,),
    )


def annular_bump(d: int, a: float = 0.5, b: float = 2.0) -> TestFunction:
    """exp(4 - (b-a)^2 / ((|x|-a)(b-|x|))) on a < |x| < b, zero elsewhere (peak value 1)."""
    w2 = (b - a) ** 2

    def g(r):
        return (r - a) * (b - r)

    def prof(r):
        r = np.asarray(r, dtype=float)
        inside = (r > a) & (r < b)
        gg = np.where(inside, g(r), 1.0)
        return np.where(inside, np.exp(4 - w2 / gg), 0.0)

    def deriv(r):
        r = np.asarray(r, dtype=float)
        inside = (r > a) & (r < b)
        gg = np.where(inside, g(r), 1.0)
        return np.where(inside, np.exp(4 - w2 / gg) * w2 * (a + b - 2 * r) / gg**2, 0.0)

    return TestFunction(
        profile=prof, derivative=deriv, d=d, tag=f"annular_bump({a:g},{b:g})", family="annular_bump",
        support=(a, b), feature=(b - a) / 8, knots=((a + b) / 2,),
    )


def zero_function(d: int) -> TestFunction:
    return TestFunction(
        profile=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        derivative=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        fourier=lambda k: np.zeros_like(np.asarray(k, dtype=float)),
        d=d, tag="zero", family="custom", support=(0.0, 0.0), feature=1.0,
    )


def standard_battery(d: int, alpha: float) -> list[TestFunction]:
    """Three Gaussian bumps, two smoothed annular powers |x|^{-(d-alpha)/2} on [0.1, 10], one hat."""
    p = (d - alpha) / 2
    return [
        gaussian_bump(d, 0.5),
        gaussian_bump(d, 1.0),
        gaussian_bump(d, 2.0),
        smoothed_power(d, p, 0.1, 10.0, math.log(2.0)),
        smoothed_power(d, p, 0.1, 10.0, math.log(4.0)),
        hat(d, 1.0),
    ]


# ---------------------------------------------------------------------------
# Radial double integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpKernel:
    """Radial jump intensity nu(|x - y|), with T(w) = int_w^inf nu(v) v dv when known."""

    d: int
    density: Callable[[np.ndarray], np.ndarray]
    tail: Callable[[np.ndarray], np.ndarray] | None = None
    tag: str = "custom"
    alpha: float | None = None

    @classmethod
    def stable(cls, d: int, alpha: float) -> "JumpKernel":
        A = levy_normalizer(d, alpha)
        tail = None
        if d >= 2 and d + alpha > 2:
            tail = lambda w: A * np.asarray(w, dtype=float) ** (2 - d - alpha) / (d + alpha - 2)
        def density(r):
            with np.errstate(divide="ignore"):
                return A * np.asarray(r, dtype=float) ** (-d - alpha)

        return cls(d, density, tail,
                   f"stable_jump(alpha={alpha:g},d={d})", alpha)

    def tail_moment(self, w) -> np.ndarray:
        if self.tail is not None:
            return self.tail(w)
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return np.array([integrate_halfline(lambda v: self.density(v) * v, wi).value for wi in w.ravel()]).reshape(w.shape)


def _pair_weight(d: int, density, tail):
    # N(rho, rho + z) as a function of (rho, z), so the gap z is never lost to rounding
    if d == 1:
        return lambda r, z: 2.0 * (density(z) + density(2 * r + z))
    if d == 3:
        return lambda r, z: 8.0 * math.pi**2 * r * (r + z) * (tail(z) - tail(2 * r + z))
    raise UnsupportedDimension(f"radial double integrals are implemented for d = 1 and d = 3, not d = {d}")


def _double_radial(G, N, support, knots, cfg: QuadratureConfig, z_splits: Sequence[float] = ()) -> IntegralResult:
    """int int_{rho, rho' > 0} G N = 2 int_0^inf dz int_0^inf G(rho, rho+z) N(rho, z) drho.

    G must vanish when neither rho nor rho' lies in ``support``.
    """
    a, b = support
    if b <= a:
        return IntegralResult(0.0, 0.0, True, 0)
    # differences u(rho) - u(rho + z) lose digits as z -> 0, so the inner rule
    # returns its best estimate instead of raising
    inner_cfg = QuadratureConfig(cfg.rel_tol * 1e-2, cfg.abs_tol * 1e-2, 400)
    evals = [0]

    def inner(z: float) -> float:
        lo = max(0.0, a - z)
        splits = sorted({c for c in knots if lo < c < b} | {c - z for c in knots if lo < c - z < b}
                        | ({a} if lo < a < b else set()))
        def f(r):
            g = G(r, r + z)
            with np.errstate(over="ignore", invalid="ignore"):
                return np.where(g == 0, 0.0, g * N(r, z))
        if math.isfinite(b):
            res = integrate_interval(f, lo, b, inner_cfg.with_splits(splits), raise_on_failure=False)
        else:
            res = integrate_halfline(f, lo, inner_cfg.with_splits(splits), raise_on_failure=False)
        evals[0] += res.evaluations
        return res.value

    def outer(zs):
        return np.array([inner(float(z)) for z in zs])

    scale_pts = [p for p in (*z_splits, *knots, *(k - a for k in knots), b - a, b) if 0 < p < math.inf]
    res = integrate_improper(outer, cfg.with_splits(sorted(set(scale_pts))))
    return IntegralResult(2.0 * res.value, 2.0 * res.error_estimate, res.converged, res.evaluations + evals[0])


def _diff_sq(u: TestFunction):
    return lambda r, s: (u.radial(r) - u.radial(s)) ** 2


def _default_cfg(cfg: QuadratureConfig | None) -> QuadratureConfig:
    return cfg or QuadratureConfig(rel_tol=1e-7, abs_tol=1e-13, max_subdivisions=4000)


def _kernel_length(k: TransitionKernel, t: float) -> float:
    if isinstance(k, StableKernel):
        return t ** (1.0 / k.alpha)
    if isinstance(k, GaussianKernel):
        return math.sqrt(t)
    return 1.0


def _kernel_defect(k: TransitionKernel, t: float) -> float:
    if isinstance(k, GaussianKernel):
        return -math.expm1(-k.kappa * t)
    if isinstance(k, (StableKernel, LevyKernel)):
        return 0.0
    return 1.0 - k.mass(t)


def weighted_l2(u: TestFunction, q: Callable[[np.ndarray], np.ndarray], cfg: QuadratureConfig | None = None) -> float:
    """int u(x)^2 q(x) dx for radial q."""
    cfg = _default_cfg(cfg)
    a, b = u.support
    if b <= a:
        return 0.0
    f = lambda r: u.radial(r) ** 2 * q(r) * r ** (u.d - 1)
    omega = sphere_area(u.d)
    if math.isfinite(b):
        return omega * integrate_interval(f, a, b, cfg.with_splits(u.splits)).value
    return omega * integrate_halfline(f, a, cfg.with_splits(u.splits)).value


def form_Et(k: TransitionKernel, u: TestFunction, t: float, cfg: QuadratureConfig | None = None) -> float:
    """E^(t)(u, u) = (1/t) <u - p_t u, u>.

    Evaluated as (1/2t) int int (u(x) - u(y))^2 p_t(x, y) + (1/t) int u^2 (1 - int p_t(x, .)).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    check_square_integrable(u)
    cfg = _default_cfg(cfg)
    N = _pair_weight(k.d, lambda v: k.radial(t, v) / t, lambda w: k.tail_moment(t, w) / t)
    val = 0.5 * _double_radial(_diff_sq(u), N, u.support, u.splits, cfg, [_kernel_length(k, t)]).value
    defect = _kernel_defect(k, t)
    if defect:
        val += defect / t * weighted_l2(u, lambda r: np.ones_like(r), cfg)
    return val


@dataclass(frozen=True)
class FormLimit:
    value: float
    theta: float
    t_values: tuple[float, ...]
    e_values: tuple[float, ...]
    monotone: bool


def _extrapolate(ts: Sequence[float], es: Sequence[float], ratio: float) -> tuple[float, float]:
    e1, e2, e3 = es[-3:]
    d1, d2 = e2 - e1, e3 - e2
    if d2 == 0.0 and d1 == 0.0:
        return e3, math.nan
    if d1 <= 0 or d2 <= 0 or d2 >= d1:
        # differences not shrinking geometrically: no convergent power law
        return math.inf, 0.0
    q = d1 / d2
    theta = math.log(q) / math.log(ratio)
    return e3 + d2 / (q - 1.0), theta


def form_limit(k: TransitionKernel, u: TestFunction, cfg: QuadratureConfig | None = None,
               t0: float | None = None, n_steps: int = 6, ratio: float = 2.0,
               monotone_tol: float = 1e-6) -> FormLimit:
    """E(u, u) = lim_{t -> 0} E^(t)(u, u) by extrapolating E + a t^theta from the last three values.

    The t-sequence is t0, t0/ratio, ...; values must be nondecreasing as t
    decreases up to ``monotone_tol`` relative, otherwise NoLimitDetected.
    """
    if n_steps < 3:
        raise ValueError("need at least three t values")
    if t0 is None:
        length = 0.25 * u.feature
        t0 = length ** (k.alpha if isinstance(k, StableKernel) else 2.0)
    ts = [t0 / ratio**j for j in range(n_steps)]
    es = [form_Et(k, u, t, cfg) for t in ts]
    scale = max(abs(e) for e in es) or 1.0
    monotone = all(b >= a - monotone_tol * scale for a, b in zip(es, es[1:]))
    if not monotone:
        raise NoLimitDetected(f"E^(t) is not monotone along t = {ts}: {es}")
    value, theta = _extrapolate(ts, es, ratio)
    return FormLimit(value, theta, tuple(ts), tuple(es), monotone)


def jump_form(nu: JumpKernel, u: TestFunction, cfg: QuadratureConfig | None = None) -> float:
    """(1/2) int int (u(x) - u(y))^2 nu(x, y) dx dy."""
    if nu.d != u.d:
        raise ValueError("dimension mismatch")
    check_square_integrable(u)
    u.check_lipschitz()
    cfg = _default_cfg(cfg)
    N = _pair_weight(nu.d, nu.density, nu.tail_moment)
    return 0.5 * _double_radial(_diff_sq(u), N, u.support, u.splits, cfg).value


def _fourier_profile_fft(u: TestFunction, pad: int = 8, points_per_feature: int = 24):
    """(k, u^(k)) on a uniform k-grid from the trapezoid rule, via DST (d = 3) or DCT (d = 1)."""
    lo, hi = u.support
    hi = hi if math.isfinite(hi) else 40 * u.feature
    h = u.feature / points_per_feature
    n = int(math.ceil(hi / h))
    n_tot = int(2 ** math.ceil(math.log2(pad * n)))
    r = h * np.arange(n_tot + 1)
    vals = u.radial(r)
    vals[r > hi] = 0.0
    k = math.pi * np.arange(n_tot + 1) / (n_tot * h)
    if u.d == 1:
        # int_0^inf u cos(kr) dr with trapezoid weights; DCT-I has the half end weights built in
        c = 0.5 * h * sfft.dct(vals, type=1)
        return k, c * 2 / (2 * math.pi)
    if u.d == 3:
        v = r * vals
        s = h * sfft.dst(v[1:-1], type=1) / 2.0
        kk = k[1:-1]
        return kk, (4 * math.pi / kk) * s / (2 * math.pi) ** 3
    raise UnsupportedDimension(f"numerical Fourier transform implemented for d = 1, 3, not {u.d}")


def fourier_form(psi, u: TestFunction, cfg: QuadratureConfig | None = None) -> float:
    """(2 pi)^d int |u^(xi)|^2 psi(xi) d xi.

    Uses the closed-form transform when the test function carries one
    (adaptive quadrature in |xi|), otherwise a trapezoid/FFT transform on a
    uniform radial grid and the trapezoid rule in |xi|.
    """
    cfg = _default_cfg(cfg)
    psi_f = psi if callable(psi) else psi.psi
    d = u.d
    pref = (2 * math.pi) ** d * sphere_area(d)
    if u.support[1] <= u.support[0]:
        return 0.0
    check_square_integrable(u)
    if u.fourier is not None:
        f = lambda k: np.abs(u.fourier(k)) ** 2 * psi_f(k) * k ** (d - 1)
        return pref * integrate_improper(f, cfg.with_splits([1.0 / u.feature])).value
    k, uh = _fourier_profile_fft(u)
    integrand = np.abs(uh) ** 2 * psi_f(k) * k ** (d - 1)
    return pref * float(np.trapezoid(integrand, k))


def dirichlet_form(u: TestFunction, cfg: QuadratureConfig | None = None) -> float:
    """int |grad u|^2 dx."""
    if u.derivative is None:
        raise MissingGradient(f"test function {u.tag} has no gradient")
    check_square_integrable(u)
    return weighted_l2(replace(u, profile=u.derivative), lambda r: np.ones_like(r), cfg)


def _ratio_sq(u: TestFunction, h: Callable[[np.ndarray], np.ndarray]):
    def G(r, s):
        hr, hs = h(r), h(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            vr = np.where(u.radial(r) == 0, 0.0, u.radial(r) / hr)
            vs = np.where(u.radial(s) == 0, 0.0, u.radial(s) / hs)
            out = (vr - vs) ** 2 * hr * hs
        return np.where(np.isfinite(out), out, 0.0)
    return G


def remainder_term(k: TransitionKernel, h: Callable[[np.ndarray], np.ndarray], u: TestFunction, t: float,
                   cfg: QuadratureConfig | None = None) -> float:
    """J_t = int int (p_t(x,y) / 2t) (u(x)/h(x) - u(y)/h(y))^2 h(x) h(y) dx dy for radial h."""
    cfg = _default_cfg(cfg)
    N = _pair_weight(k.d, lambda v: k.radial(t, v) / t, lambda w: k.tail_moment(t, w) / t)
    return 0.5 * _double_radial(_ratio_sq(u, h), N, u.support, u.splits, cfg, [_kernel_length(k, t)]).value


def remainder_jump(nu: JumpKernel, h: Callable[[np.ndarray], np.ndarray], u: TestFunction,
                   cfg: QuadratureConfig | None = None) -> float:
    """(1/2) int int (u(x)/h(x) - u(y)/h(y))^2 h(x) h(y) nu(x, y) dx dy, the t -> 0 limit of J_t."""
    cfg = _default_cfg(cfg)
    N = _pair_weight(nu.d, nu.density, nu.tail_moment)
    return 0.5 * _double_radial(_ratio_sq(u, h), N, u.support, u.splits, cfg).value


def remainder_limit(k: TransitionKernel, h, u: TestFunction, cfg: QuadratureConfig | None = None,
                    t0: float | None = None, n_steps: int = 5, ratio: float = 2.0) -> FormLimit:
    """Extrapolated limit of J_t along t0, t0/ratio, ...; monotonicity is reported, not enforced."""
    if t0 is None:
        length = 0.25 * u.feature
        t0 = length ** (k.alpha if isinstance(k, StableKernel) else 2.0)
    ts = [t0 / ratio**j for j in range(n_steps)]
    js = [remainder_term(k, h, u, t, cfg) for t in ts]
    monotone = all(b >= a for a, b in zip(js, js[1:]))
    value, theta = _extrapolate(ts, js, ratio)
    return FormLimit(value, theta, tuple(ts), tuple(js), monotone)


def gradient_remainder(u: TestFunction, log_h_prime: Callable[[np.ndarray], np.ndarray],
                       cfg: QuadratureConfig | None = None) -> float:
    """int |h grad(u/h)|^2 dx = int (u' - u h'/h)^2 dx for radial h, given h'/h."""
    if u.derivative is None:
        raise MissingGradient(f"test function {u.tag} has no gradient")
    g = lambda r: u.gradient_radial(r) - u.radial(r) * log_h_prime(r)
    return weighted_l2(replace(u, profile=g), lambda r: np.ones_like(r), cfg)


# ---------------------------------------------------------------------------
# Hardy reports
# ---------------------------------------------------------------------------


def _r12(x: float) -> float | str:
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class HardyReport:
    kernel: str
    beta: float
    u_tag: str
    lhs: float
    weighted: float
    remainder: float
    residual: float
    methods: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: {"equality_rel": 0.02, "inequality_rel": 0.02})
    mode: str = "equality"

    @property
    def inequality_margin(self) -> float:
        return self.lhs - self.weighted

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / abs(self.lhs) if self.lhs else abs(self.residual)

    @property
    def inequality_pass(self) -> bool:
        return self.inequality_margin >= -self.tolerances["inequality_rel"] * abs(self.lhs)

    @property
    def equality_pass(self) -> bool:
        return self.relative_residual <= self.tolerances["equality_rel"]

    @property
    def passed(self) -> bool:
        if self.mode == "inequality":
            return self.inequality_pass
        return self.inequality_pass and self.equality_pass

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "beta": _r12(float(self.beta)),
            "u_tag": self.u_tag,
            "lhs": _r12(self.lhs),
            "weighted": _r12(self.weighted),
            "remainder": _r12(self.remainder),
            "residual": _r12(self.residual),
            "margins": {"inequality": _r12(self.inequality_margin), "relative_residual": _r12(self.relative_residual)},
            "methods": dict(sorted(self.methods.items())),
            "mode": self.mode,
            "tolerances": dict(sorted(self.tolerances.items())),
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_support(pair: SupermedianPair, u: TestFunction) -> None:
    lo, hi = u.support
    if hi <= lo:
        return
    hi = hi if math.isfinite(hi) else lo + 20 * u.feature
    r = np.linspace(lo, hi, 33)[1:-1]
    r = r[u.radial(r) != 0]
    if len(r) == 0:
        return
    h = np.asarray(pair.h_radial(r), dtype=float)
    if np.any(h == 0) or np.any(~np.isfinite(h)):
        raise PreconditionError(f"{u.tag} does not vanish where h is 0 or infinite")


def _log_h_prime(pair: SupermedianPair) -> Callable | None:
    if pair.mode != "closed_form" or pair.kernel is None:
        return None
    if isinstance(pair.kernel, GaussianKernel) and pair.kernel.kappa == 0:
        e = 2 * pair.beta - pair.kernel.d + 2
        return lambda r: e / np.asarray(r, dtype=float)
    return None


def hardy_verify(k: TransitionKernel, pair: SupermedianPair, u: TestFunction, cfg: QuadratureConfig | None = None,
                 mode: str = "equality", lhs_route: str = "auto") -> HardyReport:
    """E(u,u) against int u^2 q and the remainder, for a radial pair (mu = delta_0).

    lhs routes: ``jump`` (stable), ``dirichlet`` (Gaussian), ``fourier``
    (Levy symbol) or ``limit`` (extrapolated E^(t)).  The remainder is the
    jump-kernel limit for stable kernels, the gradient form for Gaussian
    closed-form pairs and the extrapolated J_t otherwise.
    """
    if pair.h_radial is None:
        raise ValueError("hardy_verify needs a radial pair")
    if mode not in ("equality", "inequality"):
        raise ValueError("mode must be 'equality' or 'inequality'")
    _check_support(pair, u)
    cfg = _default_cfg(cfg)
    methods = {}
    if lhs_route == "auto":
        if isinstance(k, StableKernel):
            lhs_route = "jump"
        elif isinstance(k, GaussianKernel) and k.kappa == 0:
            lhs_route = "dirichlet"
        elif isinstance(k, LevyKernel):
            lhs_route = "fourier"
        else:
            lhs_route = "limit"
    nu = JumpKernel.stable(k.d, k.alpha) if isinstance(k, StableKernel) else None
    if lhs_route == "jump":
        lhs = jump_form(nu, u, cfg)
    elif lhs_route == "dirichlet":
        lhs = dirichlet_form(u, cfg)
    elif lhs_route == "fourier":
        lhs = fourier_form(k.symbol, u, cfg)
    elif lhs_route == "limit":
        lhs = form_limit(k, u, cfg).value
    else:
        raise ValueError(f"unknown lhs route {lhs_route!r}")
    methods["lhs"] = lhs_route
    weighted = weighted_l2(u, pair.q_radial, cfg)
    methods["weighted"] = f"radial_quadrature({pair.mode})"
    remainder = math.nan
    if mode == "equality":
        lhp = _log_h_prime(pair)
        if nu is not None:
            remainder = remainder_jump(nu, pair.h_radial, u, cfg)
            methods["remainder"] = "jump_limit"
        elif lhp is not None:
            remainder = gradient_remainder(u, lhp, cfg)
            methods["remainder"] = "gradient"
        else:
            remainder = remainder_limit(k, pair.h_radial, u, cfg).value
            methods["remainder"] = "extrapolated_J_t"
    residual = lhs - weighted - (remainder if mode == "equality" else 0.0)
    return HardyReport(k.kernel_id, pair.beta, u.tag, lhs, weighted, remainder, residual, methods, mode=mode)


def comparable_kernel_bound(c: float, report: HardyReport) -> HardyReport:
    """Report with the weighted term scaled by c^{-2}; only the inequality is claimed afterwards."""
    if not c >= 1:
        raise ValueError("comparability constant must be >= 1")
    w = report.weighted / c**2
    methods = dict(report.methods, comparability=f"c={c:g}")
    return replace(report, weighted=w, residual=report.lhs - w, methods=methods, mode="inequality")


def tabulated_weight(q: Callable[[np.ndarray], np.ndarray], r_grid: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """Cubic interpolation of log q against log r from values on ``r_grid``; linear log-log extrapolation."""
    from scipy.interpolate import CubicSpline

    r_grid = np.asarray(sorted(r_grid), dtype=float)
    vals = np.asarray(q(r_grid), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise ValueError("tabulated weight needs positive finite values")
    spline = CubicSpline(np.log(r_grid), np.log(vals), extrapolate=False)
    lr0, lr1 = math.log(r_grid[0]), math.log(r_grid[-1])
    s0 = float(spline(lr0, 1))
    s1 = float(spline(lr1, 1))

    def weight(r):
        r = np.asarray(r, dtype=float)
        lr = np.log(np.maximum(r, 1e-300))
        inside = spline(np.clip(lr, lr0, lr1))
        out = np.where(lr < lr0, np.log(vals[0]) + s0 * (lr - lr0),
                       np.where(lr > lr1, np.log(vals[-1]) + s1 * (lr - lr1), inside))
        return np.exp(out)

    return weight
