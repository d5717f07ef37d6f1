"""Weak scaling conditions, generalized inverses and weight envelopes.

A function phi satisfies the weak lower scaling condition WLSC(a, c) if
phi(lam theta) >= c lam^a phi(theta) for lam >= 1, theta > 0, and the weak
upper scaling condition WUSC(a, c) if phi(lam theta) <= c lam^a phi(theta).
Both are verified on sample grids, never proved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .special import DomainError

__all__ = [
    "BracketFailure",
    "ProfileError",
    "ScalingSample",
    "ScalingReport",
    "ScalingProfile",
    "EnvelopeEstimate",
    "MetricWeight",
    "DEFAULT_LAMBDAS",
    "check_wlsc",
    "check_wusc",
    "minimal_wusc_constant",
    "minimal_wlsc_constant",
    "estimate_indices",
    "generalized_inverse",
    "biconditional_counterexamples",
    "envelope_h",
    "envelope_k",
    "hardy_weight_metric",
    "local_scaling_weight",
]

DEFAULT_LAMBDAS = (1.0, 1.5, 2.0, 5.0, 10.0, 100.0)
SLACK = 1e-12


class BracketFailure(ArithmeticError):
    """No s with phi(s) > u was found; phi does not appear to tend to infinity."""


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingSample:
    """Grid of (lam, theta): lam from ``lambdas``, theta log-spaced over [theta_min, theta_max]."""

    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    theta_min: float = 1e-3
    theta_max: float = 1e3
    n_theta: int = 61

    def __post_init__(self):
        if any(l < 1 for l in self.lambdas):
            raise ValueError("scaling factors must be >= 1")
        if not 0 < self.theta_min < self.theta_max:
            raise ValueError("need 0 < theta_min < theta_max")

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        lam = np.asarray(self.lambdas, dtype=float)
        theta = np.geomspace(self.theta_min, self.theta_max, self.n_theta)
        L, T = np.meshgrid(lam, theta, indexing="ij")
        return L.ravel(), T.ravel()


@dataclass(frozen=True)
class ScalingReport:
    function_tag: str
    condition: str
    claimed_indices: tuple[float, float]
    worst_ratio: float
    worst_point: tuple[float, float]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "function_tag": self.function_tag,
            "condition": self.condition,
            "claimed_indices": [float(self.claimed_indices[0]), float(self.claimed_indices[1])],
            "worst_ratio": float(f"{self.worst_ratio:.12g}"),
            "worst_point": [float(self.worst_point[0]), float(self.worst_point[1])],
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _values(f, x) -> np.ndarray:
    return np.asarray(f(np.asarray(x, dtype=float)), dtype=float) * np.ones_like(x, dtype=float)


def check_wlsc(f: Callable, alpha_low: float, c_low: float, sample: ScalingSample | None = None,
               tag: str = "f") -> ScalingReport:
    """Worst value of f(lam theta) / (c lam^a f(theta)) over the grid; passes iff >= 1 up to 1e-12."""
    sample = sample or ScalingSample()
    L, T = sample.grid()
    ratio = _values(f, L * T) / (c_low * L**alpha_low * _values(f, T))
    i = int(np.argmin(ratio))
    w = float(ratio[i])
    return ScalingReport(tag, "WLSC", (alpha_low, c_low), w, (float(L[i]), float(T[i])), w >= 1.0 - SLACK)


def check_wusc(f: Callable, alpha_up: float, c_up: float, sample: ScalingSample | None = None,
               tag: str = "f") -> ScalingReport:
    """Worst value of c lam^a f(theta) / f(lam theta) over the grid; passes iff >= 1 up to 1e-12."""
    sample = sample or ScalingSample()
    L, T = sample.grid()
    ratio = c_up * L**alpha_up * _values(f, T) / _values(f, L * T)
    i = int(np.argmin(ratio))
    w = float(ratio[i])
    return ScalingReport(tag, "WUSC", (alpha_up, c_up), w, (float(L[i]), float(T[i])), w >= 1.0 - SLACK)


def minimal_wusc_constant(f: Callable, alpha_up: float, sample: ScalingSample | None = None) -> float:
    """Smallest c >= 1 for which f passes check_wusc with exponent alpha_up on the grid."""
    sample = sample or ScalingSample()
    L, T = sample.grid()
    return max(1.0, float(np.max(_values(f, L * T) / (L**alpha_up * _values(f, T)))))


def minimal_wlsc_constant(f: Callable, alpha_low: float, sample: ScalingSample | None = None) -> float:
    """Largest c <= 1 for which f passes check_wlsc with exponent alpha_low on the grid."""
    sample = sample or ScalingSample()
    L, T = sample.grid()
    return min(1.0, float(np.min(_values(f, L * T) / (L**alpha_low * _values(f, T)))))


def estimate_indices(f: Callable, sample: ScalingSample | None = None) -> dict:
    """Heuristic: local log-log slopes of f over the theta range.

    Returns the least and largest slope and a least-squares slope with a
    two-standard-error band.  Only the check functions decide acceptance.
    """
    sample = sample or ScalingSample()
    theta = np.geomspace(sample.theta_min, sample.theta_max, sample.n_theta)
    lf = np.log(_values(f, theta))
    lt = np.log(theta)
    slopes = np.diff(lf) / np.diff(lt)
    A = np.vstack([lt, np.ones_like(lt)]).T
    coef, res, *_ = np.linalg.lstsq(A, lf, rcond=None)
    dof = max(len(lt) - 2, 1)
    sigma2 = float(res[0]) / dof if len(res) else 0.0
    se = math.sqrt(sigma2 / float(np.sum((lt - lt.mean()) ** 2)))
    return {
        "heuristic": True,
        "min_local_slope": float(slopes.min()),
        "max_local_slope": float(slopes.max()),
        "fit_slope": float(coef[0]),
        "fit_band": [float(coef[0] - 2 * se), float(coef[0] + 2 * se)],
    }


def generalized_inverse(phi: Callable, u, max_doublings: int = 2000) -> np.ndarray | float:
    """phi^{-1}(u) = inf{s > 0 : phi(s) > u}, for nondecreasing phi; vectorized over u.

    A bracket lo < hi with phi(lo) <= u < phi(hi) is grown geometrically,
    then bisected until lo and hi are adjacent floats; the result is hi,
    the smallest float found in the set.  u = 0 gives 0 because phi > 0 on
    (0, inf).
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise DomainError("generalized_inverse needs u >= 0")
    f = lambda s: _values(phi, s)
    hi = np.ones_like(u)
    for _ in range(max_doublings):
        todo = ~(f(hi) > u)
        if not todo.any():
            break
        with np.errstate(over="ignore"):
            hi = np.where(todo, hi * 2.0, hi)
        if np.any(~np.isfinite(hi)):
            raise BracketFailure("phi stays below the level up to overflow")
    else:
        raise BracketFailure(f"no s with phi(s) > u after {max_doublings} doublings")
    lo = hi / 2.0
    for _ in range(max_doublings):
        todo = (f(lo) > u) & (lo > 0)
        if not todo.any():
            break
        lo = np.where(todo, lo / 2.0, lo)
    lo = np.where(f(lo) > u, 0.0, lo)
    for _ in range(4000):
        mid = np.where(lo > 0, np.sqrt(lo * hi), hi / 2.0)
        # switch to arithmetic midpoints once the bracket is narrow in relative terms
        narrow = (hi - lo) <= 1e-3 * hi
        mid = np.where(narrow, lo + 0.5 * (hi - lo), mid)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        above = f(mid) > u
        hi = np.where(active & above, mid, hi)
        lo = np.where(active & ~above, mid, lo)
    hi = np.where(u == 0, 0.0, hi)
    return float(hi[0]) if scalar else hi


def biconditional_counterexamples(phi: Callable, t, r) -> int:
    """Number of pairs where (t >= phi(r)) differs from (phi^{-1}(t) >= r)."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    left = t >= _values(phi, r)
    right = generalized_inverse(phi, t) >= r
    return int(np.sum(left != right))


@dataclass(frozen=True)
class ScalingProfile:
    """Time-scale function phi and volume function V with declared scaling indices.

    ``phi_wlsc``/``phi_wusc`` are (index, constant) pairs for phi and
    ``volume_wlsc`` is (A, C) for V.  Construction checks monotonicity,
    positivity and the declared conditions on ``sample``.
    """

    phi: Callable
    V: Callable
    tag: str
    phi_wusc: tuple[float, float]
    volume_wlsc: tuple[float, float]
    phi_wlsc: tuple[float, float] | None = None
    sample: ScalingSample = field(default_factory=ScalingSample)
    validate: bool = True

    def __post_init__(self):
        if not self.validate:
            return
        s = np.geomspace(self.sample.theta_min * 1e-2, self.sample.theta_max * 1e2, 801)
        for name, g in (("phi", self.phi), ("V", self.V)):
            vals = _values(g, s)
            if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
                raise ProfileError(f"{name} must be positive and finite on (0, inf)")
            if np.any(np.diff(vals) < 0):
                raise ProfileError(f"{name} is not nondecreasing")
            if float(_values(g, np.array([0.0]))[0]) != 0.0:
                raise ProfileError(f"{name}(0) must be 0")
        for rep in self.reports():
            if not rep.passed:
                raise ProfileError(f"declared {rep.condition}{rep.claimed_indices} fails for {rep.function_tag} "
                                   f"(worst ratio {rep.worst_ratio:.6g})")

    def reports(self) -> list[ScalingReport]:
        out = [check_wusc(self.phi, *self.phi_wusc, self.sample, f"phi:{self.tag}"),
               check_wlsc(self.V, *self.volume_wlsc, self.sample, f"V:{self.tag}")]
        if self.phi_wlsc is not None:
            out.insert(0, check_wlsc(self.phi, *self.phi_wlsc, self.sample, f"phi:{self.tag}"))
        return out

    @property
    def beta_upper(self) -> float:
        """A / alpha_up - 1, the supremum of admissible beta."""
        return self.volume_wlsc[0] / self.phi_wusc[0] - 1.0

    def inverse(self) -> Callable:
        return lambda u: generalized_inverse(self.phi, u)

    def inverse_wlsc(self) -> ScalingReport:
        """phi^{-1} against WLSC(1/alpha_up, c_up^{-1/alpha_up}) on the range of phi over the sample."""
        a, c = self.phi_wusc
        lo, hi = (float(v) for v in _values(self.phi, np.array([self.sample.theta_min, self.sample.theta_max])))
        smp = ScalingSample(self.sample.lambdas, lo, hi, self.sample.n_theta)
        return check_wlsc(self.inverse(), 1.0 / a, c ** (-1.0 / a), smp, f"phi^-1:{self.tag}")

    @classmethod
    def power(cls, alpha: float, d: int) -> "ScalingProfile":
        """phi(r) = r^alpha, V(r) = r^d (the isotropic stable case)."""
        return cls(lambda r: np.asarray(r, dtype=float) ** alpha, lambda r: np.asarray(r, dtype=float) ** d,
                   f"power(alpha={alpha:g},d={d})", (alpha, 1.0), (float(d), 1.0), (alpha, 1.0))

    @classmethod
    def from_symbol(cls, psi: Callable, d: int, wusc: tuple[float, float], wlsc: tuple[float, float] | None = None,
                    tag: str = "symbol", sample: ScalingSample | None = None) -> "ScalingProfile":
        """phi(r) = 1 / psi(1/r), V(r) = r^d, with phi(0) = 0."""
        def phi(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore"):
                inv = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), np.inf)
            val = np.where(r > 0, 1.0 / np.asarray(psi(np.where(r > 0, inv, 1.0)), dtype=float), 0.0)
            return val
        return cls(phi, lambda r: np.asarray(r, dtype=float) ** d, f"{tag},d={d}", wusc, (float(d), 1.0), wlsc,
                   sample or ScalingSample())


@dataclass(frozen=True)
class EnvelopeEstimate:
    """lower * phi(r)^(beta+1) / V(r) <= h <= upper * phi(r)^(beta+1) / V(r)."""

    lower_const: float
    upper_const: float
    beta: float
    exponent: str
    r_range: tuple[float, float]

    def __post_init__(self):
        if not self.lower_const <= self.upper_const:
            raise ValueError("lower envelope constant exceeds the upper one")

    def bracket(self, profile: ScalingProfile, r) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        base = _values(profile.phi, r) ** (self.beta + 1) / _values(profile.V, r)
        return self.lower_const * base, self.upper_const * base


def _envelope_consts(profile: ScalingProfile, beta: float, consts: tuple[float, float]) -> tuple[float, float]:
    c_low, c_up = consts
    a_up, c_bar = profile.phi_wusc
    A, C = profile.volume_wlsc
    ratio = A / a_up
    tail = c_bar**ratio / (C * (ratio - 1.0 - beta))
    return c_low / (beta + 2.0), c_up * (1.0 / (beta + 2.0) + tail)


def envelope_h(profile: ScalingProfile, beta: float, r_grid: Sequence[float] = (1e-2, 1e2),
               kernel_estimate_consts: tuple[float, float] = (1.0, 1.0)) -> EnvelopeEstimate:
    """Constants of h(x) = int_0^inf t^beta p_t(x, y) dt ~ phi(r)^(beta+1) / V(r), r = rho(x, y).

    Given c_low k_t(r) <= p_t <= c_up k_t(r) with
    k_t(r) = min(1 / V(phi^{-1}(t)), t / (V(r) phi(r))), the integral over
    t < phi(r) is exactly phi(r)^(beta+1) / ((beta+2) V(r)) and the integral
    over t > phi(r) is at most c^{A/a} / (C (A/a - 1 - beta)) times the same
    power, with (a, c) the upper scaling of phi and (A, C) the lower scaling of V.
    """
    if not 0.0 <= beta < profile.beta_upper:
        raise DomainError(f"beta must lie in [0, {profile.beta_upper:g}), got {beta}")
    if not 0 < kernel_estimate_consts[0] <= kernel_estimate_consts[1]:
        raise ValueError("kernel estimate constants must satisfy 0 < c_low <= c_up")
    lo, up = _envelope_consts(profile, beta, kernel_estimate_consts)
    r = np.asarray(r_grid, dtype=float)
    return EnvelopeEstimate(lo, up, beta, f"phi^{beta + 1:g}/V", (float(r.min()), float(r.max())))


def envelope_k(profile: ScalingProfile, beta: float, kernel_estimate_consts: tuple[float, float] = (1.0, 1.0)
               ) -> tuple[float, float]:
    """Constants of k(x) = int_0^inf beta t^(beta-1) p_t(x, y) dt ~ phi^beta / V (the h bounds at beta - 1)."""
    if not 0.0 < beta < profile.beta_upper:
        raise DomainError(f"beta must lie in (0, {profile.beta_upper:g}), got {beta}")
    lo, up = _envelope_consts(profile, beta - 1.0, kernel_estimate_consts)
    return beta * lo, beta * up


@dataclass(frozen=True)
class MetricWeight:
    """Bracket [lower, upper] for q(x) at distance r from the center."""

    lower: float
    upper: float
    r: float
    C1: float
    C2: float
    at_center: bool = False

    @property
    def q_convention(self) -> float | None:
        """q is set to 0 at the center, where h is infinite."""
        return 0.0 if self.at_center else None


def hardy_weight_metric(profile: ScalingProfile, beta: float, y, x,
                        kernel_estimate_consts: tuple[float, float] = (1.0, 1.0)) -> MetricWeight:
    """[C1, C2] / phi(rho(x, y)) with C1 = k_lower / h_upper and C2 = k_upper / h_lower."""
    h = envelope_h(profile, beta, kernel_estimate_consts=kernel_estimate_consts)
    k_lo, k_up = envelope_k(profile, beta, kernel_estimate_consts)
    C1, C2 = k_lo / h.upper_const, k_up / h.lower_const
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        return MetricWeight(math.inf, math.inf, 0.0, C1, C2, at_center=True)
    ph = float(_values(profile.phi, np.array([r]))[0])
    return MetricWeight(C1 / ph, C2 / ph, r, C1, C2)


def local_scaling_weight(phi: Callable, x) -> np.ndarray:
    """1 / max(phi(|x|), |x|^2)."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim <= 1 else np.linalg.norm(x, axis=-1)
    with np.errstate(divide="ignore"):
        return 1.0 / np.maximum(_values(phi, r), r * r)
