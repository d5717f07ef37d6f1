"""Gamma-function helpers and the closed-form constants of stable and Gaussian weights.

Every constant is assembled as a sum of log-gamma terms and exponentiated
once, so moderate dimensions do not overflow intermediate ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "DomainError",
    "StableParams",
    "ConstantBundle",
    "lgamma",
    "levy_normalizer",
    "hardy_constant_stable",
    "hardy_constant_stable_max",
    "optimal_beta",
    "hardy_constant_laplacian",
    "stable_h_prefactor",
    "stable_k_prefactor",
    "gaussian_h_prefactor",
    "constant_bundle",
]


class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


def lgamma(s: float) -> float:
    """Natural log of Gamma(s) for s > 0."""
    s = float(s)
    if not s > 0 or not math.isfinite(s):
        raise DomainError(f"lgamma requires a finite s > 0, got {s}")
    return math.lgamma(s)


@dataclass(frozen=True)
class StableParams:
    """Dimension, stability index and time-weight exponent."""

    d: int
    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.beta >= 0.0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def beta_max(self) -> float:
        return self.d / self.alpha - 1.0

    @property
    def h_exponent(self) -> float:
        """Exponent of |x| in the closed-form h."""
        return self.alpha * (self.beta + 1.0) - self.d


@dataclass(frozen=True)
class ConstantBundle:
    A_d_minus_alpha: float
    C_hardy: float
    h_norm: float
    k_norm: float


def levy_normalizer(d: int, alpha: float) -> float:
    """Normalizing constant of the jump kernel A |x-y|^{-d-alpha} of the alpha-stable process."""
    if int(d) != d or d < 1 or not 0.0 < alpha < 2.0:
        raise DomainError(f"levy_normalizer needs d >= 1 and 0 < alpha < 2, got d={d}, alpha={alpha}")
    # |Gamma(-a/2)| = Gamma(1 - a/2) * 2/a
    log_abs = lgamma(1.0 - alpha / 2.0) + math.log(2.0 / alpha)
    return math.exp(alpha * math.log(2.0) + lgamma((d + alpha) / 2.0) - (d / 2.0) * math.log(math.pi) - log_abs)


def _check_hardy(p: StableParams) -> None:
    if not p.alpha < min(p.d, 2):
        raise DomainError(f"Hardy constants need alpha < min(d, 2), got alpha={p.alpha}, d={p.d}")
    if p.beta > p.beta_max * (1 + 1e-14):
        raise DomainError(f"beta={p.beta} exceeds d/alpha - 1 = {p.beta_max}")


def hardy_constant_stable(p: StableParams) -> float:
    """Constant C of the stable Hardy identity with weight C |x|^{-alpha}.

    Zero at beta = 0 and at beta = d/alpha - 1, where a reciprocal Gamma
    factor vanishes.
    """
    _check_hardy(p)
    d, a, b = p.d, p.alpha, p.beta
    if b == 0.0 or math.isclose(b, p.beta_max, rel_tol=1e-14, abs_tol=0.0):
        return 0.0
    log_c = (a * math.log(2.0) + lgamma(d / 2 - a * b / 2) + lgamma(a * (b + 1) / 2)
             - lgamma(d / 2 - a * (b + 1) / 2) - lgamma(a * b / 2))
    return math.exp(log_c)


def optimal_beta(d: int, alpha: float) -> float:
    return (d - alpha) / (2.0 * alpha)


def hardy_constant_stable_max(d: int, alpha: float) -> float:
    """Largest stable Hardy constant, 2^alpha Gamma((d+alpha)/4)^2 / Gamma((d-alpha)/4)^2."""
    _check_hardy(StableParams(d, alpha, 0.0))
    return math.exp(alpha * math.log(2.0) + 2 * lgamma((d + alpha) / 4) - 2 * lgamma((d - alpha) / 4))


def hardy_constant_laplacian(d: int, gamma: float) -> float:
    """gamma (d - 2 - gamma), the weight constant for h = |x|^{gamma - d + 2}."""
    if int(d) != d or d < 3:
        raise DomainError(f"the Laplacian Hardy constant needs d >= 3, got {d}")
    if not 0.0 <= gamma <= d - 2:
        raise DomainError(f"gamma must lie in [0, d-2], got {gamma}")
    return gamma * (d - 2 - gamma)


def stable_h_prefactor(p: StableParams) -> float:
    """h(x) / |x|^{alpha(beta+1)-d} for h = int_0^inf s^beta p_s(x) ds."""
    a, b, d = p.alpha, p.beta, p.d
    e = a * (b + 1) / 2
    if not d / 2 - e > 0:
        raise DomainError(f"h is infinite unless alpha(beta+1) < d (alpha={a}, beta={b}, d={d})")
    return math.exp(lgamma(b + 1) - lgamma(e) + lgamma(d / 2 - e) - e * math.log(4.0) - (d / 2) * math.log(math.pi))


def stable_k_prefactor(p: StableParams) -> float:
    """int_0^inf f'(s) p_s(x) ds / |x|^{alpha beta - d} for f(s) = s^beta; zero at beta = 0."""
    a, b, d = p.alpha, p.beta, p.d
    if b == 0.0:
        return 0.0
    e = a * b / 2
    if not d / 2 - e > 0:
        raise DomainError(f"numerator diverges unless alpha*beta < d (alpha={a}, beta={b}, d={d})")
    return math.exp(lgamma(b + 1) - lgamma(e) - e * math.log(4.0) - (d / 2) * math.log(math.pi) + lgamma(d / 2 - e))


def gaussian_h_prefactor(d: int, gamma: float) -> float:
    """h(x) / |x|^{gamma-d+2} for h = int_0^inf s^{gamma/2} g_s(x) ds; needs gamma < d - 2."""
    if not d - 2 - gamma > 0:
        raise DomainError(f"h is infinite unless gamma < d - 2 (gamma={gamma}, d={d})")
    if gamma < 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    return math.exp(-(gamma / 2 + 1) * math.log(4.0) - (d / 2) * math.log(math.pi) + lgamma(d / 2 - gamma / 2 - 1))


def constant_bundle(p: StableParams) -> ConstantBundle:
    return ConstantBundle(
        A_d_minus_alpha=levy_normalizer(p.d, p.alpha),
        C_hardy=hardy_constant_stable(p),
        h_norm=stable_h_prefactor(p),
        k_norm=stable_k_prefactor(p),
    )
