"""Schrodinger perturbation series on space-time grids.

Terms are stored as cell-mass matrices: ``M[m, i, j]`` approximates the
integral of p^(n)_{t_m}(x_i, y) over the spatial cell j.  The terms of

    p^(n)_t(x, y) = int_0^t int p_s(x, z) q(z) p^(n-1)_{t-s}(z, y) dz ds

are not integrated in s with a fixed step: near a singularity of q the
cells are so small that p_s leaves them long before one time step has
elapsed, and any rule that collapses p_s to a point mass at s = 0 then
overweights q at the node.  Instead the series uses the composition law

    p^(n)_{t+s} = sum_{j=0}^n int p^(j)_t(x, z) p^(n-j)_s(z, y) dz,

exact for the perturbation series of a semigroup.  Terms are seeded at a
short step tau_0 = dt / 2^K with the two-point trapezoid rule
(``M^(1) = tau_0 (P Q + Q P) / 2``, where the rule is accurate because
tau_0 q is small) and doubled K times up to dt.  For t = m dt >= 2 dt the
first insertion time s is split into (0, dt), [dt, t - dt] and (t - dt, t).
The outer pieces equal sum_{j>=1} p^(j)_dt p^(n-j)_{t-dt} and
p_{t-dt} p^(n)_dt exactly; the middle piece, where p_s is smooth in s, uses
the trapezoid rule on the time grid.  Term 0 always uses the exact cell
masses of the kernel.  Every product of cell-mass matrices replaces the
intermediate point by the node of its cell.

Two layouts are supported: a full grid of cells on the line (d = 1) and
spherical shells (d = 3, radial q).  For radial q the shell masses of
p^(n)_t(x, .) depend on |x| only, so the shell recursion is exact up to
replacing q and p^(n-1) by their values at the shell node.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernels import GaussianKernel, TransitionKernel
from .quadrature import QuadratureConfig, integrate_interval

__all__ = [
    "SingularNode",
    "SpaceTimeGrid",
    "PerturbationSeries",
    "NonexplosionReport",
    "cell_mass_matrix",
    "discretize",
    "extend",
    "run_series",
    "nonexplosion_check",
    "grid_tolerance",
]


class SingularNode(ValueError):
    """The potential is infinite (or not finite) at a grid node."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Spatial cells with representative nodes and a uniform time grid t_k = k dt, k = 0..M."""

    edges: np.ndarray
    nodes: np.ndarray
    times: np.ndarray
    d: int
    layout: str

    def __post_init__(self):
        e, n, t = (np.asarray(a, dtype=float) for a in (self.edges, self.nodes, self.times))
        if e.ndim != 1 or len(e) != len(n) + 1 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be increasing with one more entry than nodes")
        if np.any(n <= e[:-1]) or np.any(n >= e[1:]):
            raise ValueError("each node must lie strictly inside its cell")
        if len(t) < 2 or t[0] != 0.0 or not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-12, atol=0):
            raise ValueError("times must be uniform and start at 0")
        if self.layout not in ("line", "radial"):
            raise ValueError("layout must be 'line' or 'radial'")
        if self.layout == "line" and self.d != 1:
            raise ValueError("the line layout is for d = 1")
        if self.layout == "radial" and (self.d != 3 or e[0] < 0):
            raise ValueError("the radial layout is for d = 3 with nonnegative radii")
        for name, a in (("edges", e), ("nodes", n), ("times", t)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def line(cls, half_width: float, n_cells: int, t_max: float, n_times: int) -> "SpaceTimeGrid":
        """Uniform cells on [-half_width, half_width], nodes at cell centers."""
        edges = np.linspace(-half_width, half_width, n_cells + 1)
        return cls(edges, 0.5 * (edges[1:] + edges[:-1]), np.linspace(0.0, t_max, n_times + 1), 1, "line")

    @classmethod
    def radial(cls, r_min: float, r_max: float, n_cells: int, t_max: float, n_times: int) -> "SpaceTimeGrid":
        """Shells with geometric edges from r_min to r_max, plus the ball |x| < r_min; nodes at geometric centers."""
        outer = np.geomspace(r_min, r_max, n_cells)
        edges = np.concatenate([[0.0], outer])
        nodes = np.concatenate([[0.5 * r_min], np.sqrt(outer[1:] * outer[:-1])])
        return cls(edges, nodes, np.linspace(0.0, t_max, n_times + 1), 3, "radial")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def weights(self) -> np.ndarray:
        """Cell volumes."""
        e = self.edges
        if self.layout == "line":
            return np.diff(e)
        return 4.0 * math.pi / 3.0 * np.diff(e**3)

    def refined(self) -> "SpaceTimeGrid":
        """Halve every cell and the time step."""
        e = self.edges
        if self.layout == "line":
            mid = 0.5 * (e[1:] + e[:-1])
        else:
            mid = np.where(e[:-1] > 0, np.sqrt(e[1:] * np.maximum(e[:-1], 1e-300)), 0.5 * e[1:])
        edges = np.sort(np.concatenate([e, mid]))
        if self.layout == "line":
            nodes = 0.5 * (edges[1:] + edges[:-1])
        else:
            nodes = np.where(edges[:-1] > 0, np.sqrt(edges[1:] * np.maximum(edges[:-1], 1e-300)), 0.5 * edges[1:])
        times = np.linspace(0.0, self.times[-1], 2 * (len(self.times) - 1) + 1)
        return SpaceTimeGrid(edges, nodes, times, self.d, self.layout)


def _shell_antiderivatives(k: TransitionKernel, t: float, rho: float, cfg: QuadratureConfig):
    """Functions A, B with A' = r T(|r - rho|) and B' = r T(r + rho)."""
    anti = k.tail_moment_antiderivatives(t, np.array([0.0]))
    if anti is not None:
        def UU(w):
            u, u1 = k.tail_moment_antiderivatives(t, w)
            return np.asarray(u, dtype=float), np.asarray(u1, dtype=float)
    else:
        def UU(w):
            w = np.atleast_1d(np.asarray(w, dtype=float))
            T = lambda v: k.tail_moment(t, v)
            u = np.array([integrate_interval(T, 0.0, wi, cfg).value if wi > 0 else 0.0 for wi in w])
            u1 = np.array([integrate_interval(lambda v: v * T(v), 0.0, wi, cfg).value if wi > 0 else 0.0 for wi in w])
            return u, u1

    def A(r):
        w = np.abs(r - rho)
        u, u1 = UU(w)
        return np.where(r >= rho, u1 + rho * u, u1 - rho * u)

    def B(r):
        u, u1 = UU(r + rho)
        return u1 - rho * u

    return A, B


def cell_mass_matrix(k: TransitionKernel, t: float, grid: SpaceTimeGrid,
                     cfg: QuadratureConfig | None = None) -> np.ndarray:
    """P[i, j] = int over cell j of p_t(x_i, y) dy (identity at t = 0)."""
    n = len(grid.nodes)
    if t == 0.0:
        return np.eye(n)
    e = grid.edges
    if grid.layout == "line":
        F = np.asarray(k.cdf(t, e[None, :] - grid.nodes[:, None]), dtype=float)
        P = np.diff(F, axis=1)
    else:
        cfg = cfg or QuadratureConfig(rel_tol=1e-10)
        P = np.empty((n, n))
        for i, rho in enumerate(grid.nodes):
            A, B = _shell_antiderivatives(k, t, float(rho), cfg)
            P[i] = 2.0 * math.pi / rho * (np.diff(A(e)) - np.diff(B(e)))
    return np.maximum(P, 0.0)


@dataclass
class PerturbationSeries:
    """Terms M^(n) with shape (len(times), cells, cells); partial sums are cumulative."""

    grid: SpaceTimeGrid
    kernel_id: str
    q_values: np.ndarray
    kernel_matrices: np.ndarray
    terms: list = field(default_factory=list)
    kernel: TransitionKernel | None = None
    cfg: QuadratureConfig | None = None

    @property
    def truncation_index(self) -> int:
        return len(self.terms) - 1

    def partial_sum(self, n: int | None = None) -> np.ndarray:
        n = self.truncation_index if n is None else n
        return np.sum(self.terms[: n + 1], axis=0)

    @property
    def partial_sums(self) -> list:
        return list(np.cumsum(self.terms, axis=0))

    def term_max(self, n: int) -> float:
        return float(np.max(self.terms[n][1:])) if len(self.grid.times) > 1 else 0.0

    def density(self, n: int, t_index: int) -> np.ndarray:
        """Term n as a kernel density p^(n)(x_i, y_j) ~ M[i, j] / |cell j|."""
        return self.terms[n][t_index] / self.grid.weights[None, :]

    def to_csv(self, path) -> None:
        """Rows (term, t_index, x_index, y_index, value)."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["term", "t_index", "x_index", "y_index", "value"])
            for n, M in enumerate(self.terms):
                for m, i, j in np.ndindex(M.shape):
                    wr.writerow([n, m, i, j, repr(float(M[m, i, j]))])


def discretize(k: TransitionKernel, q: Callable[[np.ndarray], np.ndarray], grid: SpaceTimeGrid,
               cfg: QuadratureConfig | None = None) -> PerturbationSeries:
    """Series holding only the unperturbed term."""
    if k.d != grid.d:
        raise ValueError("kernel and grid dimensions differ")
    with np.errstate(divide="ignore", invalid="ignore"):
        qv = np.asarray(q(grid.nodes), dtype=float) * np.ones(len(grid.nodes))
    if not np.all(np.isfinite(qv)):
        bad = grid.nodes[~np.isfinite(qv)]
        raise SingularNode(f"q is not finite at nodes {bad[:5]}")
    if np.any(qv < 0):
        raise ValueError("q must be nonnegative")
    P = np.stack([cell_mass_matrix(k, float(t), grid, cfg) for t in grid.times])
    return PerturbationSeries(grid, k.kernel_id, qv, P, [P.copy()], k, cfg)


def _seed_steps(series: PerturbationSeries) -> int:
    """Number of halvings K of dt for the seed step tau_0 = dt / 2^K.

    tau_0 q must be small everywhere.  For a diffusion tau_0 must not drop
    below the time a path needs to cross the narrowest cell: composing steps
    that barely leave their cell would restart every path from a node and
    slow the chain down.  Jump kernels have no such floor.
    """
    g = series.grid
    width = float(np.min(np.diff(g.edges)))
    q_max = float(np.max(series.q_values)) if len(series.q_values) else 0.0
    target = min(1e-2 / q_max if q_max > 0 else math.inf, g.dt)
    if isinstance(series.kernel, GaussianKernel):
        target = max(target, width * width)
    return int(min(60, max(0, math.ceil(math.log2(g.dt / target)))))


def _compose(A: list, B: list, n_terms: int) -> list:
    return [sum(A[j] @ B[n - j] for j in range(n + 1)) for n in range(n_terms)]


def _compute_terms(series: PerturbationSeries, n_terms: int) -> list:
    g = series.grid
    Q = series.q_values
    P = series.kernel_matrices
    n_t = len(g.times)
    K = _seed_steps(series)
    tau = g.dt / 2.0**K
    Pt = cell_mass_matrix(series.kernel, tau, g, series.cfg) if K > 0 else P[1]
    step = [Pt, 0.5 * tau * (Pt * Q[None, :] + Q[:, None] * Pt)]
    for n in range(2, n_terms):
        step.append(0.5 * tau * Q[:, None] * step[-1])
    step = step[:n_terms]
    for k in range(K):
        step = _compose(step, step, n_terms)
        step[0] = cell_mass_matrix(series.kernel, tau * 2.0 ** (k + 1), g, series.cfg) if k + 1 < K else P[1]
    PQ = P * Q[None, None, :]
    terms = [P.copy()] + [np.zeros(P.shape) for _ in range(n_terms - 1)]
    if n_t > 1:
        for n in range(1, n_terms):
            terms[n][1] = step[n]
        for m in range(2, n_t):
            for n in range(1, n_terms):
                # first insertion in (0, dt) and (t - dt, t): exact composition with the short-step terms
                acc = sum(step[j] @ terms[n - j][m - 1] for j in range(1, n + 1))
                acc = acc + P[m - 1] @ step[n]
                # first insertion in [dt, t - dt]: trapezoid rule
                if m >= 3:
                    mid = 0.5 * (PQ[1] @ terms[n - 1][m - 1] + PQ[m - 1] @ terms[n - 1][1])
                    for kk in range(2, m - 1):
                        mid = mid + PQ[kk] @ terms[n - 1][m - kk]
                    acc = acc + g.dt * mid
                terms[n][m] = acc
    return [np.maximum(T, 0.0) for T in terms]


def extend(series: PerturbationSeries, n_additional: int = 1) -> PerturbationSeries:
    """Append terms; all terms are recomputed together because the composition law couples them."""
    if n_additional < 0:
        raise ValueError("n_additional must be >= 0")
    if n_additional == 0:
        return series
    n_terms = len(series.terms) + n_additional
    if not np.any(series.q_values):
        series.terms.extend(np.zeros_like(series.kernel_matrices) for _ in range(n_additional))
        return series
    series.terms[:] = _compute_terms(series, n_terms)
    return series


def run_series(series: PerturbationSeries, grid_tol: float, n_max: int = 8) -> PerturbationSeries:
    """Terms up to n_max, truncated after the first term whose largest entry is below grid_tol."""
    if series.truncation_index < n_max:
        extend(series, n_max - series.truncation_index)
    for n in range(1, len(series.terms)):
        if series.term_max(n) < grid_tol:
            del series.terms[n + 1:]
            break
    return series


def grid_tolerance(series: PerturbationSeries, k: TransitionKernel, h: Callable[[np.ndarray], np.ndarray],
                   t_index: int, cfg: QuadratureConfig | None = None) -> float:
    """Largest relative gap between the grid and quadrature values of int_cells p_t(x_i, y) h(y) dy."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-9)
    g = series.grid
    t = float(g.times[t_index])
    hv = np.asarray(h(g.nodes), dtype=float)
    grid_val = series.terms[0][t_index] @ hv
    lo, hi = g.edges[0], g.edges[-1]
    exact = np.empty(len(g.nodes))
    for i, x in enumerate(g.nodes):
        if g.layout == "line":
            f = lambda y: k.radial(t, np.abs(y - x)) * h(y)
            exact[i] = integrate_interval(f, lo, hi, cfg.with_splits([x, x - 5 * math.sqrt(t), x + 5 * math.sqrt(t)])).value
        else:
            f = lambda r: 4 * math.pi * r * r * k.sphere_mean(t, r, float(x)) * h(r)
            exact[i] = integrate_interval(f, lo, hi, cfg.with_splits([x, x / 2, 2 * x])).value
    return float(np.max(np.abs(grid_val - exact) / hv))


@dataclass(frozen=True)
class NonexplosionReport:
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    relative_margin: np.ndarray
    min_relative_margin: float
    margin_by_order: tuple[float, ...]
    term_ratios: tuple[float, ...]
    growth_flag: bool

    def holds(self, grid_tol: float, factor: float = 5.0) -> bool:
        return self.min_relative_margin >= -factor * grid_tol

    def to_dict(self) -> dict:
        return {
            "min_relative_margin": float(self.min_relative_margin),
            "margin_by_order": [float(m) for m in self.margin_by_order],
            "term_ratios": [float(r) for r in self.term_ratios],
            "growth_flag": bool(self.growth_flag),
        }


def nonexplosion_check(series: PerturbationSeries, h_values, t_index: int) -> NonexplosionReport:
    """Compare sum_{k <= n} (p^(k)_t h)(x_i) with h(x_i) at every node.

    ``growth_flag`` is a blow-up indicator: successive terms do not shrink
    (last ratio of term sizes >= 1) or a negative margin still drops by more
    than a quarter at the last order.
    """
    h = np.asarray(h_values, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ValueError("h must be finite at the nodes")
    contrib = [T[t_index] @ h for T in series.terms]
    cum = np.cumsum(contrib, axis=0)
    lhs = cum[-1]
    margin = h - lhs
    rel = margin / h
    by_order = tuple(float(np.min((h - c) / h)) for c in cum)
    sizes = [float(np.max(c)) for c in contrib]
    ratios = tuple(sizes[i + 1] / sizes[i] if sizes[i] > 0 else 0.0 for i in range(len(sizes) - 1))
    growth = bool(ratios and ratios[-1] >= 1.0)
    if len(by_order) > 1 and by_order[-1] < 0:
        growth = growth or (by_order[-2] - by_order[-1]) > 0.25 * abs(by_order[-2])
    return NonexplosionReport(lhs, h, margin, rel, float(np.min(rel)), by_order, ratios, growth)
