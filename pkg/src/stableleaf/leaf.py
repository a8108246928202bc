"""Finite-time stable leaves: integration, convergence, contraction, uniqueness.

A leaf of order k through z is the integral curve of the unit most-contracted
direction field of the k-step derivative, parametrized by arclength on a
uniform t-grid over [-eps, eps]. Integration is classical fixed-step RK4
(default h = eps/512) with orientation continuity enforced by sign-flipping
the field against the previous tangent; leaves of consecutive orders are
compared at matched arclength on a shared grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .budget import EpsilonSchedule, HyperbolicityBudget, _reference_orbit, first_tube_exit
from .cocycle import build_orbit_cocycle
from .directions import _signed_gap, contracted_theta_fast, direction_field_derivative
from .errors import (
    ConformalError,
    DomainError,
    NoFeasibleEpsilonError,
    NonFiniteError,
    NotConvergedError,
    OrbitEscapeError,
)
from .maps import MapModel, Point2
from .rng import SplitRng

DEFAULT_GRID = 257
DEFAULT_STEP_DIV = 512  # default h = eps / 512

_PAIR_STREAM = 2
_PROBE_STREAM = 3


@dataclass
class LeafCurve:
    """Arclength samples (t, p, theta) of one finite-time leaf.

    t runs ascending over the untruncated range; samples[center_index]
    is exactly z0. theta is the tangent angle unwrapped mod pi from the
    center outward, so adjacent samples never jump by more than pi/2.
    """

    k: int
    z0: Point2
    eps: float
    h: float
    t: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    thetas: np.ndarray
    center_index: int
    truncated_neg: bool
    truncated_pos: bool
    grid_points: int
    limit: bool = False

    def points(self) -> list[Point2]:
        return [Point2(x, y) for x, y in zip(self.xs, self.ys)]

    def samples(self):
        """Ordered (t, point, theta) triples along the leaf."""
        for t, x, y, th in zip(self.t, self.xs, self.ys, self.thetas):
            yield float(t), Point2(float(x), float(y)), float(th)

    def tangent_lipschitz(self) -> float:
        """Max |d theta / d t| over the grid (Lipschitz estimate of the tangent)."""
        if len(self.t) < 2:
            return 0.0
        dt = np.diff(self.t)
        return float(np.max(np.abs(np.diff(self.thetas)) / dt))


FieldFn = Callable[[float, float, float, float], tuple[float, float]]


def rk4_streamline(
    fld: FieldFn,
    x0: float,
    y0: float,
    ux0: float,
    uy0: float,
    n_cells: int,
    spacing: float,
    steps_per_cell: int,
) -> tuple[list[float], list[float], list[float], bool]:
    """Trace a unit field one direction for n_cells grid cells of width spacing.

    Returns per-node xs, ys, raw tangent angles, and a truncation flag. The
    field is evaluated with an orientation reference so direction fields
    defined mod pi stay coherent along the trace.
    """
    h = spacing / steps_per_cell
    xs: list[float] = []
    ys: list[float] = []
    ths: list[float] = []
    x, y = x0, y0
    ux, uy = ux0, uy0
    sixth = h / 6.0
    for _ in range(n_cells):
        for _ in range(steps_per_cell):
            try:
                k1x, k1y = fld(x, y, ux, uy)
                k2x, k2y = fld(x + 0.5 * h * k1x, y + 0.5 * h * k1y, k1x, k1y)
                k3x, k3y = fld(x + 0.5 * h * k2x, y + 0.5 * h * k2y, k2x, k2y)
                k4x, k4y = fld(x + h * k3x, y + h * k3y, k3x, k3y)
            except (DomainError, ConformalError, NonFiniteError, OrbitEscapeError):
                return xs, ys, ths, True
            x += sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
            y += sixth * (k1y + 2.0 * (k2y + k3y) + k4y)
            ux, uy = k4x, k4y
        try:
            tx, ty = fld(x, y, ux, uy)
        except (DomainError, ConformalError, NonFiniteError, OrbitEscapeError):
            return xs, ys, ths, True
        ux, uy = tx, ty
        xs.append(x)
        ys.append(y)
        ths.append(math.atan2(ty, tx))
    return xs, ys, ths, False


def _leaf_field(m: MapModel, k: int) -> FieldFn:
    def fld(x: float, y: float, rux: float, ruy: float) -> tuple[float, float]:
        th, _, _ = contracted_theta_fast(m, x, y, k)
        ux, uy = math.cos(th), math.sin(th)
        if ux * rux + uy * ruy < 0.0:
            return -ux, -uy
        return ux, uy

    return fld


def integrate_leaf(
    m: MapModel,
    z: Point2,
    k: int,
    eps: float,
    h: Optional[float] = None,
    grid_points: int = DEFAULT_GRID,
) -> LeafCurve:
    """Integrate the order-k leaf through z to arclength eps on both sides.

    grid_points must be odd (a center node plus symmetric sides). h is snapped
    to an integer number of steps per grid cell, at least one, so steps never
    straddle recording nodes. A ConformalError or DomainError at z itself
    propagates; mid-trace failures truncate the corresponding side and set its
    flag.
    """
    if grid_points < 3 or grid_points % 2 == 0:
        raise IndexError("grid_points must be odd and >= 3")
    if eps <= 0.0:
        raise IndexError("eps must be positive")
    zx, zy = float(z[0]), float(z[1])
    n_side = (grid_points - 1) // 2
    spacing = eps / n_side
    if h is None:
        h = eps / DEFAULT_STEP_DIV
    steps_per_cell = max(1, round(spacing / h))
    h_eff = spacing / steps_per_cell

    th0, _, _ = contracted_theta_fast(m, zx, zy, k)  # raises at z itself
    e0 = (math.cos(th0), math.sin(th0))
    fld = _leaf_field(m, k)

    xs_p, ys_p, th_p, trunc_p = rk4_streamline(fld, zx, zy, e0[0], e0[1], n_side, spacing, steps_per_cell)
    xs_n, ys_n, th_n, trunc_n = rk4_streamline(fld, zx, zy, -e0[0], -e0[1], n_side, spacing, steps_per_cell)

    m_neg, m_pos = len(xs_n), len(xs_p)
    xs = list(reversed(xs_n)) + [zx] + xs_p
    ys = list(reversed(ys_n)) + [zy] + ys_p
    raw = list(reversed(th_n)) + [th0] + th_p
    t = spacing * (np.arange(len(xs)) - m_neg)

    thetas = np.empty(len(raw))
    thetas[m_neg] = th0
    for i in range(m_neg + 1, len(raw)):
        thetas[i] = thetas[i - 1] + _signed_gap(thetas[i - 1], raw[i])
    for i in range(m_neg - 1, -1, -1):
        thetas[i] = thetas[i + 1] + _signed_gap(thetas[i + 1], raw[i])

    return LeafCurve(
        k=k, z0=Point2(zx, zy), eps=eps, h=h_eff,
        t=t, xs=np.array(xs), ys=np.array(ys), thetas=thetas,
        center_index=m_neg, truncated_neg=trunc_n, truncated_pos=trunc_p,
        grid_points=grid_points,
    )


# -- epsilon selection --------------------------------------------------------


def _hull_contains(points: list[Point2], queries: list[tuple[float, float]]) -> bool:
    """All queries inside the convex hull of points (bounding box on degenerate input)."""
    if len(points) < 3:
        return _bbox_contains(points, queries)
    try:
        from scipy.spatial import ConvexHull, QhullError

        hull = ConvexHull(np.asarray(points, dtype=float))
    except QhullError:
        return _bbox_contains(points, queries)
    eqs = hull.equations  # rows: [nx, ny, offset], inside iff n.p + offset <= 0
    for qx, qy in queries:
        if np.any(eqs[:, 0] * qx + eqs[:, 1] * qy + eqs[:, 2] > 1e-12):
            return False
    return True


def _bbox_contains(points: list[Point2], queries) -> bool:
    if not points:
        return False
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    xlo, xhi, ylo, yhi = min(xs), max(xs), min(ys), max(ys)
    return all(xlo <= qx <= xhi and ylo <= qy <= yhi for qx, qy in queries)


def choose_epsilon(
    b: HyperbolicityBudget,
    gamma: float,
    L: float,
    sched: EpsilonSchedule,
    ladder_depth: int = 40,
) -> float:
    """Largest dyadic eps = eps0 * 2^-m satisfying the leaf-length constraints.

    Constraints: eps * gamma < 1, exp(eps * L) < 2, and the tube pre-check
    that the square of radius eps + omega_k around z stays inside the hull of
    the stored order-k0 sample for every computed k >= k0. Budgets without
    stored samples skip the pre-check (the containment proper is re-tested
    during the Cauchy iteration).
    """
    if b.k0 is None:
        raise NoFeasibleEpsilonError("budget has no k0; hyperbolicity never stabilized")
    k0 = b.k0
    xi_tail = b.xi[k0:] if k0 < len(b.xi) else np.array([0.0])
    xi_max = float(np.max(xi_tail)) if len(xi_tail) else 0.0
    hull_pts = list(b.samples.get(k0, [])) if b.samples else []
    if hull_pts:
        hull_pts.append(b.z)
    zx, zy = b.z
    eps0 = sched.radius(0)
    for mexp in range(ladder_depth + 1):
        eps = eps0 * 2.0 ** -mexp
        if not eps * gamma < 1.0:
            continue
        if not math.exp(eps * L) < 2.0:
            continue
        if hull_pts:
            r = eps + eps * math.exp(eps * L) * xi_max
            corners = [(zx - r, zy - r), (zx - r, zy + r), (zx + r, zy - r), (zx + r, zy + r)]
            if not _hull_contains(hull_pts, corners):
                continue
        return eps
    raise NoFeasibleEpsilonError(
        f"no feasible eps on the dyadic ladder eps0*2^-m, m <= {ladder_depth} "
        f"(gamma={gamma:.3e}, L={L:.3e})"
    )


# -- Cauchy iteration in k ----------------------------------------------------


@dataclass
class ConvergenceReport:
    """Per-order leaf distances against the Gronwall envelope eps*xi_k*e^(L*eps)."""

    k0: int
    kmax: int
    eps_chosen: float
    L_used: float
    tol: float
    ks: list[int]
    d_k: np.ndarray
    gronwall_bound: np.ndarray
    omega_k: np.ndarray
    tube_ok: list[bool]
    restricted: list[bool]
    converged: bool
    limit: LeafCurve
    C_fit: Optional[float] = None


def _leaf_distance(a: LeafCurve, bcurve: LeafCurve) -> tuple[float, bool]:
    """Max pointwise distance at matched t over the common grid range."""
    lo = -min(a.center_index, bcurve.center_index)
    hi = min(len(a.t) - a.center_index, len(bcurve.t) - bcurve.center_index)
    ia, ib = a.center_index, bcurve.center_index
    sl_a = slice(ia + lo, ia + hi)
    sl_b = slice(ib + lo, ib + hi)
    dx = a.xs[sl_a] - bcurve.xs[sl_b]
    dy = a.ys[sl_a] - bcurve.ys[sl_b]
    restricted = (hi - lo) < a.grid_points
    return float(np.max(np.hypot(dx, dy))), restricted


def cauchy_iterate(
    m: MapModel,
    z: Point2,
    b: HyperbolicityBudget,
    sched: EpsilonSchedule,
    eps: float,
    kmax: int,
    tol: float,
    h: Optional[float] = None,
    grid_points: int = DEFAULT_GRID,
    L: Optional[float] = None,
    tube_stride: int = 4,
) -> ConvergenceReport:
    """Integrate leaves for k = k0..kmax and verify the Gronwall Cauchy bounds.

    Tube containment is checked by displacing every tube_stride-th grid node
    (plus the endpoints) of the order-k leaf by +/- omega_k along the expanded
    direction and testing membership in the order-(k+1) orbit tube. Raises
    NotConvergedError (carrying the partial report) when the last comparison
    distance is not below tol.
    """
    if b.k0 is None:
        raise NoFeasibleEpsilonError("budget has no k0")
    k0 = b.k0
    if kmax <= k0:
        raise IndexError(f"kmax={kmax} must exceed k0={k0}")
    if L is None:
        coc = build_orbit_cocycle(m, z, kmax)
        hstep = 1e-4 * max(1.0, math.hypot(z[0], z[1]))
        L = direction_field_derivative(m, coc, kmax, hstep, budget=b)[0]

    leaves = {k: integrate_leaf(m, z, k, eps, h=h, grid_points=grid_points) for k in range(k0, kmax + 1)}

    ref = _reference_orbit(m, z, kmax - 1)
    ks = list(range(k0, kmax))
    d_k = np.empty(len(ks))
    bounds = np.empty(len(ks))
    restricted = []
    tube_ok = []
    egl = math.exp(L * eps)
    for i, k in enumerate(ks):
        d, restr = _leaf_distance(leaves[k], leaves[k + 1])
        d_k[i] = d
        restricted.append(restr)
        xi_k = float(b.xi[k]) if k < len(b.xi) else math.inf
        bounds[i] = eps * xi_k * egl

        leafk = leaves[k]
        omega = bounds[i]
        ok = True
        idxs = set(range(0, len(leafk.t), tube_stride)) | {0, len(leafk.t) - 1}
        for idx in sorted(idxs):
            fx, fy = -math.sin(leafk.thetas[idx]), math.cos(leafk.thetas[idx])
            px, py = leafk.xs[idx], leafk.ys[idx]
            for s in (1.0, -1.0):
                disp = Point2(px + s * omega * fx, py + s * omega * fy)
                if first_tube_exit(m, ref, disp, sched, k) is not None:
                    ok = False
                    break
            if not ok:
                break
        tube_ok.append(ok)

    limit = leaves[kmax]
    limit.limit = True
    converged = bool(len(d_k) and d_k[-1] < tol)
    report = ConvergenceReport(
        k0=k0, kmax=kmax, eps_chosen=eps, L_used=L, tol=tol,
        ks=ks, d_k=d_k, gronwall_bound=bounds, omega_k=bounds.copy(),
        tube_ok=tube_ok, restricted=restricted, converged=converged, limit=limit,
    )
    if not converged:
        raise NotConvergedError(kmax, float(d_k[-1]) if len(d_k) else math.inf, report=report)
    return report


# -- contraction along the limit leaf -----------------------------------------


@dataclass
class ContractionReport:
    n: int
    orders: list[int]
    max_ratio: np.ndarray        # per order, max over sampled pairs
    widest_ratio: np.ndarray     # per order, ratio of the widest sampled pair
    gamma_tilde: np.ndarray      # budget envelope per order
    C_fit: float
    pairs: int
    seed: int


def contraction_check(
    m: MapModel,
    leaf: LeafCurve,
    b: HyperbolicityBudget,
    n: int,
    pairs: int,
    seed: int,
) -> ContractionReport:
    """Forward-image distance ratios of leaf point pairs against gamma_tilde.

    For each sampled pair (t1, t2) the ratio |phi^n'(z_t1) - phi^n'(z_t2)| /
    |z_t1 - z_t2| is recorded for n' = 0..n; C_fit is the max over
    n' >= max(k0, 1) of max_ratio / gamma_tilde. The widest pair's ratio
    sequence is kept separately: rate fits use it because round-off injected
    along the orbit amplifies in the expanded direction and floors the ratios
    of narrowly separated pairs first.
    """
    if n > b.kmax:
        raise IndexError(f"n={n} exceeds the budget range kmax={b.kmax}")
    rng = SplitRng(seed).substream(_PAIR_STREAM)
    npts = len(leaf.t)
    if npts < 2:
        raise IndexError("leaf has fewer than 2 grid points")
    max_ratio = np.zeros(n + 1)
    widest_ratio = np.zeros(n + 1)
    widest_d0 = 0.0
    ev = m.eval_xy
    for _ in range(pairs):
        i = rng.randint(npts)
        j = rng.randint(npts)
        while j == i:
            j = rng.randint(npts)
        ax, ay = leaf.xs[i], leaf.ys[i]
        bx, by = leaf.xs[j], leaf.ys[j]
        d0 = math.hypot(ax - bx, ay - by)
        if d0 == 0.0:
            continue
        track = np.empty(n + 1)
        track[0] = 1.0
        for step in range(1, n + 1):
            ax, ay = ev(ax, ay)
            bx, by = ev(bx, by)
            track[step] = math.hypot(ax - bx, ay - by) / d0
        np.maximum(max_ratio, track, out=max_ratio)
        if d0 > widest_d0:
            widest_d0 = d0
            widest_ratio = track
    gt = b.gamma_tilde[: n + 1].copy()
    start = max(b.k0 if b.k0 is not None else 1, 1)
    cfit = 0.0
    for order in range(start, n + 1):
        if gt[order] > 0.0:
            cfit = max(cfit, max_ratio[order] / gt[order])
    return ContractionReport(
        n=n, orders=list(range(n + 1)), max_ratio=max_ratio, widest_ratio=widest_ratio,
        gamma_tilde=gt, C_fit=cfit, pairs=pairs, seed=seed,
    )


# -- uniqueness ---------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRecord:
    point: Point2
    distance_to_leaf: float
    exit_step: Optional[int]


@dataclass
class UniquenessReport:
    kmax: int
    probes: list[ProbeRecord]
    on_leaf_checked: int
    on_leaf_exits: int
    survivors: int


def uniqueness_probe(
    m: MapModel,
    z: Point2,
    sched: EpsilonSchedule,
    leaf: LeafCurve,
    kmax: int,
    probes: int,
    seed: int,
) -> UniquenessReport:
    """Probe points of the eps0 box for their first orbit-tube exit index.

    Points off the leaf should exit by a finite step (the expanded direction
    grows); leaf grid points themselves should survive all kmax tests up to
    integration error. Distances to the leaf are measured against the grid
    polyline vertices.
    """
    ref = _reference_orbit(m, z, kmax)
    rng = SplitRng(seed).substream(_PROBE_STREAM)
    zx, zy = float(z[0]), float(z[1])
    r0 = sched.radius(0)
    records: list[ProbeRecord] = []
    survivors = 0
    for _ in range(probes):
        p = Point2(*rng.point_in_box(zx, zy, r0))
        exit_step = first_tube_exit(m, ref, p, sched, kmax)
        d = float(np.min(np.hypot(leaf.xs - p[0], leaf.ys - p[1])))
        if exit_step is None:
            survivors += 1
        records.append(ProbeRecord(point=p, distance_to_leaf=d, exit_step=exit_step))
    on_exits = 0
    checked = 0
    for idx in range(0, len(leaf.t), 8):
        checked += 1
        pt = Point2(float(leaf.xs[idx]), float(leaf.ys[idx]))
        if first_tube_exit(m, ref, pt, sched, kmax) is not None:
            on_exits += 1
    return UniquenessReport(
        kmax=kmax, probes=records, on_leaf_checked=checked, on_leaf_exits=on_exits,
        survivors=survivors,
    )
