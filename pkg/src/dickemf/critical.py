"""Locators for quantum critical, tricritical and Lifshitz points.

QCPs of the undriven model are roots of {d nu/d xi = 0, d^2 nu/d xi^2 = 0}
on the stationarity surface nu(delta, xi), found by sign-change seeding plus
2-D Newton on an equivalent polynomial system, then filtered to the roots
that are global minima of F (folds on metastable branches are discarded).
QTPs are order-change points along a traced boundary, bisected on the axis
coordinate.  Lifshitz points are triple junctions of the label grid whose
incident boundaries carry a mixed first/second-order signature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, DomainError
from .model import ModelParams, ZeemanSet, eval_F, nu_stationary_derivs
from .scan import (
    FIRST_ORDER,
    SECOND_ORDER,
    BoundaryTrace,
    PhaseMap,
    ProbeResult,
    TransitionProbe,
)
from .solver import minimize_undriven

log = logging.getLogger(__name__)

QCP_RESIDUAL_TOL = 1e-8
QTP_X_TOL = 1e-3


@dataclass(frozen=True)
class CriticalPoint:
    kind: str                      # QCP | QTP | LP
    x: float                       # axis-x coordinate (delta, epsilon or A/Omega)
    nu: float
    method: str
    residuals: tuple[float, ...] = ()
    uncertainty: float = 0.0
    aux: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# QCP: analytic stationarity-curve method (undriven)


def _qcp_fields(delta, xi, k):
    t = xi + k
    w = delta * delta + t * t
    d = (t * w**-0.5).sum(axis=-1)
    dx = delta * delta * (w**-1.5).sum(axis=-1)
    g1 = d - xi * dx
    g2 = (t * w**-2.5).sum(axis=-1)
    return g1, g2, d


def _qcp_jacobian(delta, xi, k):
    t = xi + k
    w = delta * delta + t * t
    d2 = delta * delta
    dxx = -3.0 * d2 * (t * w**-2.5).sum()
    ddel = -delta * (t * w**-1.5).sum()
    ddx_ddel = 2.0 * delta * (w**-1.5).sum() - 3.0 * delta**3 * (w**-2.5).sum()
    j = np.empty((2, 2))
    j[0, 0] = ddel - xi * ddx_ddel                      # dG1/d delta
    j[0, 1] = -xi * dxx                                 # dG1/d xi
    j[1, 0] = -5.0 * delta * (t * w**-3.5).sum()        # dG2/d delta
    j[1, 1] = (w**-2.5).sum() - 5.0 * (t * t * w**-3.5).sum()
    return j


def default_qcp_box(zeeman: ZeemanSet) -> tuple[float, float, float, float]:
    ks = zeeman.k_scale
    return 0.05, 5.0, 0.01 * ks, 3.0 * ks


def locate_qcp(zeeman: ZeemanSet,
               box: tuple[float, float, float, float] | None = None,
               grid_n: int = 240) -> list[CriticalPoint]:
    """All physical QCPs of the undriven model for this Zeeman set.

    Roots where the SP-SP fold of the stationarity curve degenerates; only
    roots that coincide with the global minimum of F are kept (intersections
    on metastable branches never terminate a ground-state boundary).
    """
    k = zeeman.array
    d_lo, d_hi, xi_lo, xi_hi = box or default_qcp_box(zeeman)
    signs = (1.0,) if zeeman.is_symmetric() else (1.0, -1.0)

    roots: list[tuple[float, float]] = []
    for sgn in signs:
        ds = np.linspace(d_lo, d_hi, grid_n)
        xs = sgn * np.linspace(xi_lo, xi_hi, grid_n)
        dd, xx = np.meshgrid(ds, xs, indexing="ij")
        g1, g2, _ = _qcp_fields(dd[..., None], xx[..., None], k)
        s1, s2 = np.sign(g1), np.sign(g2)
        flip1 = np.zeros((grid_n - 1, grid_n - 1), dtype=bool)
        flip2 = np.zeros((grid_n - 1, grid_n - 1), dtype=bool)
        for a in (s1,):
            blk = np.stack([a[:-1, :-1], a[1:, :-1], a[:-1, 1:], a[1:, 1:]])
            flip1 = (blk.max(axis=0) > blk.min(axis=0))
        for a in (s2,):
            blk = np.stack([a[:-1, :-1], a[1:, :-1], a[:-1, 1:], a[1:, 1:]])
            flip2 = (blk.max(axis=0) > blk.min(axis=0))
        for i, j in np.argwhere(flip1 & flip2):
            d0 = 0.5 * (ds[i] + ds[i + 1])
            x0 = 0.5 * (xs[j] + xs[j + 1])
            root = _newton_2d(d0, x0, k)
            if root is None:
                continue
            d_r, x_r = root
            if not (d_lo < d_r <= d_hi and xi_lo <= sgn * x_r <= xi_hi):
                continue
            if not any(abs(d_r - a) < 1e-6 and abs(x_r - b) < 1e-6 for a, b in roots):
                roots.append((d_r, x_r))

    points = []
    for d_r, x_r in sorted(roots):
        try:
            nu, nu_x, nu_xx = nu_stationary_derivs(d_r, x_r, zeeman)
        except DomainError:
            continue
        if not (np.isfinite(nu) and nu > 0):
            continue
        if abs(nu_x) > QCP_RESIDUAL_TOL or abs(nu_xx) > QCP_RESIDUAL_TOL:
            log.info("dropping root (%g, %g): residuals %g, %g", d_r, x_r, nu_x, nu_xx)
            continue
        p = ModelParams(d_r, nu, zeeman)
        rep = minimize_undriven(p)
        gap = eval_F(x_r, p) - rep.global_state.f_value
        if gap > 1e-6 * (1.0 + abs(rep.global_state.f_value)):
            log.info("dropping metastable fold at (%g, %g): gap %.3e", d_r, x_r, gap)
            continue
        points.append(CriticalPoint(
            kind="QCP", x=d_r, nu=nu, method="stationarity-curve-newton",
            residuals=(abs(nu_x), abs(nu_xx)),
            aux=dict(xi=x_r, global_gap=float(gap)),
        ))
    return points


def _newton_2d(d0: float, x0: float, k: np.ndarray, max_iter: int = 80):
    d, x = d0, x0
    for _ in range(max_iter):
        g1, g2, _ = _qcp_fields(np.float64(d), np.float64(x), k)
        if not (np.isfinite(g1) and np.isfinite(g2)):
            return None
        try:
            step = np.linalg.solve(_qcp_jacobian(d, x, k), -np.array([g1, g2]))
        except np.linalg.LinAlgError:
            return None
        # damping keeps delta positive
        scale = 1.0
        while d + scale * step[0] <= 0 and scale > 1e-6:
            scale *= 0.5
        d += scale * step[0]
        x += scale * step[1]
        if abs(step[0]) + abs(step[1]) < 1e-14:
            break
    g1, g2, _ = _qcp_fields(np.float64(d), np.float64(x), k)
    if abs(g1) < 1e-9 and abs(g2) < 1e-9:
        return d, x
    log.debug("Newton did not converge from (%g, %g)", d0, x0)
    return None


# ---------------------------------------------------------------------------
# QTP: bisection on the order change along a boundary


def locate_qtp(trace: BoundaryTrace, x_tol: float = QTP_X_TOL) -> list[CriticalPoint]:
    """Order-change points of a traced boundary, bisected to x_tol."""
    points = []
    orders = list(trace.orders)
    xs = list(trace.xs)
    for i in range(len(xs) - 1):
        oa, ob = orders[i], orders[i + 1]
        if "unresolved" in (oa, ob) or oa == ob:
            continue
        a, b = xs[i], xs[i + 1]
        ra: ProbeResult | None = None
        while b - a > x_tol:
            mid = 0.5 * (a + b)
            res = trace.probe_at(mid)
            if res.order == oa:
                a = mid
            else:
                b = mid
            ra = res
        x_mid = 0.5 * (a + b)
        nu_mid = ra.nu if ra is not None else 0.5 * (trace.nus[i] + trace.nus[i + 1])
        points.append(CriticalPoint(
            kind="QTP", x=x_mid, nu=float(nu_mid), method="boundary-order-bisection",
            uncertainty=float(b - a),
            aux=dict(order_low=oa, order_high=ob, boundary=trace.kind),
        ))
    return points


# ---------------------------------------------------------------------------
# SP-SP terminus in the driven model (scan-free QCP estimate)


def locate_sp_terminus(delta_lo: float, delta_hi: float, zeeman: ZeemanSet,
                       ratio: float, nu_window, x_tol: float = 2e-3
                       ) -> CriticalPoint | None:
    """Endpoint of the first-order SP-SP line, bisected on the jump criterion.

    ``nu_window``: callable x -> (nu_lo, nu_hi) bracketing the SP-SP crossing.
    Returns None when no first-order jump exists anywhere in the range.
    """
    def sp_jump(x: float) -> ProbeResult | None:
        lo, hi = nu_window(x)
        try:
            return TransitionProbe(x, zeeman, ratio).locate(lo, hi)
        except (DomainError, ConvergenceFailure):
            return None

    ra = sp_jump(delta_lo)
    rb = sp_jump(delta_hi)
    first_a = ra is not None and ra.order == FIRST_ORDER
    first_b = rb is not None and rb.order == FIRST_ORDER
    if first_a == first_b:
        return None
    a, b = delta_lo, delta_hi
    last = ra if first_a else rb
    while b - a > x_tol:
        mid = 0.5 * (a + b)
        r = sp_jump(mid)
        is_first = r is not None and r.order == FIRST_ORDER
        if is_first == first_a:
            a = mid
        else:
            b = mid
        if r is not None and is_first:
            last = r
    x_mid = 0.5 * (a + b)
    return CriticalPoint(
        kind="QCP", x=x_mid, nu=float(last.nu) if last else float("nan"),
        method="sp-terminus-bisection", uncertainty=float(b - a),
        aux=dict(jump_at_last_first=last.jump if last else None),
    )


# ---------------------------------------------------------------------------
# LP: triple junctions of the label grid


def locate_lp(phase_map: PhaseMap, probe_offset_cells: float = 5.0
              ) -> list[CriticalPoint]:
    """Triple junctions whose three incident boundaries carry an LP signature.

    Signature: two first-order plus one second-order boundary, or one
    first-order plus two second-order.
    """
    if phase_map.fine_labels is not None:
        labels = phase_map.fine_labels
        xs, nus = phase_map.fine_x, phase_map.fine_nu
    else:
        labels = phase_map.labels
        xs, nus = phase_map.x_vals, phase_map.nu_vals

    n_x, n_y = labels.shape
    corners = []
    for i in range(n_x - 1):
        for j in range(n_y - 1):
            block = {int(labels[i, j]), int(labels[i + 1, j]),
                     int(labels[i, j + 1]), int(labels[i + 1, j + 1])}
            if len(block) >= 3:
                corners.append((i, j, tuple(sorted(block))))
    if not corners:
        return []

    # cluster junction corners that touch (one physical junction each)
    clusters: list[list[tuple[int, int, tuple]]] = []
    for c in corners:
        placed = False
        for cl in clusters:
            if any(abs(c[0] - o[0]) <= 2 and abs(c[1] - o[1]) <= 2 for o in cl):
                cl.append(c)
                placed = True
                break
        if not placed:
            clusters.append([c])

    dx = xs[1] - xs[0]
    dnu = nus[1] - nus[0]
    points = []
    for cl in clusters:
        ci = int(round(np.mean([c[0] for c in cl])))
        cj = int(round(np.mean([c[1] for c in cl])))
        x_j = 0.5 * (xs[ci] + xs[ci + 1])
        nu_j = 0.5 * (nus[cj] + nus[cj + 1])
        phases = sorted(set().union(*[set(c[2]) for c in cl]))
        if len(phases) < 3:
            continue
        orders = _incident_orders(phase_map, x_j, nu_j, phases,
                                  probe_offset_cells * max(dx, dnu))
        counts = sorted(orders.values())
        n_first = sum(1 for o in orders.values() if o == FIRST_ORDER)
        n_second = sum(1 for o in orders.values() if o == SECOND_ORDER)
        if len(orders) == 3 and n_first + n_second == 3 and n_first in (1, 2):
            points.append(CriticalPoint(
                kind="LP", x=float(x_j), nu=float(nu_j), method="triple-junction",
                uncertainty=float(math.hypot(dx, dnu)),
                aux=dict(phases=tuple(phases),
                         incident_orders={f"{a}-{b}": o for (a, b), o in orders.items()}),
            ))
    return points


def _incident_orders(phase_map: PhaseMap, x_j: float, nu_j: float,
                     phases: list[int], radius: float) -> dict:
    """Order of each incident boundary, probed near (but off) the junction."""
    wanted = [(phases[a], phases[b]) for a in range(len(phases))
              for b in range(a + 1, len(phases))]
    out = {}
    for pair in wanted:
        best = None
        for b in phase_map.boundaries:
            if tuple(sorted(b.pair)) != tuple(sorted(pair)) or len(b.points) == 0:
                continue
            dists = np.hypot(b.points[:, 0] - x_j, b.points[:, 1] - nu_j)
            i_near = int(np.argmin(dists))
            if best is None or dists[i_near] < best[0]:
                best = (float(dists[i_near]), b, i_near)
        if best is None:
            continue
        _, b, i_near = best
        # walk away from the junction by ~radius before classifying
        pts = b.points
        i_probe = i_near
        for i in range(len(pts)):
            if np.hypot(pts[i, 0] - x_j, pts[i, 1] - nu_j) >= radius:
                if abs(i - i_near) < abs(i_probe - i_near) or i_probe == i_near:
                    i_probe = i
        order = _order_near(phase_map, b, i_probe)
        out[tuple(sorted(pair))] = order
    return out


def _order_near(phase_map: PhaseMap, boundary, i_probe: int) -> str:
    plane = phase_map.plane
    x, nu = float(boundary.points[i_probe][0]), float(boundary.points[i_probe][1])
    delta, zeeman, ratio = plane.column_params(x)
    probe = TransitionProbe(delta, zeeman, ratio)
    pad = 3.0 * (phase_map.nu_vals[1] - phase_map.nu_vals[0])
    try:
        res = probe.locate(max(nu - pad, 1e-6), nu + pad)
        return res.order
    except Exception:
        return "unresolved"
