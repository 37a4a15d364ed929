"""Two-dimensional phase-plane scans, branch labeling and boundary analysis.

A scan sweeps one of (delta, epsilon, A/Omega) against the coupling nu,
solves every cell for its mean-field ground state, labels cells as NP or as
one of the superradiant branches (ordered by radiance), and traces the
boundary polylines between labels.  Transition order is decided by the jump
of the order parameter across the boundary, measured on branch-tracked
states at successively refined steps.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, DomainError, UnresolvedTransition
from .model import (
    NP,
    XI_TOL,
    DriveParams,
    GroundState,
    ModelParams,
    ZeemanSet,
    eval_F_derivs,
    x_from_xi,
)
from .solver import (
    DEDUP_TOL,
    GRAD_TOL,
    MinimaReport,
    local_descent,
    minimize_driven,
    minimize_undriven,
    structured_starts,
)

J_TOL = 1e-3          # order-parameter jump separating first from second order
PROBE_STEP = 1e-9     # nu step of the refined classification path
FIRST_ORDER = "first_order"
SECOND_ORDER = "second_order"

AXES = ("delta", "epsilon", "drive_ratio")


def worker_count() -> int:
    raw = os.environ.get("DICKE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ScanPlane:
    """A 2-D parameter rectangle: axis_x against the coupling nu."""

    axis_x: str
    x_lo: float
    x_hi: float
    n_x: int
    nu_lo: float
    nu_hi: float
    n_y: int
    delta: float = 1.0
    zeeman: ZeemanSet = field(default_factory=ZeemanSet.k3)
    drive_ratio: float = 0.0
    refine: bool = True

    def __post_init__(self):
        if self.axis_x not in AXES:
            raise DomainError(f"axis_x must be one of {AXES}")
        if not (self.x_lo < self.x_hi and self.nu_lo < self.nu_hi):
            raise DomainError("scan ranges must satisfy lo < hi")
        if self.n_x < 2 or self.n_y < 2:
            raise DomainError("scan needs at least 2 cells per axis")

    def column_params(self, x: float) -> tuple[float, ZeemanSet, float]:
        """(delta, zeeman, drive ratio) for a column at axis value x."""
        if self.axis_x == "delta":
            return x, self.zeeman, self.drive_ratio
        if self.axis_x == "epsilon":
            return self.delta, ZeemanSet.k_epsilon(x), self.drive_ratio
        return self.delta, self.zeeman, x

    @property
    def x_vals(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_x)

    @property
    def nu_vals(self) -> np.ndarray:
        return np.linspace(self.nu_lo, self.nu_hi, self.n_y)


@dataclass(frozen=True)
class Boundary:
    """One traced boundary polyline between two phase labels."""

    pair: tuple[int, int]          # branch labels, sorted ascending
    points: np.ndarray             # (n, 2) columns (x, nu)
    order: str                     # first_order | second_order | mixed | unresolved
    probe_orders: tuple[str, ...] = ()
    probe_ts: tuple[int, ...] = ()     # polyline indices where probes ran
    end_interior: tuple[bool, bool] = (False, False)

    @property
    def kind(self) -> str:
        return "NP-SP" if 0 in self.pair else "SP-SP"


@dataclass(frozen=True)
class PhaseMap:
    plane: ScanPlane
    x_vals: np.ndarray
    nu_vals: np.ndarray
    xi: np.ndarray                 # signed canonical order parameter, (n_x, n_y)
    energy: np.ndarray
    y: np.ndarray                  # (n_x, n_y, M)
    labels: np.ndarray             # int branch labels, 0 = NP
    flags: np.ndarray              # True where the cell solver failed
    boundaries: tuple[Boundary, ...]
    thresholds: tuple[float, ...]  # |xi| levels separating SP branches
    fine_x: np.ndarray | None = None
    fine_nu: np.ndarray | None = None
    fine_xi: np.ndarray | None = None
    fine_labels: np.ndarray | None = None

    def label_at(self, x: float, nu: float) -> int:
        ix = int(np.argmin(np.abs(self.x_vals - x)))
        iy = int(np.argmin(np.abs(self.nu_vals - nu)))
        return int(self.labels[ix, iy])


# ---------------------------------------------------------------------------
# cell solving


def _solve_cell_undriven(delta: float, zeeman: ZeemanSet, nu: float) -> MinimaReport:
    return minimize_undriven(ModelParams(delta, nu, zeeman))


def _undriven_track(xi0: float, delta: float, zeeman: ZeemanSet, nu: float
                    ) -> GroundState | None:
    """Newton-continue a 1-D minimum to new parameters; None when it vanished."""
    p = ModelParams(delta, nu, zeeman)
    xi = xi0
    for _ in range(60):
        d1, d2 = eval_F_derivs(xi, p)
        if d2 <= 0:
            return None
        step = -d1 / d2
        xi += step
        if abs(step) < 1e-14:
            break
    d1, d2 = eval_F_derivs(xi, p)
    if abs(d1) > 1e-10 or d2 <= 0:
        return None
    return GroundState.from_xi_undriven(xi, p)


class _CellSolver:
    """Per-cell ground-state solves with continuation seeding for scans."""

    def __init__(self, delta: float, zeeman: ZeemanSet, ratio: float):
        self.delta = delta
        self.zeeman = zeeman
        self.ratio = ratio
        self.driven = ratio > 0.0

    def params(self, nu: float) -> ModelParams:
        return ModelParams(self.delta, nu, self.zeeman)

    def solve(self, nu: float, carry: list[GroundState]) -> tuple[GroundState, list[GroundState], bool]:
        """Returns (global state, local minima to carry forward, failed flag)."""
        p = self.params(nu)
        if not self.driven:
            rep = minimize_undriven(p)
            return rep.global_state, list(rep.locals[:4]), False
        d = DriveParams(self.ratio)
        seeds = [np.concatenate([[x_from_xi(s.xi, p)], s.y]) for s in carry]
        for v in structured_starts(p, d):
            seeds.append(v)
        states = []
        for v0 in seeds:
            v, e, gn = local_descent(v0, p, d)
            if gn < GRAD_TOL and np.isfinite(e):
                states.append(GroundState.from_xy(v[0], v[1:], p, d, grad_norm=gn))
        if not states:
            try:
                rep = minimize_driven(p, d)
                states = list(rep.locals)
            except ConvergenceFailure as exc:
                if exc.report is None:
                    raise
                return exc.report.global_state, list(exc.report.locals[:4]), True
        states = _dedup_states(states, p)
        # symmetry-protected saddles (NP above its instability) have zero
        # gradient; never let one lead the cell
        from .solver import hessian_min_eig

        while states and hessian_min_eig(states[0], p, d) <= -1e-8:
            states.pop(0)
        if not states:
            rep = minimize_driven(p, d)
            states = list(rep.locals)
        return states[0], states[:4], False


def _dedup_states(states: list[GroundState], p: ModelParams) -> list[GroundState]:
    if p.zeeman.is_symmetric():
        canon = []
        for s in states:
            if s.xi < -1e-12:
                x = -x_from_xi(s.xi, p)
                y = -np.asarray(s.y)[::-1]
                d = DriveParams(0.0)  # drive fields of GroundState are param-free
                canon.append(GroundState(
                    xi=-s.xi, y=tuple(float(v) for v in y),
                    energy_per_atom=s.energy_per_atom,
                    spin_x=tuple(-v for v in s.spin_x[::-1]),
                    spin_z=tuple(s.spin_z[::-1]),
                    f_value=s.f_value, grad_norm=s.grad_norm))
            else:
                canon.append(s)
        states = canon
    states = sorted(states, key=lambda s: (s.energy_per_atom, abs(s.xi), s.xi))
    kept: list[GroundState] = []
    for s in states:
        if not any(abs(s.xi - t.xi) < DEDUP_TOL
                   and all(abs(a - b) < DEDUP_TOL for a, b in zip(s.y, t.y))
                   for t in kept):
            kept.append(s)
    return kept


def _scan_column(plane: ScanPlane, x: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    delta, zeeman, ratio = plane.column_params(x)
    cs = _CellSolver(delta, zeeman, ratio)
    n = plane.n_y
    m = zeeman.m
    xi = np.empty(n)
    en = np.empty(n)
    yv = np.empty((n, m))
    fl = np.zeros(n, dtype=bool)
    carry: list[GroundState] = []
    for iy, nu in enumerate(plane.nu_vals):
        st, carry, failed = cs.solve(float(nu), carry)
        xi[iy] = st.xi
        en[iy] = st.energy_per_atom
        yv[iy] = st.y
        fl[iy] = failed
    return xi, en, yv, fl


# ---------------------------------------------------------------------------
# branch labeling


def _local_median(values: np.ndarray, size: int = 11) -> np.ndarray:
    from scipy.ndimage import median_filter

    return median_filter(values, size=size, mode="nearest")


def _track_state(state: GroundState, x: float, nu: float, plane: ScanPlane
                 ) -> GroundState | None:
    """Continue a state's basin to the cell at (x, nu); None when it vanished."""
    delta, zeeman, ratio = plane.column_params(x)
    if ratio == 0.0:
        return _undriven_track(state.xi, delta, zeeman, nu)
    p = ModelParams(delta, nu, zeeman)
    d = DriveParams(ratio)
    v0 = np.concatenate([[x_from_xi(state.xi, p)], state.y])
    v, e, gn = local_descent(v0, p, d)
    if gn >= GRAD_TOL or not np.isfinite(e):
        return None
    return GroundState.from_xy(v[0], v[1:], p, d, grad_norm=gn)


def _coexistence_edge(plane: ScanPlane, sa: GroundState, xa: float, nua: float,
                      sb: GroundState, xb: float, nub: float) -> bool:
    """True when the two cells' ground states live in distinct coexisting basins.

    Tracks each cell's state to the other cell's exact parameters: within one
    (possibly steep) branch the tracked minimum lands on the neighbor's state;
    across a first-order line it stays on its own branch.
    """
    tol = 10 * DEDUP_TOL * (1.0 + abs(sa.xi) + abs(sb.xi))
    ta = _track_state(sa, xb, nub, plane)
    if ta is not None and abs(abs(ta.xi) - abs(sb.xi)) > tol:
        return True
    tb = _track_state(sb, xa, nua, plane)
    return tb is not None and abs(abs(tb.xi) - abs(sa.xi)) > tol


def _detect_cut_edges(plane: ScanPlane, xi: np.ndarray, y: np.ndarray,
                      np_mask: np.ndarray) -> list[tuple[float, float]]:
    """Confirmed first-order SP-SP edges: (|xi| midpoint, jump) per edge."""
    axi = np.abs(xi)
    sp = ~np_mask
    floor = 1e-3 * (1.0 + float(axi.max(initial=0.0)))
    cuts: list[tuple[float, float]] = []
    for axis in (0, 1):
        d = np.abs(np.diff(axi, axis=axis))
        both_sp = sp[:-1, :] & sp[1:, :] if axis == 0 else sp[:, :-1] & sp[:, 1:]
        med = _local_median(d)
        cand = both_sp & (d > np.maximum(3.0 * med, floor))
        idxs = np.argwhere(cand)
        for i, j in idxs:
            if axis == 0:
                (ia, ja), (ib, jb) = (i, j), (i + 1, j)
            else:
                (ia, ja), (ib, jb) = (i, j), (i, j + 1)
            xa, xb = plane.x_vals[ia], plane.x_vals[ib]
            nua, nub = plane.nu_vals[ja], plane.nu_vals[jb]
            sa = _cell_state(plane, xi, y, ia, ja)
            sb = _cell_state(plane, xi, y, ib, jb)
            cs = _CellSolver(*plane.column_params(float(0.5 * (xa + xb))))
            if _coexistence_edge(cs, float(0.5 * (nua + nub)), sa, sb):
                cuts.append((0.5 * (axi[ia, ja] + axi[ib, jb]),
                             d[i, j] if axis == 0 else d[i, j]))
    return cuts


def _cell_state(plane: ScanPlane, xi: np.ndarray, y: np.ndarray, i: int, j: int) -> GroundState:
    delta, zeeman, ratio = plane.column_params(float(plane.x_vals[i]))
    p = ModelParams(delta, float(plane.nu_vals[j]), zeeman)
    d = DriveParams(ratio)
    if ratio > 0:
        return GroundState.from_xy(x_from_xi(xi[i, j], p), np.asarray(y[i, j]), p, d)
    return GroundState.from_xi_undriven(xi[i, j], p)


def _cluster_thresholds(midpoints: list[float]) -> list[float]:
    """Split sorted jump midpoints at large relative gaps; one level per cluster."""
    if not midpoints:
        return []
    vals = sorted(midpoints)
    clusters = [[vals[0]]]
    for v in vals[1:]:
        if v > 1.6 * clusters[-1][-1]:
            clusters.append([v])
        else:
            clusters[-1].append(v)
    return [float(np.median(c)) for c in clusters]


def _assign_labels(xi: np.ndarray, thresholds: list[float]) -> np.ndarray:
    axi = np.abs(xi)
    labels = np.zeros(xi.shape, dtype=int)
    sp = axi > XI_TOL
    labels[sp] = 1
    for t in sorted(thresholds):
        labels[sp & (axi >= t)] += 1
    return labels


# ---------------------------------------------------------------------------
# boundary tracing on the label grid


def _trace_polylines(x_vals: np.ndarray, nu_vals: np.ndarray, labels: np.ndarray
                     ) -> list[dict]:
    """Chains of cell-edge midpoints separating distinct labels.

    Returns dicts with keys: pair, points, end_interior (2 bools).
    Chains stop at grid borders and at junction corners (>= 3 labels).
    """
    n_x, n_y = labels.shape
    edges: dict[tuple, dict] = {}

    def add_edge(key, pair, mid):
        edges[key] = dict(pair=pair, mid=mid, links=[])

    for i in range(n_x - 1):
        for j in range(n_y):
            a, b = labels[i, j], labels[i + 1, j]
            if a != b:
                add_edge(("x", i, j), tuple(sorted((int(a), int(b)))),
                         (0.5 * (x_vals[i] + x_vals[i + 1]), nu_vals[j]))
    for i in range(n_x):
        for j in range(n_y - 1):
            a, b = labels[i, j], labels[i, j + 1]
            if a != b:
                add_edge(("y", i, j), tuple(sorted((int(a), int(b)))),
                         (x_vals[i], 0.5 * (nu_vals[j] + nu_vals[j + 1])))

    junction_corners = set()
    for ci in range(n_x - 1):
        for cj in range(n_y - 1):
            block = {int(labels[ci, cj]), int(labels[ci + 1, cj]),
                     int(labels[ci, cj + 1]), int(labels[ci + 1, cj + 1])}
            incident = [k for k in (("x", ci, cj), ("x", ci, cj + 1),
                                    ("y", ci, cj), ("y", ci + 1, cj)) if k in edges]
            if len(block) >= 3:
                junction_corners.add((ci, cj))
                continue
            if len(block) == 2:
                pairs: dict[tuple, list] = {}
                for k in incident:
                    pairs.setdefault(edges[k]["pair"], []).append(k)
                for ks in pairs.values():
                    if len(ks) == 2:
                        edges[ks[0]]["links"].append(ks[1])
                        edges[ks[1]]["links"].append(ks[0])
                    elif len(ks) == 4:
                        # saddle block: connect x-edges to y-edges consistently
                        xs = [k for k in ks if k[0] == "x"]
                        ys = [k for k in ks if k[0] == "y"]
                        for ke, kf in zip(xs, ys):
                            edges[ke]["links"].append(kf)
                            edges[kf]["links"].append(ke)

    def corner_of(key_a, key_b):
        return None  # adjacency already encodes corners; not needed downstream

    visited = set()
    polylines = []
    order_keys = sorted(edges.keys())
    for start in order_keys:
        if start in visited:
            continue
        if len(edges[start]["links"]) > 1:
            continue  # start walking only from chain endpoints
        chain = [start]
        visited.add(start)
        cur, prev = start, None
        while True:
            nxt = [k for k in edges[cur]["links"] if k != prev]
            if not nxt or nxt[0] in visited:
                break
            prev, cur = cur, nxt[0]
            visited.add(cur)
            chain.append(cur)
        polylines.append(chain)
    # remaining cycles
    for start in order_keys:
        if start in visited:
            continue
        chain = [start]
        visited.add(start)
        cur, prev = start, None
        while True:
            nxt = [k for k in edges[cur]["links"] if k != prev]
            if not nxt or nxt[0] in visited:
                break
            prev, cur = cur, nxt[0]
            visited.add(cur)
            chain.append(cur)
        polylines.append(chain)

    out = []
    for chain in polylines:
        pair = edges[chain[0]]["pair"]
        pts = np.array([edges[k]["mid"] for k in chain])
        ends = []
        for end_key in (chain[0], chain[-1]):
            kind, i, j = end_key
            n_links = len(edges[end_key]["links"])
            if kind == "x":
                on_border = j in (0, n_y - 1)
            else:
                on_border = i in (0, n_x - 1)
            ends.append(len(chain) > 1 and n_links <= 1 and not on_border)
        out.append(dict(pair=pair, points=pts, end_interior=(ends[0], ends[1])))
    return out


# ---------------------------------------------------------------------------
# transition order classification


def classify_transition(path: list[GroundState], j_tol: float = J_TOL) -> str:
    """Order of the single transition crossed by a uniform-step path.

    The order-parameter jump across the boundary is measured at three step
    refinements (strides 4, 2, 1 around the crossing); the transition is
    first order when the jump exceeds ``j_tol``.  All three levels must
    agree, otherwise :class:`UnresolvedTransition` is raised.
    """
    axi = np.array([abs(s.xi) for s in path])
    if len(axi) < 10:
        raise DomainError("path must contain at least 10 states")
    jumps = np.abs(np.diff(axi))
    i = int(np.argmax(jumps))
    levels = []
    for m in (1, 2, 4):
        lo, hi = i + 1 - m, i + m
        if lo < 0 or hi >= len(axi):
            raise DomainError("boundary too close to the path ends for refinement")
        levels.append(abs(axi[hi] - axi[lo]))
    verdicts = [j > j_tol for j in levels]
    if all(verdicts):
        return FIRST_ORDER
    if not any(verdicts):
        return SECOND_ORDER
    raise UnresolvedTransition(
        f"refinement levels disagree: jumps={levels}, j_tol={j_tol}"
    )


@dataclass(frozen=True)
class ProbeResult:
    nu: float                  # boundary position at this axis value
    order: str
    jump: float
    state_above: GroundState | None = None


class TransitionProbe:
    """Classifies the order of the phase transition in nu at fixed axis value.

    Tracks the two competing branches through a bisection of the crossing;
    branches that merge mark a continuous transition located by the onset of
    the order parameter.
    """

    def __init__(self, delta: float, zeeman: ZeemanSet, ratio: float,
                 probe_step: float = PROBE_STEP, j_tol: float = J_TOL,
                 xi_tol: float = XI_TOL):
        self.cs = _CellSolver(delta, zeeman, ratio)
        self.step = probe_step
        self.j_tol = j_tol
        self.xi_tol = xi_tol

    # -- branch-tracked local solves ------------------------------------
    def _track(self, state: GroundState, nu: float) -> GroundState | None:
        cs = self.cs
        if not cs.driven:
            return _undriven_track(state.xi, cs.delta, cs.zeeman, nu)
        p = cs.params(nu)
        d = DriveParams(cs.ratio)
        v0 = np.concatenate([[x_from_xi(state.xi, p)], state.y])
        v, e, gn = local_descent(v0, p, d)
        if gn >= GRAD_TOL or not np.isfinite(e):
            return None
        return GroundState.from_xy(v[0], v[1:], p, d, grad_norm=gn)

    def _global(self, nu: float) -> GroundState:
        st, _, _ = self.cs.solve(nu, [])
        return st

    def _best(self, nu: float, seeds: list[GroundState]) -> GroundState:
        cands = [t for t in (self._track(s, nu) for s in seeds) if t is not None]
        if not cands:
            return self._global(nu)
        return min(cands, key=lambda s: (s.energy_per_atom, abs(s.xi)))

    # -- probing ---------------------------------------------------------
    def locate(self, nu_lo: float, nu_hi: float) -> ProbeResult:
        """Locate and classify the transition inside [nu_lo, nu_hi]."""
        sa = self._global(nu_lo)
        sb = self._global(nu_hi)
        if abs(abs(sb.xi) - abs(sa.xi)) < self.xi_tol:
            raise DomainError(
                f"no transition in window [{nu_lo}, {nu_hi}]: "
                f"xi {sa.xi:.3e} -> {sb.xi:.3e}"
            )
        a, b = nu_lo, nu_hi
        merged = False
        while b - a > 1e-12:
            mid = 0.5 * (a + b)
            ta = self._track(sa, mid)
            tb = self._track(sb, mid)
            if ta is None and tb is None:
                merged = True
                break
            if ta is None:
                a, sa = mid, self._best(mid, [sb])
                sa = sa if abs(sa.xi) < self.xi_tol else self._global(a)
                merged = True
                break
            if tb is None:
                ta2 = ta
                b, sb = mid, ta2
                merged = True
                break
            if abs(abs(ta.xi) - abs(tb.xi)) < 10 * DEDUP_TOL:
                merged = True
                break
            if ta.energy_per_atom <= tb.energy_per_atom:
                a, sa = mid, ta
            else:
                b, sb = mid, tb
        if merged:
            return self._locate_onset(nu_lo, nu_hi)
        nu_b = 0.5 * (a + b)
        path = self._path(nu_b, [sa, sb])
        order = classify_transition(path, self.j_tol)
        jump = self._jump(path)
        return ProbeResult(nu=nu_b, order=order, jump=jump, state_above=sb)

    def _locate_onset(self, nu_lo: float, nu_hi: float) -> ProbeResult:
        """Continuous-onset location by bisection on |xi| > xi_tol."""
        a, b = nu_lo, nu_hi
        sb = self._global(nu_hi)
        sa = self._global(nu_lo)
        while b - a > 1e-12:
            mid = 0.5 * (a + b)
            t = self._best(mid, [sb, sa])
            if abs(t.xi) > self.xi_tol:
                b, sb = mid, t
            else:
                a, sa = mid, t
        nu_b = 0.5 * (a + b)
        path = self._path(nu_b, [sa, sb])
        order = classify_transition(path, self.j_tol)
        return ProbeResult(nu=nu_b, order=order, jump=self._jump(path), state_above=sb)

    def _path(self, nu_b: float, seeds: list[GroundState]) -> list[GroundState]:
        nus = [nu_b + (j - 4.5) * self.step for j in range(10)]
        return [self._best(nu, seeds) for nu in nus]

    def _jump(self, path: list[GroundState]) -> float:
        axi = np.array([abs(s.xi) for s in path])
        i = int(np.argmax(np.abs(np.diff(axi))))
        return float(abs(axi[i + 1] - axi[i]))


def np_stability_nu(delta: float, zeeman: ZeemanSet, ratio: float) -> float:
    """Coupling at which the normal phase loses linear stability.

    Schur-complement condition on the Hessian of the driven energy at the
    normal-phase spin pattern; valid for sign-symmetric Zeeman sets (where
    the normal phase is a stationary point).  Serves as a window estimate
    for boundary searches and as an independent oracle for second-order
    boundary locations.
    """
    k = zeeman.array
    m = zeeman.m
    rj = np.sqrt(delta**2 + k * k)
    y = np.sign(k) * np.sqrt(np.maximum(1.0 - delta / rj, 0.0))
    one_m_y2 = delta / rj
    two_m_y2 = 1.0 + delta / rj
    sp = 2.0 * one_m_y2 / np.sqrt(two_m_y2)
    spp = -2.0 * y * (3.0 - y * y) / two_m_y2**1.5
    a = 1.0 / m + (2.0 * delta**2 * ratio**2 / m**2) * float((1.0 / rj).sum())
    c = np.diag(-(k / (2.0 * m)) * spp + delta / m) \
        + (ratio**2 / (4.0 * m * m)) * np.outer(sp, sp)
    bt = sp / (2.0 * m)
    quad = float(bt @ np.linalg.solve(c, bt))
    return a / quad


@dataclass(frozen=True)
class BoundaryTrace:
    """Order-classified probes along one NP-SP or SP-SP boundary."""

    kind: str
    xs: np.ndarray
    nus: np.ndarray
    orders: tuple[str, ...]
    jumps: tuple[float, ...]
    probe_factory: object        # callable x -> TransitionProbe
    window_fn: object            # callable x -> (nu_lo, nu_hi)

    def probe_at(self, x: float) -> ProbeResult:
        probe = self.probe_factory(x)
        lo, hi = self.window_fn(x)
        return probe.locate(lo, hi)


def trace_np_boundary(plane: ScanPlane, n_probes: int = 25,
                      window_fn=None) -> BoundaryTrace:
    """Trace the NP-SP boundary of a plane with order probes at n_probes columns."""
    xs = np.linspace(plane.x_lo, plane.x_hi, n_probes)

    def factory(x):
        delta, zeeman, ratio = plane.column_params(float(x))
        return TransitionProbe(delta, zeeman, ratio)

    def default_window(x):
        delta, zeeman, ratio = plane.column_params(float(x))
        nu_s = np_stability_nu(delta, zeeman, ratio)
        return max(0.02 * nu_s, 1e-4), 1.1 * nu_s

    wfn = window_fn or default_window
    nus, orders, jumps = [], [], []
    for x in xs:
        res = factory(x).locate(*wfn(float(x)))
        nus.append(res.nu)
        orders.append(res.order)
        jumps.append(res.jump)
    return BoundaryTrace(
        kind="NP-SP", xs=xs, nus=np.array(nus), orders=tuple(orders),
        jumps=tuple(jumps), probe_factory=factory, window_fn=wfn,
    )


# ---------------------------------------------------------------------------
# the scan driver


def scan(plane: ScanPlane, n_probes_per_boundary: int = 3) -> PhaseMap:
    """Solve every cell, label phases, trace and classify boundaries."""
    x_vals = plane.x_vals
    nu_vals = plane.nu_vals
    m = plane.column_params(float(x_vals[0]))[1].m
    n_x, n_y = plane.n_x, plane.n_y
    xi = np.empty((n_x, n_y))
    en = np.empty((n_x, n_y))
    yv = np.empty((n_x, n_y, m))
    fl = np.zeros((n_x, n_y), dtype=bool)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x: _scan_column(plane, float(x)), x_vals))
    else:
        results = [_scan_column(plane, float(x)) for x in x_vals]
    for ix, (cxi, cen, cy, cfl) in enumerate(results):
        xi[ix], en[ix], yv[ix], fl[ix] = cxi, cen, cy, cfl

    np_mask = np.abs(xi) <= XI_TOL
    cuts = _detect_cut_edges(plane, xi, yv, np_mask)
    thresholds = _cluster_thresholds([c[0] for c in cuts])
    labels = _assign_labels(xi, thresholds)

    fine_x = fine_nu = fine_xi = fine_labels = None
    if plane.refine:
        fine_x, fine_nu, fine_xi, fine_labels = _refine_bands(
            plane, xi, labels, thresholds)

    lx, lnu, llab = (fine_x, fine_nu, fine_labels) if fine_labels is not None \
        else (x_vals, nu_vals, labels)
    raw = _trace_polylines(lx, lnu, llab)
    boundaries = []
    for rb in raw:
        orders, ts = _probe_polyline(plane, rb, n_probes_per_boundary)
        tag = _consensus(orders)
        boundaries.append(Boundary(
            pair=rb["pair"], points=rb["points"], order=tag,
            probe_orders=tuple(orders), probe_ts=tuple(ts),
            end_interior=rb["end_interior"],
        ))

    return PhaseMap(
        plane=plane, x_vals=x_vals, nu_vals=nu_vals, xi=xi, energy=en, y=yv,
        labels=labels, flags=fl, boundaries=tuple(boundaries),
        thresholds=tuple(thresholds), fine_x=fine_x, fine_nu=fine_nu,
        fine_xi=fine_xi, fine_labels=fine_labels,
    )


def _refine_bands(plane: ScanPlane, xi: np.ndarray, labels: np.ndarray,
                  thresholds: list[float]):
    """4x re-solve in a band around every label change."""
    from scipy.ndimage import binary_dilation

    n_x, n_y = labels.shape
    band = np.zeros((n_x, n_y), dtype=bool)
    band[:-1, :] |= labels[:-1, :] != labels[1:, :]
    band[1:, :] |= labels[:-1, :] != labels[1:, :]
    band[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    band[:, 1:] |= labels[:, :-1] != labels[:, 1:]
    band = binary_dilation(band, iterations=1)

    fx = np.linspace(plane.x_lo, plane.x_hi, 4 * (n_x - 1) + 1)
    fnu = np.linspace(plane.nu_lo, plane.nu_hi, 4 * (n_y - 1) + 1)
    fxi = np.empty((fx.size, fnu.size))
    # parent indices by nearest base grid point
    px = np.clip(np.round((fx - plane.x_lo) / (plane.x_vals[1] - plane.x_vals[0])), 0, n_x - 1).astype(int)
    py = np.clip(np.round((fnu - plane.nu_lo) / (plane.nu_vals[1] - plane.nu_vals[0])), 0, n_y - 1).astype(int)
    fxi[:] = xi[np.ix_(px, py)]

    cols = [i for i in range(fx.size) if band[px[i], :].any()]

    def refine_col(i):
        x = float(fx[i])
        delta, zeeman, ratio = plane.column_params(x)
        cs = _CellSolver(delta, zeeman, ratio)
        out = {}
        carry: list[GroundState] = []
        for j in range(fnu.size):
            if not band[px[i], py[j]]:
                carry = []
                continue
            st, carry, _ = cs.solve(float(fnu[j]), carry)
            out[j] = st.xi
        return i, out

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            updates = list(pool.map(refine_col, cols))
    else:
        updates = [refine_col(i) for i in cols]
    for i, out in updates:
        for j, v in out.items():
            fxi[i, j] = v
    flab = _assign_labels(fxi, thresholds)
    # outside the band, trust the base labels
    outside = ~band[np.ix_(px, py)]
    flab[outside] = labels[np.ix_(px, py)][outside]
    return fx, fnu, fxi, flab


def _probe_polyline(plane: ScanPlane, rb: dict, n_probes: int) -> tuple[list[str], list[int]]:
    pts = rb["points"]
    n = len(pts)
    if n == 0:
        return [], []
    ts = sorted({int(round(f * (n - 1))) for f in np.linspace(0.2, 0.8, max(1, n_probes))})
    orders = []
    kept = []
    for t in ts:
        x, nu = float(pts[t][0]), float(pts[t][1])
        delta, zeeman, ratio = plane.column_params(x)
        probe = TransitionProbe(delta, zeeman, ratio)
        pad = 3.0 * max(plane.nu_vals[1] - plane.nu_vals[0], 1e-6)
        try:
            res = probe.locate(max(nu - pad, 1e-6), nu + pad)
        except (DomainError, ConvergenceFailure):
            continue
        except UnresolvedTransition:
            orders.append("unresolved")
            kept.append(t)
            continue
        orders.append(res.order)
        kept.append(t)
    return orders, kept


def _consensus(orders: list[str]) -> str:
    distinct = {o for o in orders if o != "unresolved"}
    if not distinct:
        return "unresolved"
    if len(distinct) == 1:
        return next(iter(distinct))
    return "mixed"
