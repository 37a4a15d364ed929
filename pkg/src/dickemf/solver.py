"""Ground-state solvers for the undriven (1-D) and driven ((M+1)-D) functionals.

The undriven problem is solved exactly by bracketing sign changes of dF/dxi
on a dense grid and polishing with bisection + Newton.  The driven energy is
minimized by multi-start local descent (L-BFGS-B on the analytic gradient,
then Newton polish) from a deterministic seed set: quasi-random starts plus
structured starts built from the undriven minimizers and the normal-phase
spin pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import ConvergenceFailure
from .model import (
    SQRT2,
    Y_MARGIN,
    DriveParams,
    GroundState,
    ModelParams,
    eval_dF_grid,
    eval_e_batch,
    eval_e_driven,
    eval_e_gradient,
    eval_F_derivs,
    x_from_xi,
)

DEFAULT_SEED = 0x5EED
N_STARTS = 64
GRID_POINTS = 4001
GRAD_TOL = 1e-9
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class MinimaReport:
    """All local minima found, deduplicated and sorted by energy."""

    global_state: GroundState
    locals: tuple[GroundState, ...]
    n_starts: int
    converged_fraction: float

    @property
    def xi(self) -> float:
        return self.global_state.xi


def xi_max_bound(p: ModelParams) -> float:
    """Search bound: coercivity of xi^2/nu guarantees F' > 0 beyond this."""
    return p.zeeman.k_scale + p.nu * p.m + 10.0


def _polish_minimum(xi: float, p: ModelParams) -> float | None:
    """Newton-polish a minimum candidate; None unless dF ~ 0 and F curves up."""
    for _ in range(6):
        d1, d2 = eval_F_derivs(xi, p)
        if d2 <= 0 or abs(d1) < 1e-16:
            break
        xi -= d1 / d2
    d1, d2 = eval_F_derivs(xi, p)
    if abs(d1) > 1e-10:
        return None
    if d2 > 0:
        return xi
    if d2 >= -1e-12:
        # exactly critical cells: quartic-degenerate minimum, verify by value
        # (steps large enough for the quartic term to clear float resolution)
        from .model import eval_F

        f0 = eval_F(xi, p)
        for h in (0.03, 0.1, 0.3):
            if eval_F(xi + h, p) > f0 and eval_F(xi - h, p) > f0:
                return xi
    return None


def _bisect_df(a: float, b: float, p: ModelParams) -> float:
    for _ in range(90):
        mid = 0.5 * (a + b)
        if eval_F_derivs(mid, p)[0] < 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _upward_brackets(xs: np.ndarray, df: np.ndarray) -> list[tuple[float, float]]:
    """Intervals between consecutive nonzero dF samples going - to +.

    Exact zeros (e.g. xi = 0 on a symmetric grid) are skipped so that minima
    adjacent to a stationary grid point are still bracketed.
    """
    nz = np.nonzero(df != 0.0)[0]
    sgn = np.sign(df[nz])
    out = []
    for t in np.nonzero((sgn[:-1] < 0) & (sgn[1:] > 0))[0]:
        out.append((float(xs[nz[t]]), float(xs[nz[t + 1]])))
    return out


def _minima_in_bracket(a: float, b: float, p: ModelParams) -> list[float]:
    """Minima inside one - to + bracket of dF.

    The bracket usually holds a single root; near a continuous onset it can
    hold min-max-min with separations below the coarse grid, in which case a
    fine sub-grid isolates the individual crossings.
    """
    probe = np.linspace(a, b, 65)
    dfp = eval_dF_grid(probe, p)
    sub = _upward_brackets(probe, dfp)
    if len(sub) <= 1:
        xi = _polish_minimum(_bisect_df(a, b, p), p)
        if xi is not None:
            return [xi]
    fine = np.linspace(a, b, 16385)
    dfx = eval_dF_grid(fine, p)
    out = []
    for i in np.nonzero(dfx == 0.0)[0]:
        root = _polish_minimum(float(fine[i]), p)
        if root is not None:
            out.append(root)
    for fa, fb in _upward_brackets(fine, dfx):
        root = _polish_minimum(_bisect_df(fa, fb, p), p)
        if root is not None:
            out.append(root)
    return out


def minimize_undriven(p: ModelParams) -> MinimaReport:
    """All local minima of F over xi, canonical xi >= 0 for symmetric sets."""
    ximax = xi_max_bound(p)
    xs = np.linspace(-ximax, ximax, GRID_POINTS)
    df = eval_dF_grid(xs, p)

    minima: list[float] = []
    # grid points that are exact stationary points (xi = 0 on symmetric sets)
    for i in np.nonzero(df == 0.0)[0]:
        root = _polish_minimum(float(xs[i]), p)
        if root is not None:
            minima.append(root)
    for a, b in _upward_brackets(xs, df):
        minima.extend(_minima_in_bracket(a, b, p))

    states = [GroundState.from_xi_undriven(xi, p) for xi in minima]

    if p.zeeman.is_symmetric():
        # canonical xi >= 0 representative of each mirror pair
        states = [
            GroundState.from_xi_undriven(-s.xi, p) if s.xi < -1e-12 else s
            for s in states
        ]
    states = _dedup_and_sort(states)
    return MinimaReport(
        global_state=states[0],
        locals=tuple(states),
        n_starts=GRID_POINTS,
        converged_fraction=1.0,
    )


def _dedup_and_sort(states: list[GroundState]) -> list[GroundState]:
    states = sorted(states, key=lambda s: (s.energy_per_atom, abs(s.xi), s.xi))
    kept: list[GroundState] = []
    for s in states:
        dup = any(
            abs(s.xi - t.xi) < DEDUP_TOL
            and all(abs(a - b) < DEDUP_TOL for a, b in zip(s.y, t.y))
            for t in kept
        )
        if not dup:
            kept.append(s)
    return kept


def structured_starts(p: ModelParams, d: DriveParams) -> list[np.ndarray]:
    """Deterministic starts: NP spin pattern, undriven minimizers, sign patterns."""
    k = p.zeeman.array
    m = p.m
    rj = np.sqrt(p.delta**2 + k * k)
    y_np = np.sign(k) * np.sqrt(np.maximum(1.0 - p.delta / rj, 0.0))
    starts = [
        np.concatenate([[0.0], y_np]),
        np.concatenate([[0.0], np.zeros(m)]),
        np.concatenate([[0.0], np.sign(-k) * 1.0]),
        np.concatenate([[0.0], np.sign(k) * 1.0]),
    ]
    und = minimize_undriven(p)
    for st in und.locals:
        x0 = x_from_xi(st.xi, p)
        y0 = np.asarray(st.y)
        starts.append(np.concatenate([[x0], y0]))
        if st.xi > 0:
            # mirror partner; canonical filtering happens after descent
            starts.append(np.concatenate([[-x0], -y0[::-1]]))
    return starts


def quasi_random_starts(p: ModelParams, n: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points over a compact box in (X, Y)."""
    m = p.m
    xmax = x_from_xi(xi_max_bound(p), p)
    sob = qmc.Sobol(d=m + 1, scramble=True, seed=seed)
    u = sob.random(n)
    lo = np.concatenate([[-xmax], -1.2 * np.ones(m)])
    hi = np.concatenate([[xmax], 1.2 * np.ones(m)])
    return lo + u * (hi - lo)


def local_descent(v0: np.ndarray, p: ModelParams, d: DriveParams,
                  max_iter: int = 600) -> tuple[np.ndarray, float, float]:
    """One descent to a stationary point; returns (v, energy, grad_norm)."""
    m = p.m
    xmax = x_from_xi(xi_max_bound(p), p)
    ylim = SQRT2 - Y_MARGIN
    bounds = [(-xmax, xmax)] + [(-ylim, ylim)] * m

    def fun(v):
        e = eval_e_driven(v[0], v[1:], p, d)
        gr = eval_e_gradient(v[0], v[1:], p, d)
        return e, gr

    v0 = np.clip(v0, [b[0] for b in bounds], [b[1] for b in bounds])
    res = optimize.minimize(
        fun, v0, jac=True, method="L-BFGS-B", bounds=bounds,
        options=dict(maxiter=max_iter, ftol=1e-18, gtol=1e-12),
    )
    v = res.x
    polish_steps = 6 if max_iter >= 10 else 0
    v, e, gn = _newton_polish(v, p, d, bounds, steps=polish_steps)
    return v, e, gn


def _newton_polish(v, p, d, bounds, steps=6):
    """Drive the gradient norm toward machine level with damped Newton."""
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    e = eval_e_driven(v[0], v[1:], p, d)
    g = eval_e_gradient(v[0], v[1:], p, d)
    gn = float(np.linalg.norm(g))
    for _ in range(steps):
        if gn < 1e-12:
            break
        h = _fd_hessian(v, p, d, box=(lo, hi))
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            break
        v_new = np.clip(v + step, lo, hi)
        e_new = eval_e_driven(v_new[0], v_new[1:], p, d)
        g_new = eval_e_gradient(v_new[0], v_new[1:], p, d)
        gn_new = float(np.linalg.norm(g_new))
        if not np.isfinite(e_new) or gn_new >= gn:
            break
        v, e, g, gn = v_new, e_new, g_new, gn_new
    return v, e, gn


def _fd_hessian(v: np.ndarray, p: ModelParams, d: DriveParams,
                step: float = 1e-6, box=None) -> np.ndarray:
    """Central-difference Hessian of the driven energy from analytic gradients.

    Sample points are clamped into the admissible box; coordinates pinned at
    a bound fall back to one-sided differences.
    """
    n = len(v)
    if box is None:
        xmax = max(abs(v[0]) + 1.0, 1.0)
        lo = np.array([-xmax] + [-SQRT2 + Y_MARGIN] * (n - 1))
        hi = np.array([xmax] + [SQRT2 - Y_MARGIN] * (n - 1))
    else:
        lo, hi = box
    h = np.empty((n, n))
    for i in range(n):
        dv = np.zeros(n)
        dv[i] = step
        vp = np.clip(v + dv, lo, hi)
        vm = np.clip(v - dv, lo, hi)
        gp = eval_e_gradient(vp[0], vp[1:], p, d)
        gm = eval_e_gradient(vm[0], vm[1:], p, d)
        h[i] = (gp - gm) / (vp[i] - vm[i])
    return 0.5 * (h + h.T)


def hessian_min_eig(state: GroundState, p: ModelParams, d: DriveParams,
                    step: float = 1e-5) -> float:
    """Smallest eigenvalue estimate of the numerical Hessian at a state."""
    v = np.concatenate([[x_from_xi(state.xi, p)], state.y])
    h = _fd_hessian(v, p, d, step=step)
    return float(np.linalg.eigvalsh(h)[0])


def minimize_driven(p: ModelParams, d: DriveParams, *,
                    n_starts: int = N_STARTS, seed: int = DEFAULT_SEED,
                    extra_seeds: list[np.ndarray] | None = None,
                    max_iter: int = 600) -> MinimaReport:
    """Multi-start minimization of the driven per-atom energy.

    Raises
    ------
    ConvergenceFailure
        When fewer than half of the starts reach the gradient-norm target;
        the exception carries the best-effort report.
    """
    starts = structured_starts(p, d)
    if n_starts > 0:
        starts.extend(quasi_random_starts(p, n_starts, seed))
    if extra_seeds:
        starts.extend(np.asarray(s, dtype=float) for s in extra_seeds)

    results = []
    n_conv = 0
    for v0 in starts:
        v, e, gn = local_descent(v0, p, d, max_iter=max_iter)
        ok = gn < GRAD_TOL
        n_conv += ok
        if ok and np.isfinite(e):
            results.append(GroundState.from_xy(v[0], v[1:], p, d, grad_norm=gn))

    frac = n_conv / len(starts)
    states = _canonicalize(results, p, d)
    # a zero gradient alone admits symmetry-protected saddles (e.g. the NP
    # above its instability); keep genuine minima only
    states = [s for s in states if hessian_min_eig(s, p, d) > -1e-8]
    if not states:
        raise ConvergenceFailure(
            f"no start converged to gradient norm < {GRAD_TOL}", report=None
        )
    report = MinimaReport(
        global_state=states[0],
        locals=tuple(states),
        n_starts=len(starts),
        converged_fraction=frac,
    )
    if frac < 0.5:
        raise ConvergenceFailure(
            f"only {frac:.0%} of {len(starts)} starts converged", report=report
        )
    return report


def _canonicalize(states: list[GroundState], p: ModelParams, d: DriveParams
                  ) -> list[GroundState]:
    """Dedup; for symmetric sets replace -xi minima by the +xi representative."""
    if p.zeeman.is_symmetric():
        flipped = []
        for s in states:
            if s.xi < -1e-12:
                x = -x_from_xi(s.xi, p)
                y = -np.asarray(s.y)[::-1]
                flipped.append(GroundState.from_xy(x, y, p, d, grad_norm=s.grad_norm))
            else:
                flipped.append(s)
        states = flipped
    return _dedup_and_sort(states)
