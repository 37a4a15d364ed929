"""Power-law fitting of the order parameter near second-order transitions.

xi(nu) ~ (nu - nu_c)^gamma on the superradiant side.  Because the critical
coupling carries grid error that biases the exponent, (gamma, nu_c) are fit
jointly: for each nu_c candidate a log-log linear regression gives gamma and
r^2, and the candidate maximizing r^2 wins (golden-section refinement after
a coarse bracket sweep).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadFit, InsufficientRange

MIN_DECADES = 1.5
MIN_POINTS = 20
R2_FLOOR = 0.999
N_CANDIDATES = 400
GOLDEN_TOL = 1e-14


@dataclass(frozen=True)
class ExponentFit:
    gamma: float
    gamma_err: float
    nu_c: float
    window: tuple[float, float]    # (min, max) fitted offsets nu - nu_c
    r_squared: float
    n_points: int


def _regress(log_x: np.ndarray, log_y: np.ndarray) -> tuple[float, float, float]:
    """OLS slope, 1-sigma slope error and r^2 of log y on log x."""
    n = len(log_x)
    xm = log_x.mean()
    ym = log_y.mean()
    sxx = float(((log_x - xm) ** 2).sum())
    sxy = float(((log_x - xm) * (log_y - ym)).sum())
    slope = sxy / sxx
    resid = log_y - (ym + slope * (log_x - xm))
    ss_res = float((resid**2).sum())
    ss_tot = float(((log_y - ym) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    var = ss_res / (n - 2) / sxx if n > 2 else 0.0
    return slope, math.sqrt(max(var, 0.0)), r2


def _r2_of(nu_c: float, nu: np.ndarray, xi: np.ndarray) -> float:
    off = nu - nu_c
    if off.min() <= 0:
        return -np.inf
    _, _, r2 = _regress(np.log(off), np.log(xi))
    return r2


def fit_exponent(samples, nu_c_hint: float,
                 bracket: float | None = None) -> ExponentFit:
    """Joint (gamma, nu_c) power-law fit of (nu, xi) samples.

    Parameters
    ----------
    samples : sequence of (nu, xi) pairs, xi > 0, sorted by nu, all on the
        superradiant side of the transition.
    nu_c_hint : initial guess for the critical coupling.
    bracket : half-width of the nu_c search interval; defaults to twice the
        smallest offset of the samples from the hint.

    Raises
    ------
    InsufficientRange
        Fewer than 20 points or less than 1.5 decades of offset span.
    BadFit
        Best r^2 below 0.999.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be (nu, xi) pairs")
    nu, xi = arr[:, 0], arr[:, 1]
    if np.any(xi <= 0):
        raise ValueError("xi values must be positive on the SP side")
    if len(nu) < MIN_POINTS:
        raise InsufficientRange(f"need >= {MIN_POINTS} samples, got {len(nu)}")

    nu_min = float(nu.min())
    if bracket is None:
        bracket = 2.0 * max(nu_min - nu_c_hint, 1e-12)
    hi_cap = nu_min * (1 - 1e-15) if nu_min > 0 else nu_min - 1e-15
    lo = nu_c_hint - bracket
    hi = min(nu_c_hint + bracket, hi_cap)
    if hi <= lo:
        lo = hi - max(abs(bracket), 1e-12)

    cands = np.linspace(lo, hi, N_CANDIDATES)
    best_i = 0
    best_r2 = -np.inf
    for i, c in enumerate(cands):
        r2 = _r2_of(float(c), nu, xi)
        if r2 > best_r2:  # strict: ties keep the smaller candidate
            best_r2, best_i = r2, i

    a = float(cands[max(best_i - 1, 0)])
    b = float(cands[min(best_i + 1, len(cands) - 1)])
    nu_c = _golden_max(lambda c: _r2_of(c, nu, xi), a, b)

    off = nu - nu_c
    decades = math.log10(off.max() / off.min())
    if decades < MIN_DECADES:
        raise InsufficientRange(
            f"samples span {decades:.2f} decades of nu - nu_c; need >= {MIN_DECADES}"
        )
    gamma, gamma_err, r2 = _regress(np.log(off), np.log(xi))
    if r2 < R2_FLOOR:
        raise BadFit(f"best r^2 = {r2:.6f} < {R2_FLOOR}")
    return ExponentFit(
        gamma=gamma, gamma_err=gamma_err, nu_c=float(nu_c),
        window=(float(off.min()), float(off.max())),
        r_squared=r2, n_points=len(nu),
    )


def _golden_max(f, a: float, b: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > GOLDEN_TOL:
        if fc >= fd:  # ties move toward smaller nu_c
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def logspaced_offsets(lo: float = 1e-6, hi: float = 1e-2, n: int = 200) -> np.ndarray:
    """Standard sampling offsets above nu_c for paper-comparison fits."""
    return np.logspace(math.log10(lo), math.log10(hi), n)
