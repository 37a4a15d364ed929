"""Core types and mean-field energy functionals.

Single-mode cavity field coupled to M atomic ensembles, each seeing its own
Zeeman coupling k_j (all energies in units of the field frequency, which is
fixed to 1).  The undriven ground state is governed by the one-dimensional
functional

    F(xi) = xi^2/nu - sum_j sqrt(delta^2 + (xi + k_j)^2),

with order parameter xi and dimensionless coupling nu = 2 g^2 / M.  Under a
periodic modulation of the Rabi coupling only the ratio r = A/Omega survives
in the effective model, and the per-atom energy becomes a function of
(X, Y_1..Y_M); see :func:`eval_e_driven`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as _special

from .errors import DegenerateDenominator, DomainError

SQRT2 = math.sqrt(2.0)

# |Y_j| must stay strictly below sqrt(2); gradients blow up at the edge.
Y_MARGIN = 1e-9

# xi magnitudes at or below this are classified as the normal phase.
XI_TOL = 1e-6

DENOM_TOL = 1e-14


@dataclass(frozen=True)
class ZeemanSet:
    """Ordered per-cavity Zeeman coefficients k_j (units of the field frequency)."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 1:
            raise DomainError("ZeemanSet needs at least one cavity")
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("Zeeman couplings must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def k_scale(self) -> float:
        return max(abs(v) for v in self.values)

    def is_symmetric(self) -> bool:
        """True when the coupling multiset is invariant under k -> -k."""
        return sorted(self.values) == sorted(-v for v in self.values)

    @classmethod
    def k2(cls) -> "ZeemanSet":
        return cls((-1.0, 1.0))

    @classmethod
    def k3(cls) -> "ZeemanSet":
        return cls((-1.0, 0.0, 1.0))

    @classmethod
    def k4(cls) -> "ZeemanSet":
        return cls((-1.5, -0.5, 2.0, 3.0))

    @classmethod
    def k5(cls) -> "ZeemanSet":
        return cls((-2.0, -1.0, 0.0, 1.0, 2.0))

    @classmethod
    def k_epsilon(cls, eps: float) -> "ZeemanSet":
        return cls((-float(eps), 0.0, float(eps)))

    PRESETS = ("K2", "K3", "K4", "K5")

    @classmethod
    def preset(cls, name: str) -> "ZeemanSet":
        table = {"K2": cls.k2, "K3": cls.k3, "K4": cls.k4, "K5": cls.k5}
        try:
            return table[name.upper()]()
        except KeyError:
            raise DomainError(f"unknown Zeeman preset {name!r}") from None


@dataclass(frozen=True)
class ModelParams:
    """Static model parameters (field frequency fixed to 1)."""

    delta: float
    nu: float
    zeeman: ZeemanSet

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise DomainError("delta must be positive and finite")
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise DomainError("nu must be positive and finite")

    @property
    def m(self) -> int:
        return self.zeeman.m

    @property
    def g(self) -> float:
        """Rabi coupling g implied by nu = 2 g^2 / M."""
        return math.sqrt(self.nu * self.m / 2.0)

    @classmethod
    def from_g(cls, delta: float, g: float, zeeman: ZeemanSet) -> "ModelParams":
        return cls(delta, 2.0 * g * g / zeeman.m, zeeman)


@dataclass(frozen=True)
class DriveParams:
    """Periodic-drive strength; only A/Omega enters the effective model."""

    ratio: float = 0.0

    def __post_init__(self):
        if not (self.ratio >= 0 and math.isfinite(self.ratio)):
            raise DomainError("drive ratio A/Omega must be >= 0 and finite")


# Phase labels: branch 0 is the normal phase, branches 1, 2, ... are
# superradiant branches ordered by increasing radiance |xi|.
NP = 0
SP_I = 1
SP_II = 2
SP_III = 3


def phase_name(branch: int) -> str:
    if branch == 0:
        return "NP"
    romans = {1: "I", 2: "II", 3: "III", 4: "IV", 5: "V"}
    return f"SP-{romans.get(branch, str(branch))}"


def xi_from_x(x: float, p: ModelParams) -> float:
    """Map the driven order parameter X to xi = 2 g X / sqrt(2M)."""
    return 2.0 * p.g * x / math.sqrt(2.0 * p.m)


def x_from_xi(xi: float, p: ModelParams) -> float:
    return math.sqrt(2.0 * p.m) * xi / (2.0 * p.g)


@dataclass(frozen=True)
class GroundState:
    """A mean-field state: order parameters plus per-cavity spin expectations.

    ``energy_per_atom`` uses the driven-model normalization (expectation of
    the effective Hamiltonian per atom); ``f_value`` is the raw value of the
    undriven functional F when defined (undriven states and zero drive),
    which is 2M times larger.  Minimizer locations, not energy magnitudes,
    are comparable across the two conventions.
    """

    xi: float
    y: tuple[float, ...]
    energy_per_atom: float
    spin_x: tuple[float, ...]
    spin_z: tuple[float, ...]
    f_value: float | None = None
    grad_norm: float = 0.0

    @classmethod
    def from_xi_undriven(cls, xi: float, p: ModelParams) -> "GroundState":
        """State at order parameter xi with spins relaxed to their optimum."""
        k = p.zeeman.array
        t = xi + k
        r = np.sqrt(p.delta**2 + t * t)
        s = t / r            # optimal Y_j sqrt(2 - Y_j^2)
        z = -p.delta / r     # optimal Y_j^2 - 1
        y = np.sign(s) * np.sqrt(1.0 + z)
        fval = eval_F(xi, p)
        return cls(
            xi=float(xi),
            y=tuple(float(v) for v in y),
            energy_per_atom=fval / (2.0 * p.m),
            spin_x=tuple(float(v) for v in -s),
            spin_z=tuple(float(v) for v in z),
            f_value=fval,
        )

    @classmethod
    def from_xy(cls, x: float, y: np.ndarray, p: ModelParams, d: DriveParams,
                grad_norm: float = 0.0) -> "GroundState":
        y = np.asarray(y, dtype=float)
        s = y * np.sqrt(2.0 - y * y)
        e = eval_e_driven(x, y, p, d)
        fval = 2.0 * p.m * e if d.ratio == 0.0 else None
        return cls(
            xi=xi_from_x(x, p),
            y=tuple(float(v) for v in y),
            energy_per_atom=float(e),
            spin_x=tuple(float(v) for v in -s),
            spin_z=tuple(float(v) for v in y * y - 1.0),
            f_value=fval,
            grad_norm=float(grad_norm),
        )

    @property
    def branch_is_np(self) -> bool:
        return abs(self.xi) <= XI_TOL


def eval_F(xi: float, p: ModelParams) -> float:
    """Undriven energy functional F(xi) = xi^2/nu - sum_j sqrt(delta^2 + (xi+k_j)^2).

    Uses an exactly-rounded sum so F(-xi) == F(xi) bit-for-bit when the
    Zeeman set is sign-symmetric.
    """
    terms = [math.sqrt(p.delta * p.delta + (xi + k) * (xi + k)) for k in p.zeeman.values]
    return xi * xi / p.nu - math.fsum(terms)


def eval_F_derivs(xi: float, p: ModelParams) -> tuple[float, float]:
    """First and second xi-derivatives of :func:`eval_F`."""
    d2 = p.delta * p.delta
    dF = 2.0 * xi / p.nu - math.fsum(
        (xi + k) / math.sqrt(d2 + (xi + k) * (xi + k)) for k in p.zeeman.values
    )
    d2F = 2.0 / p.nu - math.fsum(
        d2 / (d2 + (xi + k) * (xi + k)) ** 1.5 for k in p.zeeman.values
    )
    return dF, d2F


def eval_F_grid(xi: np.ndarray, p: ModelParams) -> np.ndarray:
    """Vectorized F over an array of xi values (solver hot path)."""
    t = xi[..., None] + p.zeeman.array
    return xi * xi / p.nu - np.sqrt(p.delta**2 + t * t).sum(axis=-1)


def eval_dF_grid(xi: np.ndarray, p: ModelParams) -> np.ndarray:
    t = xi[..., None] + p.zeeman.array
    return 2.0 * xi / p.nu - (t / np.sqrt(p.delta**2 + t * t)).sum(axis=-1)


def eval_nu_stationary(delta: float, xi: float, zeeman: ZeemanSet) -> float:
    """Coupling nu at which xi is a stationary point of F at this delta.

    nu(delta, xi) = 2 xi / sum_j (k_j + xi) [delta^2 + (k_j + xi)^2]^(-1/2)

    Raises
    ------
    DegenerateDenominator
        When the denominator sum vanishes (no finite stationary coupling),
        e.g. xi = 0 for a symmetric Zeeman set.
    """
    t = xi + zeeman.array
    denom = float((t / np.sqrt(delta * delta + t * t)).sum())
    if abs(denom) < DENOM_TOL:
        raise DegenerateDenominator(
            f"stationarity denominator {denom:.3e} at delta={delta}, xi={xi}"
        )
    return 2.0 * xi / denom


def nu_stationary_derivs(delta: float, xi: float, zeeman: ZeemanSet
                         ) -> tuple[float, float, float]:
    """(nu, d nu/d xi, d^2 nu/d xi^2) of the stationary-coupling curve.

    Closed-form differentiation; finite differences are used only as a test
    oracle against these expressions.
    """
    d2 = delta * delta
    t = xi + zeeman.array
    w = d2 + t * t
    D = float((t * w**-0.5).sum())
    if abs(D) < DENOM_TOL:
        raise DegenerateDenominator(
            f"stationarity denominator {D:.3e} at delta={delta}, xi={xi}"
        )
    Dx = d2 * float((w**-1.5).sum())
    Dxx = -3.0 * d2 * float((t * w**-2.5).sum())
    nu = 2.0 * xi / D
    n1 = 2.0 * D - 2.0 * xi * Dx
    nu_x = n1 / D**2
    nu_xx = -2.0 * xi * Dxx / D**2 - 2.0 * n1 * Dx / D**3
    return nu, nu_x, nu_xx


def bessel_j0(x: float) -> float:
    """Bessel function of the first kind J_0; even in x by construction."""
    return float(_special.j0(abs(x)))


def bessel_j1(x: float) -> float:
    return float(_special.j1(x))


def _drive_coeffs(p: ModelParams, d: DriveParams) -> tuple[float, float, float]:
    m = p.m
    c_arg = 2.0 * d.ratio * math.sqrt(2.0 / m)       # J0 argument per unit X
    c_xs = (p.g / (2.0 * m)) * math.sqrt(2.0 / m)    # X*S coefficient
    c_ss = d.ratio * d.ratio / (8.0 * m * m)         # S^2 coefficient
    return c_arg, c_xs, c_ss


def _check_y_domain(y: np.ndarray, strict: bool) -> None:
    lim = SQRT2 - Y_MARGIN if strict else SQRT2
    if np.any(np.abs(y) > lim):
        raise DomainError(f"|Y_j| must be {'<' if strict else '<='} sqrt(2); got {y}")


def eval_e_driven(x: float, y: np.ndarray, p: ModelParams, d: DriveParams) -> float:
    """Per-atom mean-field energy of the drive-averaged model.

    e = X^2/(2M) - (gX/(2M)) sqrt(2/M) S - (1/(2M)) sum_j k_j Y_j sqrt(2-Y_j^2)
        + (r^2/(8M^2)) S^2 + (delta/(2M)) J0(2 r sqrt(2/M) X) sum_j (Y_j^2 - 1)

    with S = sum_j Y_j sqrt(2-Y_j^2) and r = A/Omega.  At r = 0 this equals
    F(xi)/(2M) after minimizing over Y with xi = 2gX/sqrt(2M).
    """
    y = np.asarray(y, dtype=float)
    _check_y_domain(y, strict=False)
    m = p.m
    c_arg, c_xs, c_ss = _drive_coeffs(p, d)
    s = y * np.sqrt(2.0 - y * y)
    stot = float(s.sum())
    j0 = _special.j0(abs(c_arg * x))
    return (
        x * x / (2.0 * m)
        - c_xs * x * stot
        - float((p.zeeman.array * s).sum()) / (2.0 * m)
        + c_ss * stot * stot
        + (p.delta / (2.0 * m)) * j0 * float((y * y - 1.0).sum())
    )


def eval_e_gradient(x: float, y: np.ndarray, p: ModelParams, d: DriveParams) -> np.ndarray:
    """Analytic gradient of :func:`eval_e_driven` w.r.t. (X, Y_1..Y_M)."""
    y = np.asarray(y, dtype=float)
    _check_y_domain(y, strict=True)
    m = p.m
    c_arg, c_xs, c_ss = _drive_coeffs(p, d)
    root = np.sqrt(2.0 - y * y)
    s = y * root
    stot = float(s.sum())
    sp = 2.0 * (1.0 - y * y) / root
    u = c_arg * x
    zsum = float((y * y - 1.0).sum())
    dx = (
        x / m
        - c_xs * stot
        - (p.delta / (2.0 * m)) * _special.j1(u) * c_arg * zsum
    )
    dy = (
        (-c_xs * x - p.zeeman.array / (2.0 * m) + 2.0 * c_ss * stot) * sp
        + (p.delta / m) * _special.j0(abs(u)) * y
    )
    return np.concatenate([[dx], dy])


def eval_e_batch(v: np.ndarray, p: ModelParams, d: DriveParams
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Energy and gradient for a batch of points v of shape (n, M+1)."""
    v = np.asarray(v, dtype=float)
    x = v[:, 0]
    y = v[:, 1:]
    m = p.m
    c_arg, c_xs, c_ss = _drive_coeffs(p, d)
    root = np.sqrt(np.maximum(2.0 - y * y, 0.0))
    s = y * root
    stot = s.sum(axis=1)
    u = c_arg * x
    j0 = _special.j0(np.abs(u))
    j1 = _special.j1(u)
    zsum = (y * y - 1.0).sum(axis=1)
    e = (
        x * x / (2.0 * m)
        - c_xs * x * stot
        - (y * root * p.zeeman.array).sum(axis=1) / (2.0 * m)
        + c_ss * stot * stot
        + (p.delta / (2.0 * m)) * j0 * zsum
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        sp = 2.0 * (1.0 - y * y) / root
    sp = np.where(root > 0, sp, 0.0)
    dx = x / m - c_xs * stot - (p.delta / (2.0 * m)) * j1 * c_arg * zsum
    dy = (
        (-c_xs * x[:, None] - p.zeeman.array / (2.0 * m)
         + 2.0 * c_ss * stot[:, None]) * sp
        + (p.delta / m) * j0[:, None] * y
    )
    return e, np.concatenate([dx[:, None], dy], axis=1)
