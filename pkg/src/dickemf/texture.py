"""Pseudo-spin textures and magnetic-order classification.

The per-cavity x-polarizations m_j = <J_j^x>/(N/2M) of a ground state play
the role of local magnetizations.  Around multicritical points the phases
carry distinct orders: antiferromagnetic (pattern antisymmetric under cavity
reversal), ferromagnetic (uniform sign), modulated (polarized but neither),
or unpolarized.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import DriveParams, GroundState, ModelParams
from .solver import minimize_driven

AFM = "AFM"
FM = "FM"
MODULATED = "Modulated"
UNPOLARIZED = "Unpolarized"

DEFAULT_TOL = 1e-3


@dataclass(frozen=True)
class TextureReport:
    m: tuple[float, ...]
    order: str
    tol: float
    state: GroundState | None = None


def classify_order(m, tol: float = DEFAULT_TOL) -> str:
    """Magnetic order of an m-vector.

    Unpolarized: all |m_j| < tol.  AFM: antisymmetric under cavity reversal
    j -> M+1-j within tol (middle cavity unpolarized for odd M).  FM: all
    components share one sign with |m_j| >= tol.  Modulated otherwise.
    """
    m = [float(v) for v in m]
    n = len(m)
    if all(abs(v) < tol for v in m):
        return UNPOLARIZED
    afm = all(abs(m[j] + m[n - 1 - j]) < tol for j in range(n // 2))
    if n % 2 == 1:
        afm = afm and abs(m[n // 2]) < tol
    if afm and max(abs(v) for v in m) >= tol:
        return AFM
    if all(v >= tol for v in m) or all(v <= -tol for v in m):
        return FM
    return MODULATED


def texture_at(p: ModelParams, d: DriveParams, tol: float = DEFAULT_TOL,
               **solver_kwargs) -> TextureReport:
    """Ground-state texture at the given parameters (canonical representative)."""
    report = minimize_driven(p, d, **solver_kwargs)
    st = report.global_state
    return TextureReport(m=st.spin_x, order=classify_order(st.spin_x, tol),
                         tol=tol, state=st)
