"""Finite-N exact diagonalization of the undriven Hamiltonian.

Cross-checks the mean-field order parameter qualitatively.  The Hamiltonian
(field frequency 1)

    H = a^dag a + delta sum_j J_j^z + (g/sqrt(N)) (a^dag + a) sum_j J_j^x
        + sum_j k_j J_j^x

conserves the collective spin of each cavity; we work in the maximal sector
j = N/(2M) with a photon Fock cutoff.  Parity forces <a> = 0 at finite N for
symmetric Zeeman sets, so sqrt(<a^dag a>) serves as the radiance proxy and
the comparison with the broken-symmetry mean-field xi is qualitative by
design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from .errors import CutoffNotConverged, DimensionGuard, DomainError
from .model import ModelParams

MAX_DIM = 200_000
CUTOFF_TOL = 1e-8


@dataclass(frozen=True)
class EDConfig:
    n_atoms: int
    photon_cutoff: int
    params: ModelParams

    def __post_init__(self):
        m = self.params.m
        if self.n_atoms < 1 or self.n_atoms % m != 0:
            raise DomainError("n_atoms must be a positive multiple of the cavity count")
        if self.photon_cutoff < 8:
            raise DomainError("photon cutoff must be at least 8")

    @property
    def spins_per_cavity(self) -> int:
        return self.n_atoms // self.params.m

    def dimension(self, cutoff: int | None = None) -> int:
        nc = self.photon_cutoff if cutoff is None else cutoff
        return (self.spins_per_cavity + 1) ** self.params.m * (nc + 1)


@dataclass(frozen=True)
class EDResult:
    energy: float
    photon_order: float          # 2 g sqrt(<a^dag a>) / sqrt(N)
    n_photons: float             # <a^dag a>
    spin_x: tuple[float, ...]    # <J_j^x> / (N/2M)
    a_plus_adag: float           # <a + a^dag>
    residual: float              # ||Hv - Ev|| / ||v||
    cutoff: int


def _spin_ops(two_j_plus_one: int):
    j = (two_j_plus_one - 1) / 2.0
    m_vals = np.arange(j, -j - 1.0, -1.0)
    off = np.sqrt(j * (j + 1.0) - m_vals[:-1] * (m_vals[:-1] - 1.0))
    jp = sparse.diags(off, 1)
    jx = 0.5 * (jp + jp.T)
    jz = sparse.diags(m_vals)
    return jx.tocsr(), jz.tocsr()


def _boson_ops(cutoff: int):
    n = np.arange(cutoff + 1)
    a = sparse.diags(np.sqrt(n[1:]), 1)
    num = sparse.diags(n)
    return a.tocsr(), num.tocsr()


def build_hamiltonian(cfg: EDConfig, cutoff: int | None = None) -> sparse.csr_matrix:
    nc = cfg.photon_cutoff if cutoff is None else cutoff
    p = cfg.params
    m = p.m
    dim_spin = cfg.spins_per_cavity + 1
    jx1, jz1 = _spin_ops(dim_spin)
    a, num = _boson_ops(nc)
    ident_b = sparse.identity(nc + 1, format="csr")
    ident_s = sparse.identity(dim_spin, format="csr")

    def embed_spin(op, cavity: int):
        out = sparse.identity(1, format="csr")
        for j in range(m):
            out = sparse.kron(out, op if j == cavity else ident_s, format="csr")
        return out

    jx_tot = sum(embed_spin(jx1, c) for c in range(m))
    jz_tot = sum(embed_spin(jz1, c) for c in range(m))
    zeeman = sum(k * embed_spin(jx1, c) for c, k in enumerate(p.zeeman.values))

    x_b = (a + a.T).tocsr()
    ident_all_s = sparse.identity(dim_spin**m, format="csr")
    h = (
        sparse.kron(num, ident_all_s, format="csr")
        + p.delta * sparse.kron(ident_b, jz_tot, format="csr")
        + (p.g / math.sqrt(cfg.n_atoms)) * sparse.kron(x_b, jx_tot, format="csr")
        + sparse.kron(ident_b, zeeman, format="csr")
    )
    return h.tocsr()


def _ground(cfg: EDConfig, cutoff: int):
    dim = cfg.dimension(cutoff)
    if dim > MAX_DIM:
        raise DimensionGuard(f"basis dimension {dim} exceeds the {MAX_DIM} guard")
    h = build_hamiltonian(cfg, cutoff)
    v0 = np.ones(dim) / math.sqrt(dim)
    vals, vecs = eigsh(h, k=1, which="SA", v0=v0)
    return float(vals[0]), vecs[:, 0], h


def ed_ground_state(cfg: EDConfig, check_cutoff: bool = True) -> EDResult:
    """Lowest eigenpair and field/spin observables of the finite-N model.

    Raises
    ------
    DimensionGuard
        Basis larger than the desk-scale limit.
    CutoffNotConverged
        Ground energy still moves by more than 1e-8 when the photon cutoff
        is raised by 8 (only when check_cutoff is set).
    """
    energy, vec, h = _ground(cfg, cfg.photon_cutoff)
    if check_cutoff:
        energy_hi, _, _ = _ground(cfg, cfg.photon_cutoff + 8)
        if abs(energy - energy_hi) >= CUTOFF_TOL:
            raise CutoffNotConverged(
                f"energy moved {abs(energy - energy_hi):.3e} when the cutoff "
                f"was raised from {cfg.photon_cutoff} to {cfg.photon_cutoff + 8}"
            )

    p = cfg.params
    m = p.m
    nc = cfg.photon_cutoff
    dim_spin = cfg.spins_per_cavity + 1
    jx1, _ = _spin_ops(dim_spin)
    a, num = _boson_ops(nc)
    ident_b = sparse.identity(nc + 1, format="csr")

    def expect(op):
        return float(vec @ (op @ vec))

    n_photons = expect(sparse.kron(num, sparse.identity(dim_spin**m), format="csr"))
    a_plus = expect(sparse.kron((a + a.T), sparse.identity(dim_spin**m), format="csr"))
    spin_norm = cfg.n_atoms / (2.0 * m)
    spin_x = []
    for c in range(m):
        op = sparse.identity(1, format="csr")
        for j in range(m):
            op = sparse.kron(op, jx1 if j == c else sparse.identity(dim_spin), format="csr")
        spin_x.append(expect(sparse.kron(ident_b, op, format="csr")) / spin_norm)

    hv = h @ vec
    residual = float(np.linalg.norm(hv - energy * vec))
    return EDResult(
        energy=energy,
        photon_order=2.0 * p.g * math.sqrt(max(n_photons, 0.0)) / math.sqrt(cfg.n_atoms),
        n_photons=n_photons,
        spin_x=tuple(spin_x),
        a_plus_adag=a_plus,
        residual=residual,
        cutoff=cfg.photon_cutoff,
    )


def ed_sweep(n_atoms: int, photon_cutoff: int, delta: float, zeeman,
             nu_values, check_cutoff: bool = False) -> list[tuple[float, EDResult]]:
    """Ground-state observables over a coupling sweep (CSV-ready)."""
    out = []
    for nu in nu_values:
        cfg = EDConfig(n_atoms, photon_cutoff, ModelParams(delta, float(nu), zeeman))
        out.append((float(nu), ed_ground_state(cfg, check_cutoff=check_cutoff)))
    return out


def decoupled_ground_energy(cfg: EDConfig) -> float:
    """Closed form at g = 0: independent spins in their Zeeman fields, no photons."""
    p = cfg.params
    j = cfg.spins_per_cavity / 2.0
    return -j * math.fsum(
        math.sqrt(p.delta**2 + k * k) for k in p.zeeman.values
    )
