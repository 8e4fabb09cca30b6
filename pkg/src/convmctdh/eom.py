"""Right-hand sides of the coupled orbital and coefficient equations.

Orbital equations in the gauge <phi_k|d phi_q/dt> = 0:

    i d phi_j/dt = P_a [h_a phi_j + sum_k inv(rho_a)_jk F_k]
    i d psi_j/dt = P_m [h_m psi_j + sum_k inv(rho_m)_jk G_k]

with the brackets F (atoms) and G (molecules) built from the two-body and
conversion density matrices and the local potentials below, and
P = 1 - sum_u |u><u| the projector off the occupied orbital space.
Coefficients obey i dC/dt = H C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import ConfigurationBasis, enumerate_basis
from .grid import DimensionError, OneBodyOperatorSpec, SpatialGrid, apply_one_body
from .operators import (InteractionSpec, IntegralTables, SparseHamiltonian,
                        assemble_hamiltonian, compute_integrals, kernel_potential, pair_products)
from .rdm import RdmBundle, regularized_inverse

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class OrbitalSet:
    atomic: np.ndarray      # (M, n_points)
    molecular: np.ndarray   # (M', n_points)

    def __post_init__(self):
        object.__setattr__(self, "atomic", np.atleast_2d(np.asarray(self.atomic, dtype=complex)))
        object.__setattr__(self, "molecular", np.atleast_2d(np.asarray(self.molecular, dtype=complex)))
        if self.atomic.shape[-1] != self.molecular.shape[-1]:
            raise DimensionError("atomic and molecular orbitals live on different grids")

    def orthonormality_error(self, grid: SpatialGrid) -> float:
        return max(
            float(np.max(np.abs(grid.overlap(fs, fs) - np.eye(len(fs)))))
            for fs in (self.atomic, self.molecular)
        )


@dataclass(frozen=True, eq=False)
class ConversionSystem:
    """Everything that defines the Hamiltonian apart from the state."""

    basis: ConfigurationBasis
    h_a: OneBodyOperatorSpec
    h_m: OneBodyOperatorSpec
    interaction: InteractionSpec
    eps: float = 1e-8

    def __post_init__(self):
        if self.h_a.grid != self.h_m.grid:
            raise DimensionError("atomic and molecular one-body operators use different grids")
        if not self.interaction.is_contact:
            n = self.grid.n_points
            if self.interaction.kernel("a").shape != (n, n):
                raise DimensionError(f"kernels must be {n} x {n}")

    @classmethod
    def build(cls, N, M, M_mol, h_a, h_m, interaction, eps=1e-8) -> "ConversionSystem":
        return cls(enumerate_basis(N, M, M_mol), h_a, h_m, interaction, eps)

    @property
    def grid(self) -> SpatialGrid:
        return self.h_a.grid

    def integrals(self, orbitals: OrbitalSet, check: bool = True) -> IntegralTables:
        return compute_integrals(orbitals.atomic, orbitals.molecular, self.interaction,
                                 self.h_a, self.h_m, check=check)

    def hamiltonian(self, orbitals: OrbitalSet, check: bool = True) -> SparseHamiltonian:
        return assemble_hamiltonian(self.basis, self.integrals(orbitals, check=check))


@dataclass(frozen=True)
class EomWorkspace:
    """Local potentials on the grid.

    pot_a[s, l]        felt by atoms from the atomic pair density conj(phi_s) phi_l
    pot_m[s', l']      felt by molecules from conj(psi_s') psi_l'
    pot_am[k', q']     felt by atoms from conj(psi_k') psi_q'
    pot_ma[k, q]       felt by molecules from conj(phi_k) phi_q
    conv_am[k, q]      conversion source at the molecular coordinate (from phi_k phi_q)
    conv_ma[q, k']     conversion source at an atomic coordinate (from conj(phi_q) psi_k')
    """

    pot_a: np.ndarray
    pot_m: np.ndarray
    pot_am: np.ndarray
    pot_ma: np.ndarray
    conv_am: np.ndarray
    conv_ma: np.ndarray


def build_local_potentials(orbitals: OrbitalSet, interaction: InteractionSpec,
                           grid: SpatialGrid) -> EomWorkspace:
    phi = grid.check(orbitals.atomic)
    psi = grid.check(orbitals.molecular)
    pairs_a = pair_products(phi)
    pairs_m = pair_products(psi)
    if interaction.is_contact:
        lam = interaction.couplings()
        return EomWorkspace(
            pot_a=lam["a"] * pairs_a,
            pot_m=lam["m"] * pairs_m,
            pot_am=lam["am"] * pairs_m,
            pot_ma=lam["am"] * pairs_a,
            conv_am=lam["conv"] * phi[:, None, :] * phi[None, :, :],
            conv_ma=lam["conv"] * np.conj(phi)[:, None, :] * psi[None, :, :],
        )
    dx = grid.spacing
    k_conv = interaction.kernel("conv")
    # T[k, q, i, j] = K(x_i, x_j) phi_k(x_i) phi_q(x_j), pushed onto the midpoint grid
    table = k_conv * phi[:, None, :, None] * phi[None, :, None, :]
    conv_am = dx * grid.midpoint_adjoint(table)
    mid_psi = grid.midpoint_table(psi)            # [k', i, j] = psi_k'((x_i + x_j) / 2)
    conv_ma = dx * np.einsum("qj,ij,aij->qai", np.conj(phi), k_conv, mid_psi)
    return EomWorkspace(
        pot_a=kernel_potential(grid, interaction.kernel("a"), pairs_a),
        pot_m=kernel_potential(grid, interaction.kernel("m"), pairs_m),
        pot_am=kernel_potential(grid, interaction.kernel("am"), pairs_m),
        pot_ma=kernel_potential(grid, interaction.kernel("am"), pairs_a),
        conv_am=conv_am,
        conv_ma=conv_ma,
    )


def project_out(grid: SpatialGrid, basis_fns: np.ndarray, fs: np.ndarray) -> np.ndarray:
    """(1 - sum_u |u><u|) applied to every row of ``fs``."""
    return fs - grid.overlap(basis_fns, fs).T @ basis_fns


def orbital_brackets(orbitals: OrbitalSet, rdms: RdmBundle, ws: EomWorkspace):
    """Mean-field brackets F_k (atoms) and G_k' (molecules), excluding h."""
    phi, psi = orbitals.atomic, orbitals.molecular
    field_a = (np.einsum("kslq,slx->kqx", rdms.rho_a2, ws.pot_a)
               + np.einsum("kaqb,abx->kqx", rdms.rho_am, ws.pot_am))
    F = np.einsum("kqx,qx->kx", field_a, phi)
    F = F + SQRT2 * np.einsum("akq,qax->kx", np.conj(rdms.rho_conv), ws.conv_ma)
    field_m = (np.einsum("kslq,slx->kqx", rdms.rho_m2, ws.pot_m)
               + np.einsum("kaqb,kqx->abx", rdms.rho_am, ws.pot_ma))
    G = np.einsum("abx,bx->ax", field_m, psi)
    G = G + np.einsum("akq,kqx->ax", rdms.rho_conv, ws.conv_am) / SQRT2
    return F, G


def orbital_generators(orbitals: OrbitalSet, rdms: RdmBundle, ws: EomWorkspace,
                       system: ConversionSystem, eps: float | None = None):
    """Projected brackets K with i d(orbitals)/dt = K."""
    eps = system.eps if eps is None else eps
    grid = system.grid
    F, G = orbital_brackets(orbitals, rdms, ws)
    ka = apply_one_body(system.h_a, orbitals.atomic) + regularized_inverse(rdms.rho_a, eps) @ F
    km = apply_one_body(system.h_m, orbitals.molecular) + regularized_inverse(rdms.rho_m, eps) @ G
    return project_out(grid, orbitals.atomic, ka), project_out(grid, orbitals.molecular, km)


def orbital_rhs(orbitals: OrbitalSet, rdms: RdmBundle, ws: EomWorkspace,
                system: ConversionSystem, eps: float | None = None) -> OrbitalSet:
    """Real-time derivatives d phi/dt, d psi/dt."""
    ka, km = orbital_generators(orbitals, rdms, ws, system, eps)
    return OrbitalSet(-1j * ka, -1j * km)


def coefficient_rhs(H: SparseHamiltonian, C: np.ndarray) -> np.ndarray:
    return -1j * H.matvec(C)


@dataclass(frozen=True)
class MeanFieldCouplings:
    lam_a: float
    lam_am: float
    lam_con: complex
    lam_m: float
    lam_ma: float
    lam_con_m: complex


def meanfield_couplings(rdms: RdmBundle, interaction: InteractionSpec,
                        eps: float = 1e-8) -> MeanFieldCouplings:
    """Time-dependent couplings of the one-orbital-per-species theory.

    Empty species are handled with the denominator max(<N>, eps).
    """
    if rdms.rho_a.shape != (1, 1) or rdms.rho_m.shape != (1, 1):
        raise DimensionError("mean-field couplings need one atomic and one molecular orbital")
    lam = interaction.couplings()
    na = max(rdms.n_atoms, eps)
    nm = max(rdms.n_molecules, eps)
    pairs_aa = rdms.rho_a2[0, 0, 0, 0].real
    pairs_mm = rdms.rho_m2[0, 0, 0, 0].real
    mixed = rdms.rho_am[0, 0, 0, 0].real
    conv = complex(rdms.rho_conv[0, 0, 0])
    return MeanFieldCouplings(
        lam_a=lam["a"] * pairs_aa / na,
        lam_am=lam["am"] * mixed / na,
        lam_con=lam["conv"] * np.conj(conv) / na,
        lam_m=lam["m"] * pairs_mm / nm,
        lam_ma=lam["am"] * mixed / nm,
        lam_con_m=lam["conv"] * conv / nm,
    )
