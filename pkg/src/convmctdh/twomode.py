"""One atomic and one molecular orbital with contact interactions, coded
from the closed-form two-mode expressions (independent of the general
ladder machinery, which it is used to cross-check).

State: phi_a, psi_m and amplitudes C_p for p = 0..N//2 molecules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import OneBodyOperatorSpec, SpatialGrid, apply_one_body

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class TwoModeCouplings:
    lambda_a: float = 0.0
    lambda_m: float = 0.0
    lambda_am: float = 0.0
    lambda_con: float = 0.0


@dataclass(frozen=True)
class TwoModeState:
    N: int
    phi_a: np.ndarray
    psi_m: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=complex)
        if C.shape != (self.N // 2 + 1,):
            raise ValueError(f"need {self.N // 2 + 1} amplitudes for N={self.N}, got {C.shape}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "phi_a", np.asarray(self.phi_a, dtype=complex))
        object.__setattr__(self, "psi_m", np.asarray(self.psi_m, dtype=complex))


@dataclass(frozen=True)
class TwoModeExpectations:
    n_a: float
    n_m: float
    n_a_pairs: float      # <N_a (N_a - 1)>
    n_m_pairs: float      # <N_m (N_m - 1)>
    n_a_n_m: float
    c_b_b: complex        # <c+ b b>

    @property
    def b_b_c(self) -> complex:
        return np.conj(self.c_b_b)


def conversion_amplitudes(N: int) -> np.ndarray:
    """sqrt(p (N - 2p + 1)(N - 2p + 2)) for p = 0..N//2 (zero at p = 0)."""
    p = np.arange(N // 2 + 1)
    return np.sqrt(p * (N - 2 * p + 1) * (N - 2 * p + 2))


def expectations(N: int, C: np.ndarray) -> TwoModeExpectations:
    p = np.arange(N // 2 + 1)
    w = np.abs(C) ** 2
    atoms = N - 2 * p
    amp = conversion_amplitudes(N)
    return TwoModeExpectations(
        n_a=float(np.sum(atoms * w)),
        n_m=float(np.sum(p * w)),
        n_a_pairs=float(np.sum(atoms * (atoms - 1) * w)),
        n_m_pairs=float(np.sum(p * (p - 1) * w)),
        n_a_n_m=float(np.sum(p * atoms * w)),
        c_b_b=complex(np.sum(amp[1:] * np.conj(C[1:]) * C[:-1])),
    )


@dataclass(frozen=True)
class TimeDependentCouplings:
    lam_a: float
    lam_am: float
    lam_con: complex
    lam_m: float
    lam_ma: float
    lam_con_m: complex


def time_dependent_couplings(N: int, C: np.ndarray, couplings: TwoModeCouplings,
                             eps: float = 1e-8) -> TimeDependentCouplings:
    ex = expectations(N, C)
    na = max(ex.n_a, eps)
    nm = max(ex.n_m, eps)
    return TimeDependentCouplings(
        lam_a=couplings.lambda_a * ex.n_a_pairs / na,
        lam_am=couplings.lambda_am * ex.n_a_n_m / na,
        lam_con=couplings.lambda_con * ex.b_b_c / na,
        lam_m=couplings.lambda_m * ex.n_m_pairs / nm,
        lam_ma=couplings.lambda_am * ex.n_a_n_m / nm,
        lam_con_m=couplings.lambda_con * ex.c_b_b / nm,
    )


def _mean_field_terms(state, couplings, h_a, h_m, eps):
    N = state.N
    phi, psi = state.phi_a, state.psi_m
    lam = time_dependent_couplings(N, state.C, couplings, eps)
    dens_a = np.abs(phi) ** 2
    dens_m = np.abs(psi) ** 2
    ba = (apply_one_body(h_a, phi) + (lam.lam_a * dens_a + lam.lam_am * dens_m) * phi
          + SQRT2 * lam.lam_con * np.conj(phi) * psi)
    bm = (apply_one_body(h_m, psi) + (lam.lam_m * dens_m + lam.lam_ma * dens_a) * psi
          + lam.lam_con_m / SQRT2 * phi**2)
    return ba, bm


def _project(grid: SpatialGrid, f, g):
    return g - grid.inner(f, g) * f


def two_mode_orbital_rhs(state: TwoModeState, couplings: TwoModeCouplings,
                         h_a: OneBodyOperatorSpec, h_m: OneBodyOperatorSpec, eps: float = 1e-8):
    """Real-time derivatives (d phi_a/dt, d psi_m/dt)."""
    grid = h_a.grid
    ba, bm = _mean_field_terms(state, couplings, h_a, h_m, eps)
    return -1j * _project(grid, state.phi_a, ba), -1j * _project(grid, state.psi_m, bm)


def two_mode_coefficient_matrix(state: TwoModeState, couplings: TwoModeCouplings,
                                h_a: OneBodyOperatorSpec, h_m: OneBodyOperatorSpec) -> np.ndarray:
    grid = h_a.grid
    N = state.N
    phi, psi = state.phi_a, state.psi_m
    ea = grid.inner(phi, apply_one_body(h_a, phi)).real
    em = grid.inner(psi, apply_one_body(h_m, psi)).real
    aa = grid.inner(phi**2, phi**2).real
    mm = grid.inner(psi**2, psi**2).real
    am = grid.inner(phi * psi, phi * psi).real
    overlap = grid.inner(psi, phi**2)
    p = np.arange(N // 2 + 1)
    atoms = N - 2 * p
    diag = (atoms * ea + 0.5 * couplings.lambda_a * atoms * (atoms - 1) * aa
            + p * em + 0.5 * couplings.lambda_m * p * (p - 1) * mm
            + couplings.lambda_am * p * atoms * am)
    H = np.diag(diag).astype(complex)
    off = couplings.lambda_con / SQRT2 * conversion_amplitudes(N)[1:] * overlap
    H[p[1:], p[:-1]] = off
    H[p[:-1], p[1:]] = np.conj(off)
    return H


def two_mode_energy(state, couplings, h_a, h_m) -> float:
    H = two_mode_coefficient_matrix(state, couplings, h_a, h_m)
    return float(np.vdot(state.C, H @ state.C).real)


@dataclass(frozen=True)
class StationaryResiduals:
    orbital_a: float
    orbital_m: float
    mu_a: complex
    mu_m: complex
    eigen: float
    energy: float

    @property
    def worst(self) -> float:
        return max(self.orbital_a, self.orbital_m, self.eigen)


def two_mode_stationary_residual(state: TwoModeState, couplings: TwoModeCouplings,
                                 h_a: OneBodyOperatorSpec, h_m: OneBodyOperatorSpec,
                                 eps: float = 1e-8) -> StationaryResiduals:
    """Residuals of the stationary orbital equations (multipliers by projection)
    and of the eigenvalue problem H C = eps C."""
    grid = h_a.grid
    ba, bm = _mean_field_terms(state, couplings, h_a, h_m, eps)
    mu_a = grid.inner(state.phi_a, ba)
    mu_m = grid.inner(state.psi_m, bm)
    H = two_mode_coefficient_matrix(state, couplings, h_a, h_m)
    energy = float(np.vdot(state.C, H @ state.C).real)
    ex = expectations(state.N, state.C)
    # an empty species drops out of the stationary orbital equation
    res_a = grid.norm(ba - mu_a * state.phi_a) if ex.n_a > eps else 0.0
    res_m = grid.norm(bm - mu_m * state.psi_m) if ex.n_m > eps else 0.0
    return StationaryResiduals(
        orbital_a=res_a, orbital_m=res_m, mu_a=complex(mu_a), mu_m=complex(mu_m),
        eigen=float(np.linalg.norm(H @ state.C - energy * state.C)), energy=energy,
    )
