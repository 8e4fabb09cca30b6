"""Invariant checks run by ``solver validate`` on the configured system."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .eom import (ConversionSystem, OrbitalSet, build_local_potentials, orbital_rhs)
from .fock import enumerate_basis
from .operators import InteractionSpec
from .oracle import MAX_ORACLE_SIZE, LadderAlgebra
from .propagation import (IntegratorConfig, PropagationState, Propagator, default_initial_state,
                          gauge_transform, observe)
from .rdm import RDM_KEYS, compute_rdms, regularized_inverse
from .twomode import (TwoModeCouplings, TwoModeState, two_mode_coefficient_matrix,
                      two_mode_orbital_rhs)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} {self.value:10.3e}  (<= {self.threshold:.0e})"


def random_orbitals(grid, count: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal smooth random orbitals (random combinations of Gaussians)."""
    x = grid.points
    width = grid.length / 8
    raw = np.array([
        sum((rng.normal() + 1j * rng.normal()) * np.exp(-((x - c) / width) ** 2)
            for c in rng.uniform(-grid.length / 4, grid.length / 4, size=3))
        for _ in range(count)
    ])
    q, _ = np.linalg.qr(raw.T)
    return q.T / np.sqrt(grid.spacing)


def random_coefficients(size: int, rng: np.random.Generator) -> np.ndarray:
    C = rng.normal(size=size) + 1j * rng.normal(size=size)
    return C / np.linalg.norm(C)


def random_state(system: ConversionSystem, rng: np.random.Generator) -> PropagationState:
    b = system.basis
    orbitals = OrbitalSet(random_orbitals(system.grid, b.M, rng),
                          random_orbitals(system.grid, b.M_mol, rng))
    return PropagationState(0.0, orbitals, random_coefficients(b.size, rng))


def _oracle_system(system: ConversionSystem) -> ConversionSystem:
    b = system.basis
    N = b.N
    while enumerate_basis(N, b.M, b.M_mol).size > MAX_ORACLE_SIZE // 4 and N > 2:
        N -= 1
    return replace(system, basis=enumerate_basis(N, b.M, b.M_mol))


def run_checks(system: ConversionSystem, dt: float = 1e-3, seed: int = 7) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []

    small = _oracle_system(system)
    algebra = LadderAlgebra(small.basis)
    state = random_state(small, rng)
    tables = small.integrals(state.orbitals)
    H = small.hamiltonian(state.orbitals).to_dense()
    H_ref = algebra.hamiltonian(tables).matrix
    scale = max(1.0, float(np.max(np.abs(H_ref))))
    out.append(CheckResult("hamiltonian_vs_oracle", *_lt(np.max(np.abs(H - H_ref)) / scale, 1e-12)))
    out.append(CheckResult("hamiltonian_hermitian", *_lt(np.max(np.abs(H - H.conj().T)), 1e-14)))
    p = small.basis.p_values
    far = np.abs(p[:, None] - p[None, :]) >= 2
    out.append(CheckResult("conversion_selection_rule", *_lt(np.max(np.abs(H[far]), initial=0.0), 0.0)))

    rdms = compute_rdms(small.basis, state.C)
    ref = algebra.rdms(state.C)
    dev = max(np.max(np.abs(getattr(rdms, k) - getattr(ref, k))) for k in RDM_KEYS)
    out.append(CheckResult("rdms_vs_oracle", *_lt(dev, 1e-12)))
    out.append(CheckResult("particle_number", *_lt(abs(rdms.n_atoms + 2 * rdms.n_molecules - small.basis.N), 1e-10)))

    ws = build_local_potentials(state.orbitals, small.interaction, small.grid)
    deriv = orbital_rhs(state.orbitals, rdms, ws, small)
    g = small.grid
    tangency = max(np.max(np.abs(g.overlap(state.orbitals.atomic, deriv.atomic))),
                   np.max(np.abs(g.overlap(state.orbitals.molecular, deriv.molecular))))
    out.append(CheckResult("orbital_tangency", *_lt(tangency, 1e-10)))

    out.append(CheckResult("two_mode_cross_check", *_lt(_two_mode_deviation(system, rng), 1e-10)))

    gauge = _gauge_deviation(small, state, rng)
    out.append(CheckResult("gauge_invariance", *_lt(gauge, 1e-12)))

    inv = regularized_inverse(np.diag([float(system.basis.N), 0.0]), system.eps)
    out.append(CheckResult("regularized_inverse_finite", *_lt(0.0 if np.all(np.isfinite(inv)) else 1.0, 0.5)))

    out.append(CheckResult("short_run_energy_drift", *_lt(_short_run_drift(system, dt), 1e-8)))
    return out


def _lt(value: float, threshold: float):
    value = float(value)
    return value <= threshold, value, threshold


def _two_mode_deviation(system: ConversionSystem, rng) -> float:
    """General code at M = M' = 1 against the closed-form two-mode code."""
    s = system.interaction
    contact = s if s.is_contact else InteractionSpec("contact", s.lambda_a, s.lambda_m, s.lambda_am, s.lambda_con)
    N = min(system.basis.N, 6)
    one = ConversionSystem(enumerate_basis(N, 1, 1), system.h_a, system.h_m, contact, system.eps)
    state = random_state(one, rng)
    couplings = TwoModeCouplings(contact.lambda_a, contact.lambda_m, contact.lambda_am, contact.lambda_con)
    tm = TwoModeState(N, state.orbitals.atomic[0], state.orbitals.molecular[0], state.C)
    rdms = compute_rdms(one.basis, state.C)
    ws = build_local_potentials(state.orbitals, contact, one.grid)
    deriv = orbital_rhs(state.orbitals, rdms, ws, one)
    da, dm = two_mode_orbital_rhs(tm, couplings, one.h_a, one.h_m, one.eps)
    H = one.hamiltonian(state.orbitals).to_dense()
    H2 = two_mode_coefficient_matrix(tm, couplings, one.h_a, one.h_m)
    return float(max(np.max(np.abs(deriv.atomic[0] - da)), np.max(np.abs(deriv.molecular[0] - dm)),
                     np.max(np.abs(H - H2))))


def _gauge_deviation(system: ConversionSystem, state: PropagationState, rng) -> float:
    before = observe(state, system)
    moved = gauge_transform(state, system.basis, rng.uniform(0, 2 * np.pi, system.basis.M),
                            rng.uniform(0, 2 * np.pi, system.basis.M_mol))
    after = observe(moved, system)
    return float(max(
        np.max(np.abs(before.density_a - after.density_a)),
        np.max(np.abs(before.density_m - after.density_m)),
        np.max(np.abs(before.occupations_a - after.occupations_a)),
        np.max(np.abs(before.occupations_m - after.occupations_m)),
        abs(before.energy - after.energy) / max(1.0, abs(before.energy)),
    ))


def _short_run_drift(system: ConversionSystem, dt: float, n_steps: int = 50) -> float:
    dt = min(dt, 1e-3)
    state = default_initial_state(system)
    e0 = observe(state, system).energy
    prop = Propagator(system, IntegratorConfig(dt=dt, t_final=n_steps * dt))
    for _ in range(n_steps):
        state = prop.step(state, dt)
    e1 = observe(state, system).energy
    return abs(e1 - e0) / max(1.0, abs(e0))
