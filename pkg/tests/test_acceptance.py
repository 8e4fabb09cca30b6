"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed even
without ``-s``.
"""

import itertools
import time
from dataclasses import replace

import numpy as np
import pytest

from convmctdh.eom import OrbitalSet, build_local_potentials, orbital_rhs
from convmctdh.fock import enumerate_basis
from convmctdh.grid import SpatialGrid
from convmctdh.operators import InteractionSpec, compute_integrals
from convmctdh.oracle import LadderAlgebra
from convmctdh.propagation import (IntegratorConfig, default_initial_state,
                                   gauge_transform, observe, relax, run_real_time, stationary_residuals)
from convmctdh.rdm import RDM_KEYS, compute_rdms
from convmctdh.twomode import (TwoModeCouplings, TwoModeState, expectations, two_mode_coefficient_matrix,
                               two_mode_energy, two_mode_orbital_rhs, two_mode_stationary_residual)
from convmctdh.validation import random_coefficients, random_orbitals, random_state

from conftest import CONVERSION_COUPLINGS, harmonic_specs, make_system

SWEEP = list(itertools.product((2, 4, 6), (1, 2), (1, 2)))
CONTACT = InteractionSpec("contact", **CONVERSION_COUPLINGS)


def report(capsys, number, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {str(number):>3} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
    assert ok, f"criterion {number} failed: {detail}"


def energy_drift(records) -> float:
    e0 = records[0].energy
    return max(abs(r.energy - e0) for r in records) / abs(e0)


def test_criterion_01_hamiltonian_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for N, M, Mm in SWEEP:
        system = make_system(N, M, Mm)
        algebra = LadderAlgebra(system.basis)
        for _ in range(20):
            state = random_state(system, rng)
            H = system.hamiltonian(state.orbitals).to_dense()
            H_ref = algebra.hamiltonian(system.integrals(state.orbitals)).matrix
            worst = max(worst, float(np.max(np.abs(H - H_ref))))
    runtime = time.perf_counter() - start
    report(capsys, 1, "sparse H equals ladder-composed H", worst <= 1e-12 and runtime < 60,
           f"max |dH| = {worst:.2e} <= 1e-12, runtime {runtime:.1f} s < 60 s")


def test_criterion_02_rdm_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for N, M, Mm in SWEEP:
        basis = enumerate_basis(N, M, Mm)
        algebra = LadderAlgebra(basis)
        for _ in range(20):
            C = random_coefficients(basis.size, rng)
            ours, ref = compute_rdms(basis, C), algebra.rdms(C)
            worst = max(worst, max(float(np.max(np.abs(getattr(ours, k) - getattr(ref, k)))) for k in RDM_KEYS))
    runtime = time.perf_counter() - start
    report(capsys, 2, "six RDM tensors equal dense expectation values", worst <= 1e-12 and runtime < 60,
           f"max deviation {worst:.2e} <= 1e-12, runtime {runtime:.1f} s < 60 s")


@pytest.mark.slow
def test_criterion_03_conservation(capsys):
    start = time.perf_counter()
    system = make_system(4, 1, 1, CONTACT)
    records, final = run_real_time(default_initial_state(system), IntegratorConfig(dt=1e-3, t_final=10.0),
                                   system, record_every=100)
    runtime = time.perf_counter() - start
    dE = energy_drift(records)
    dnorm = max(abs(r.norm_C - 1) for r in records)
    dnum = max(abs(r.n_atoms + 2 * r.n_molecules - 4) for r in records)
    dorth = max(r.orthonormality_error for r in records)
    ok = (dE < 1e-7 and dnorm < 1e-8 and dnum < 1e-10 and dorth < 1e-8 and runtime < 300
          and final.time == pytest.approx(10.0))
    report(capsys, 3, "conservation over t = 10", ok,
           f"dE/E {dE:.1e}, |norm-1| {dnorm:.1e}, number {dnum:.1e}, orthonormality {dorth:.1e}, "
           f"runtime {runtime:.0f} s")


def test_criterion_04_integrator_order(capsys):
    # at dt = 1e-3 the error is already at roundoff, so the halving is measured at dt = 0.01 -> 0.005
    system = make_system(4, 1, 1, CONTACT)
    errors = []
    for dt in (0.01, 0.005):
        records, _ = run_real_time(default_initial_state(system), IntegratorConfig(dt=dt, t_final=10.0),
                                   system, record_every=int(round(0.5 / dt)))
        errors.append(energy_drift(records))
    ratio = errors[0] / errors[1]
    report(capsys, 4, "halving dt reduces the energy error", ratio >= 12,
           f"errors {errors[0]:.2e} -> {errors[1]:.2e}, ratio {ratio:.1f} >= 12")


def test_criterion_05_two_mode_cross_check(capsys):
    rng = np.random.default_rng(105)
    c = TwoModeCouplings(**CONVERSION_COUPLINGS)
    worst = 0.0
    for _ in range(10):
        N = int(rng.integers(2, 9))
        system = make_system(N, 1, 1, CONTACT)
        state = random_state(system, rng)
        tm = TwoModeState(N, state.orbitals.atomic[0], state.orbitals.molecular[0], state.C)
        rdms = compute_rdms(system.basis, state.C)
        ws = build_local_potentials(state.orbitals, CONTACT, system.grid)
        d = orbital_rhs(state.orbitals, rdms, ws, system)
        da, dm = two_mode_orbital_rhs(tm, c, system.h_a, system.h_m)
        H = system.hamiltonian(state.orbitals).to_dense()
        H2 = two_mode_coefficient_matrix(tm, c, system.h_a, system.h_m)
        ex = expectations(N, state.C)
        rdm_dev = max(abs(rdms.rho_a[0, 0] - ex.n_a), abs(rdms.rho_m[0, 0] - ex.n_m),
                      abs(rdms.rho_a2[0, 0, 0, 0] - ex.n_a_pairs), abs(rdms.rho_m2[0, 0, 0, 0] - ex.n_m_pairs),
                      abs(rdms.rho_am[0, 0, 0, 0] - ex.n_a_n_m), abs(rdms.rho_conv[0, 0, 0] - ex.c_b_b))
        e_dev = abs(np.vdot(state.C, H @ state.C).real - two_mode_energy(tm, c, system.h_a, system.h_m))
        worst = max(worst, np.max(np.abs(d.atomic[0] - da)), np.max(np.abs(d.molecular[0] - dm)),
                    np.max(np.abs(H - H2)), rdm_dev, e_dev)
    report(capsys, 5, "two-mode closed forms equal the general machinery", worst <= 1e-10,
           f"max deviation {worst:.2e} <= 1e-10")


def test_criterion_06_frozen_orbital_rabi(capsys):
    start = time.perf_counter()
    grid = SpatialGrid(64, 16.0)
    # the molecular offset brings the two configurations close to resonance
    system = make_system(2, 1, 1, CONTACT, grid=grid, offset_m=0.5)
    state = default_initial_state(system)
    cfg = IntegratorConfig(dt=0.005, t_final=20.0, freeze_orbitals=True)
    records, _ = run_real_time(state, cfg, system, record_every=20)

    # 2x2 matrix from direct grid sums over the frozen orbitals
    phi, psi = state.orbitals.atomic[0], state.orbitals.molecular[0]
    dx = grid.spacing
    eps_a = (dx * np.vdot(phi, system.h_a.dense_matrix() @ phi)).real
    eps_m = (dx * np.vdot(psi, system.h_m.dense_matrix() @ psi)).real
    lam = CONVERSION_COUPLINGS
    e_atoms = 2 * eps_a + lam["lambda_a"] * dx * np.sum(np.abs(phi) ** 4)
    e_mol = eps_m
    g = lam["lambda_con"] * dx * np.sum(np.conj(psi) * phi**2)
    omega = np.sqrt((e_mol - e_atoms) ** 2 + 4 * abs(g) ** 2)
    t = np.array([r.time for r in records])
    analytic = 4 * abs(g) ** 2 / omega**2 * np.sin(0.5 * omega * t) ** 2
    dev = float(np.max(np.abs(np.array([r.n_molecules for r in records]) - analytic)))
    runtime = time.perf_counter() - start
    report(capsys, 6, "frozen-orbital Rabi oscillation", dev <= 1e-6 and runtime < 60 and analytic.max() > 0.1,
           f"max |Nm - analytic| {dev:.1e} <= 1e-6, peak Nm {analytic.max():.3f}, runtime {runtime:.1f} s")


def test_criterion_07a_trap_relaxation(capsys):
    rng = np.random.default_rng(107)
    worst = 0.0
    for omega, (N, M, Mm) in [(1.0, (4, 1, 1)), (1.0, (3, 2, 2)), (1.5, (4, 2, 1))]:
        system = make_system(N, M, Mm, InteractionSpec("contact"), omega=omega)
        # random orbitals, all particles as atoms: without conversion C stays in that sector
        start = replace(random_state(system, rng), C=default_initial_state(system).C)
        result = relax(start, IntegratorConfig(dt=0.02), system)
        worst = max(worst, abs(result.energy - N * omega / 2))
    report(capsys, "7a", "zero-coupling relaxation gives N omega / 2", worst <= 1e-6,
           f"max |E - N omega/2| {worst:.1e} <= 1e-6")


def _dense_periodic_second_derivative(n: int, length: float) -> np.ndarray:
    """Closed-form Fourier differentiation matrix for an even periodic grid."""
    h = 2 * np.pi / n
    j = np.arange(n)
    diff = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        D = -((-1.0) ** diff) / (2 * np.sin(0.5 * h * diff) ** 2)
    D[diff == 0] = -np.pi**2 / (3 * h**2) - 1 / 6
    return D * (2 * np.pi / length) ** 2


def _gp_ground_state(grid, potential, g, dtau=0.5, tol=1e-14, max_iter=20000):
    """Backward-Euler imaginary-time Gross-Pitaevskii solver on a dense matrix."""
    h0 = -0.5 * _dense_periodic_second_derivative(grid.n_points, grid.length) + np.diag(potential)
    f = np.exp(-grid.points**2).astype(complex)
    f /= np.sqrt(grid.spacing * np.vdot(f, f).real)
    eye = np.eye(grid.n_points)
    for _ in range(max_iter):
        new = np.linalg.solve(eye + dtau * (h0 + g * np.diag(np.abs(f) ** 2)), f)
        new /= np.sqrt(grid.spacing * np.vdot(new, new).real)
        if np.max(np.abs(new - f)) < tol:
            return new
        f = new
    raise RuntimeError("reference GP solver did not converge")


def test_criterion_07b_gross_pitaevskii_limit(capsys):
    N = 4
    interaction = InteractionSpec("contact", lambda_a=0.1, lambda_m=0.05, lambda_am=0.02, lambda_con=0.0)
    system = make_system(N, 1, 1, interaction)
    result = relax(default_initial_state(system), IntegratorConfig(dt=0.02), system,
                   tol_energy=1e-13, tol_orbital=1e-10)
    phi = result.state.orbitals.atomic[0]
    ref = _gp_ground_state(system.grid, system.h_a.potential, 0.1 * (N - 1))
    phase = np.vdot(ref, phi) / abs(np.vdot(ref, phi))
    dev = float(np.sqrt(system.grid.spacing) * np.linalg.norm(phi - phase * ref))
    report(capsys, "7b", "lambda_con = 0, M = 1 matches an independent GP solver", dev <= 1e-6,
           f"orbital norm difference {dev:.1e} <= 1e-6")


def test_criterion_07c_stationary_residuals(capsys):
    worst_res, worst_rise, rejected = 0.0, 0.0, {}
    for N, M, Mm in [(4, 1, 1), (4, 2, 1)]:
        system = make_system(N, M, Mm, CONTACT)
        result = relax(default_initial_state(system), IntegratorConfig(dt=0.02), system)
        rep = stationary_residuals(result.state, system)
        worst_res = max(worst_res, rep.orbital_residual, rep.eigen_residual)
        energies = np.array([row[2] for row in result.log])
        worst_rise = max(worst_rise, float(np.max(np.diff(energies))))
        rejected[M, Mm] = result.rejected_steps
        if (M, Mm) == (1, 1):
            s = result.state
            tm = TwoModeState(N, s.orbitals.atomic[0], s.orbitals.molecular[0], s.C)
            two = two_mode_stationary_residual(tm, TwoModeCouplings(**CONVERSION_COUPLINGS),
                                               system.h_a, system.h_m)
            worst_res = max(worst_res, two.worst)
    # the two-mode flow must descend without any step rejection
    ok = worst_res < 1e-7 and worst_rise <= 1e-12 and rejected[1, 1] == 0
    report(capsys, "7c", "relaxed states are stationary and the energy never rises", ok,
           f"max residual {worst_res:.1e} < 1e-7, max energy rise {worst_rise:.1e} <= 1e-12, "
           f"rejected steps {rejected[1, 1]} (M=1) / {rejected[2, 1]} (M=2)")


def test_criterion_08_gauge_invariance(capsys):
    rng = np.random.default_rng(108)
    worst = 0.0
    for N, M, Mm in SWEEP:
        system = make_system(N, M, Mm, CONTACT)
        for _ in range(3):
            state = random_state(system, rng)
            moved = gauge_transform(state, system.basis, rng.uniform(0, 2 * np.pi, M),
                                    rng.uniform(0, 2 * np.pi, Mm))
            a, b = observe(state, system), observe(moved, system)
            worst = max(worst, abs(a.energy - b.energy),
                        *(float(np.max(np.abs(getattr(a, f) - getattr(b, f))))
                          for f in ("density_a", "density_m", "occupations_a", "occupations_m")))
    report(capsys, 8, "orbital phase changes leave observables unchanged", worst <= 1e-12,
           f"max change {worst:.1e} <= 1e-12")


def test_criterion_09_decoupling(capsys):
    grid = SpatialGrid(64, 16.0)
    lams = dict(CONVERSION_COUPLINGS, lambda_con=0.0)
    worst = 0.0
    for interaction, (M, Mm) in [(InteractionSpec("contact", **lams), (1, 1)),
                                 (InteractionSpec("contact", **lams), (2, 2)),
                                 (InteractionSpec.delta_kernels(grid, **lams), (2, 1))]:
        system = make_system(4, M, Mm, interaction, grid=grid)
        records, _ = run_real_time(default_initial_state(system), IntegratorConfig(dt=0.01, t_final=5.0),
                                   system, record_every=10)
        worst = max(worst, max(r.n_molecules for r in records))
    report(capsys, 9, "no conversion coupling keeps molecules absent", worst < 1e-10,
           f"max <Nm> {worst:.1e} < 1e-10")


def test_criterion_10_general_kernel_consistency(capsys):
    rng = np.random.default_rng(110)
    grid = SpatialGrid(64, 16.0)
    delta = InteractionSpec.delta_kernels(grid, **CONVERSION_COUPLINGS)
    h_a, h_m = harmonic_specs(grid)
    orbitals = OrbitalSet(random_orbitals(grid, 2, rng), random_orbitals(grid, 2, rng))
    t_c = compute_integrals(orbitals.atomic, orbitals.molecular, CONTACT, h_a, h_m)
    t_g = compute_integrals(orbitals.atomic, orbitals.molecular, delta, h_a, h_m)
    dev_int = max(float(np.max(np.abs(getattr(t_c, k) - getattr(t_g, k))))
                  for k in ("W_a", "W_m", "W_am", "W_conv"))
    p_c = build_local_potentials(orbitals, CONTACT, grid)
    p_g = build_local_potentials(orbitals, delta, grid)
    dev_pot = max(float(np.max(np.abs(getattr(p_c, k) - getattr(p_g, k))))
                  for k in ("pot_a", "pot_m", "pot_am", "pot_ma", "conv_am", "conv_ma"))

    finals = []
    for interaction in (CONTACT, delta):
        system = make_system(4, 2, 1, interaction, grid=grid)
        start = random_state(system, np.random.default_rng(11))
        finals.append(run_real_time(start, IntegratorConfig(dt=0.005, t_final=0.5), system, 20)[1])
    a, b = finals
    dev_run = max(float(np.max(np.abs(a.C - b.C))),
                  float(np.max(np.abs(a.orbitals.atomic - b.orbitals.atomic))),
                  float(np.max(np.abs(a.orbitals.molecular - b.orbitals.molecular))))
    worst = max(dev_int, dev_pot, dev_run)
    report(capsys, 10, "discrete-delta kernels reproduce contact results", worst <= 1e-8,
           f"integrals {dev_int:.1e}, potentials {dev_pot:.1e}, propagation {dev_run:.1e} <= 1e-8")
