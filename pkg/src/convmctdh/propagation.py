"""Real- and imaginary-time integration of orbitals and coefficients together.

The joint state (atomic orbitals, molecular orbitals, C) is advanced by
classical RK4 or an embedded Dormand-Prince 5(4) pair; the Hamiltonian
matrix is rebuilt at every stage because the orbitals move within a step.
Imaginary time renormalizes C and Loewdin-orthonormalizes the orbitals
after every accepted step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .eom import (ConversionSystem, OrbitalSet, build_local_potentials, orbital_generators)
from .fock import all_atoms_configuration
from .grid import lowest_eigenfunctions
from .operators import SparseHamiltonian
from .rdm import compute_rdms, natural_occupations, one_body_density

log = logging.getLogger(__name__)

REAL_TIME = "real_time"
IMAGINARY_TIME = "imaginary_time"
MIN_STEP = 1e-12
# relative energy increase tolerated in imaginary time before a step is rejected
_ENERGY_ROUNDOFF = 1e-13


class PropagationError(RuntimeError):
    """Integration aborted; ``last_good`` holds the last accepted state."""

    def __init__(self, message: str, last_good: "PropagationState | None" = None):
        super().__init__(message)
        self.last_good = last_good


class RelaxationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropagationState:
    time: float
    orbitals: OrbitalSet
    C: np.ndarray
    mode: str = REAL_TIME

    def __post_init__(self):
        if self.mode not in (REAL_TIME, IMAGINARY_TIME):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "C", np.asarray(self.C, dtype=complex))


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4"
    dt: float = 1e-3
    t_final: float = 1.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    freeze_orbitals: bool = False
    renorm_each_step: bool = True

    def __post_init__(self):
        if self.scheme not in ("rk4", "rk45"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.dt:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.dt <= self.t_final:
            raise ValueError(f"dt={self.dt} exceeds t_final={self.t_final}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ObservableRecord:
    time: float
    energy: float
    n_atoms: float
    n_molecules: float
    norm_C: float
    occupations_a: np.ndarray
    occupations_m: np.ndarray
    density_a: np.ndarray = field(repr=False)
    density_m: np.ndarray = field(repr=False)
    conversion_coherence: float
    orthonormality_error: float


def default_initial_state(system: ConversionSystem, mode: str = REAL_TIME) -> PropagationState:
    """Lowest trap eigenfunctions for both species, all particles as atoms in orbital 1."""
    basis = system.basis
    orbitals = OrbitalSet(lowest_eigenfunctions(system.h_a, basis.M),
                          lowest_eigenfunctions(system.h_m, basis.M_mol))
    C = np.zeros(basis.size, dtype=complex)
    C[basis.lookup(all_atoms_configuration(basis.N, basis.M, basis.M_mol))] = 1.0
    return PropagationState(0.0, orbitals, C, mode)


def loewdin(grid, fs: np.ndarray) -> np.ndarray:
    """Symmetric orthonormalization S^(-1/2) applied to the rows of ``fs``."""
    S = grid.overlap(fs, fs)
    vals, vecs = np.linalg.eigh(0.5 * (S + S.conj().T))
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return inv_sqrt.T @ fs


class _Packer:
    def __init__(self, system: ConversionSystem):
        b, n = system.basis, system.grid.n_points
        self.shape_a = (b.M, n)
        self.shape_m = (b.M_mol, n)
        self.na = b.M * n
        self.nm = b.M_mol * n

    def pack(self, atomic, molecular, C) -> np.ndarray:
        return np.concatenate([np.ravel(atomic), np.ravel(molecular), C])

    def unpack(self, y):
        a = y[:self.na].reshape(self.shape_a)
        m = y[self.na:self.na + self.nm].reshape(self.shape_m)
        return OrbitalSet(a, m), y[self.na + self.nm:]


class Propagator:
    """Right-hand side and step logic for one system and one time mode."""

    def __init__(self, system: ConversionSystem, config: IntegratorConfig, mode: str = REAL_TIME):
        self.system = system
        self.config = config
        self.mode = mode
        self.packer = _Packer(system)
        self._frozen_H: SparseHamiltonian | None = None
        # d y / dt = factor * K with i dy/dt = K in real time, dy/dtau = -K in imaginary time
        self.factor = -1j if mode == REAL_TIME else -1.0

    def hamiltonian(self, orbitals: OrbitalSet) -> SparseHamiltonian:
        if self.config.freeze_orbitals:
            if self._frozen_H is None:
                self._frozen_H = self.system.hamiltonian(orbitals, check=False)
            return self._frozen_H
        return self.system.hamiltonian(orbitals, check=False)

    def rhs(self, y: np.ndarray) -> np.ndarray:
        orbitals, C = self.packer.unpack(y)
        H = self.hamiltonian(orbitals)
        dC = self.factor * H.matvec(C)
        if self.config.freeze_orbitals:
            return self.packer.pack(np.zeros(self.packer.na), np.zeros(self.packer.nm), dC)
        rdms = compute_rdms(self.system.basis, C, check=False)
        ws = build_local_potentials(orbitals, self.system.interaction, self.system.grid)
        ka, km = orbital_generators(orbitals, rdms, ws, self.system)
        return self.packer.pack(self.factor * ka, self.factor * km, dC)

    def _finite(self, y, state, where):
        if not np.all(np.isfinite(y)):
            raise PropagationError(f"non-finite values in {where} at t={state.time:.6g}", state)

    def rk4(self, y: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(y)
        k2 = self.rhs(y + 0.5 * dt * k1)
        k3 = self.rhs(y + 0.5 * dt * k2)
        k4 = self.rhs(y + dt * k3)
        return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def finalize(self, y: np.ndarray) -> tuple[OrbitalSet, np.ndarray]:
        orbitals, C = self.packer.unpack(y)
        if self.mode == IMAGINARY_TIME and self.config.renorm_each_step:
            C = C / np.linalg.norm(C)
            if not self.config.freeze_orbitals:
                grid = self.system.grid
                orbitals = OrbitalSet(loewdin(grid, orbitals.atomic), loewdin(grid, orbitals.molecular))
        return OrbitalSet(orbitals.atomic.copy(), orbitals.molecular.copy()), C.copy()

    def step(self, state: PropagationState, dt: float) -> PropagationState:
        """One fixed RK4 step."""
        y = self.packer.pack(state.orbitals.atomic, state.orbitals.molecular, state.C)
        y_new = self.rk4(y, dt)
        self._finite(y_new, state, "RK4 step")
        orbitals, C = self.finalize(y_new)
        return PropagationState(state.time + dt, orbitals, C, self.mode)


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                          -92097 / 339200, 187 / 2100, 1 / 40])


def _dp_attempt(prop: Propagator, y: np.ndarray, dt: float, k1: np.ndarray):
    ks = [k1]
    for i in range(1, 7):
        yi = y + dt * sum(a * k for a, k in zip(_DP_A[i], ks))
        ks.append(prop.rhs(yi))
    y_new = y + dt * sum(b * k for b, k in zip(_DP_B, ks) if b)
    err = dt * sum(e * k for e, k in zip(_DP_E, ks) if e)
    return y_new, err, ks[-1]


def _advance(prop: Propagator, state: PropagationState, t_end: float, dt: float,
             on_step: Callable[[PropagationState], None] | None = None):
    """Integrate from state.time to t_end; returns (state, suggested dt)."""
    cfg = prop.config
    if cfg.scheme == "rk4":
        n_steps = max(1, int(round((t_end - state.time) / dt)))
        h = (t_end - state.time) / n_steps
        for _ in range(n_steps):
            state = prop.step(state, h)
            if on_step:
                on_step(state)
        return state, dt

    y = prop.packer.pack(state.orbitals.atomic, state.orbitals.molecular, state.C)
    k1 = prop.rhs(y)
    while state.time < t_end - 1e-14 * max(1.0, abs(t_end)):
        h = min(dt, t_end - state.time)
        if h < MIN_STEP:
            raise PropagationError(f"step size underflow ({h:.3e}) at t={state.time:.6g}", state)
        y_new, err, k_last = _dp_attempt(prop, y, h, k1)
        if not np.all(np.isfinite(y_new)):
            dt = 0.25 * h
            continue
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
        if err_norm <= 1.0:
            orbitals, C = prop.finalize(y_new)
            state = PropagationState(state.time + h, orbitals, C, prop.mode)
            y = prop.packer.pack(orbitals.atomic, orbitals.molecular, C)
            k1 = k_last if prop.mode == REAL_TIME else prop.rhs(y)
            if on_step:
                on_step(state)
            grow = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
            dt = h * grow if h == dt else max(dt, h * grow)
        else:
            dt = h * max(0.2, 0.9 * err_norm ** -0.2)
            if dt < MIN_STEP:
                raise PropagationError(f"step size underflow ({dt:.3e}) at t={state.time:.6g}", state)
    return state, dt


def step(state: PropagationState, config: IntegratorConfig, system: ConversionSystem) -> PropagationState:
    """Advance by one step of size config.dt (an adaptive scheme may sub-step)."""
    prop = Propagator(system, config, state.mode)
    return _advance(prop, state, state.time + config.dt, config.dt)[0]


def observe(state: PropagationState, system: ConversionSystem) -> ObservableRecord:
    rdms = compute_rdms(system.basis, state.C, check=False)
    H = system.hamiltonian(state.orbitals, check=False)
    grid = system.grid
    return ObservableRecord(
        time=state.time,
        energy=float(np.vdot(state.C, H.matvec(state.C)).real),
        n_atoms=rdms.n_atoms,
        n_molecules=rdms.n_molecules,
        norm_C=float(np.linalg.norm(state.C)),
        occupations_a=natural_occupations(rdms.rho_a),
        occupations_m=natural_occupations(rdms.rho_m),
        density_a=one_body_density(state.orbitals.atomic, rdms.rho_a),
        density_m=one_body_density(state.orbitals.molecular, rdms.rho_m),
        conversion_coherence=float(np.sum(np.abs(rdms.rho_conv))),
        orthonormality_error=state.orbitals.orthonormality_error(grid),
    )


def run_real_time(initial: PropagationState, config: IntegratorConfig, system: ConversionSystem,
                  record_every: int = 1, on_record: Callable | None = None):
    """Real-time run from ``initial.time`` to ``config.t_final``.

    A state coming out of imaginary time restarts the clock at 0.
    Returns (records, final state).  For RK4 a record is taken every
    ``record_every`` steps; for RK45 every ``record_every * dt`` of simulated
    time.  The final time is always recorded.  ``on_record(index, state,
    record)`` is called for each record.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    # imaginary time is not a real-time origin
    start = 0.0 if initial.mode == IMAGINARY_TIME else initial.time
    if not config.t_final > start:
        raise ValueError(f"t_final={config.t_final} is not after the start time {start}")
    state = replace(initial, time=start, mode=REAL_TIME)
    prop = Propagator(system, config, REAL_TIME)
    records = [observe(state, system)]
    if on_record:
        on_record(0, state, records[-1])
    interval = record_every * config.dt
    n_chunks = max(1, int(round((config.t_final - state.time) / interval)))
    dt = config.dt
    for i in range(n_chunks):
        t_end = config.t_final if i == n_chunks - 1 else state.time + interval
        state, dt = _advance(prop, state, t_end, dt)
        records.append(observe(state, system))
        if on_record:
            on_record(len(records) - 1, state, records[-1])
    return records, state


def propagate(initial: PropagationState, config: IntegratorConfig, system: ConversionSystem,
              record_every: int = 1) -> list[ObservableRecord]:
    return run_real_time(initial, config, system, record_every)[0]


@dataclass(frozen=True)
class StationaryReport:
    orbital_residual: float
    eigen_residual: float
    energy: float

    @property
    def worst(self) -> float:
        return max(self.orbital_residual, self.eigen_residual)


def stationary_residuals(state: PropagationState, system: ConversionSystem) -> StationaryReport:
    """Norms of the projected orbital equations and of H C - eps C."""
    rdms = compute_rdms(system.basis, state.C, check=False)
    ws = build_local_potentials(state.orbitals, system.interaction, system.grid)
    ka, km = orbital_generators(state.orbitals, rdms, ws, system)
    # weight each orbital's residual by its occupation so empty orbitals drop out
    grid = system.grid
    ra = np.sqrt(np.abs(np.einsum("kq,kq->", rdms.rho_a, grid.overlap(ka, ka))))
    rm = np.sqrt(np.abs(np.einsum("kq,kq->", rdms.rho_m, grid.overlap(km, km))))
    H = system.hamiltonian(state.orbitals, check=False)
    HC = H.matvec(state.C)
    energy = float(np.vdot(state.C, HC).real)
    return StationaryReport(float(max(ra, rm)), float(np.linalg.norm(HC - energy * state.C)), energy)


@dataclass
class RelaxResult:
    state: PropagationState
    energy: float
    iterations: int
    # (iteration, tau, energy, delta_e, orbital_residual, eigen_residual)
    log: list = field(default_factory=list)
    report: StationaryReport | None = None
    rejected_steps: int = 0


def relax(initial: PropagationState, config: IntegratorConfig, system: ConversionSystem,
          tol_energy: float = 1e-10, tol_orbital: float = 1e-8, max_iter: int = 100000) -> RelaxResult:
    """Imaginary-time relaxation.

    Stops once the energy change per step is below ``tol_energy`` and both
    the orbital residual and the eigen-residual |H C - E C| are below
    ``tol_orbital``.  A step that raises the energy beyond roundoff is
    rejected and retried at half the size; the step then grows back to
    ``config.dt``.  This happens when a nearly empty orbital passes through
    the regularization scale.
    """
    state = replace(initial, mode=IMAGINARY_TIME)
    norm = np.linalg.norm(state.C)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"initial coefficients not normalized (norm {norm:.12g})")
    prop = Propagator(system, config, IMAGINARY_TIME)
    e_old = observe_energy(state, system)
    result = RelaxResult(state, e_old, 0, [(0, 0.0, e_old, np.nan, np.nan, np.nan)])
    dt = config.dt
    h = config.dt
    streak = 0
    for it in range(1, max_iter + 1):
        while True:
            if config.scheme == "rk45":
                trial, dt = _advance(prop, state, state.time + dt, dt)
            else:
                trial = prop.step(state, h)
            report = stationary_residuals(trial, system) if not config.freeze_orbitals else None
            e_new = report.energy if report else observe_energy(trial, system)
            if e_new <= e_old + _ENERGY_ROUNDOFF * max(1.0, abs(e_old)):
                break
            result.rejected_steps += 1
            streak = 0
            h *= 0.5
            dt *= 0.5
            if h < MIN_STEP or dt < MIN_STEP:
                raise RelaxationError(f"energy rises for every step size at tau={state.time:.6g}")
        state = trial
        streak += 1
        if h < config.dt and streak >= 10:
            h = min(config.dt, 2 * h)
            streak = 0
        orb_res = report.orbital_residual if report else 0.0
        eig_res = report.eigen_residual if report else _eigen_residual(state, system)
        result.log.append((it, state.time, e_new, e_new - e_old, orb_res, eig_res))
        converged = abs(e_new - e_old) < tol_energy and max(orb_res, eig_res) < tol_orbital
        e_old = e_new
        if converged:
            result.state, result.energy, result.iterations = state, e_new, it
            result.report = stationary_residuals(state, system)
            return result
    report = stationary_residuals(state, system)
    raise RelaxationError(
        f"no convergence after {max_iter} iterations: last dE={result.log[-1][3]:.3e}, "
        f"orbital residual={report.orbital_residual:.3e}, eigen residual={report.eigen_residual:.3e}"
    )


def observe_energy(state: PropagationState, system: ConversionSystem) -> float:
    H = system.hamiltonian(state.orbitals, check=False)
    return float(np.vdot(state.C, H.matvec(state.C)).real)


def _eigen_residual(state: PropagationState, system: ConversionSystem) -> float:
    HC = system.hamiltonian(state.orbitals, check=False).matvec(state.C)
    return float(np.linalg.norm(HC - np.vdot(state.C, HC).real * state.C))


def gauge_transform(state: PropagationState, basis, beta, gamma) -> PropagationState:
    """Rephase orbitals by exp(i beta_k), exp(i gamma_k') and compensate in C.

    ``beta`` and ``gamma`` are scalars or per-orbital arrays; configuration
    (n, m) picks up exp(-i (n . beta + m . gamma)), leaving the many-body
    wavefunction unchanged.
    """
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (basis.M,))
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (basis.M_mol,))
    phases = basis.atom_occupations @ beta + basis.mol_occupations @ gamma
    orbitals = OrbitalSet(np.exp(1j * beta)[:, None] * state.orbitals.atomic,
                          np.exp(1j * gamma)[:, None] * state.orbitals.molecular)
    return PropagationState(state.time, orbitals, np.exp(-1j * phases) * state.C, state.mode)
