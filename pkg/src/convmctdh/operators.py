"""Orbital integrals and the sparse configuration-space Hamiltonian.

The Hamiltonian in second quantization is

    H = sum h^a_kq b+_k b_q + 1/2 sum W^a_ksql b+_k b+_s b_l b_q
      + sum h^m_k'q' c+_k' c_q' + 1/2 sum W^m_k's'q'l' c+_k' c+_s' c_l' c_q'
      + sum W^am_kk'qq' b+_k b_q c+_k' c_q'
      + 1/sqrt(2) sum [W^conv_k'kq c+_k' b_k b_q + h.c.]

Matrix elements are produced by applying the ladder strings to every
configuration (see :class:`OperatorStructure`); no closed-form tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fock import ATOM, MOLECULE, ConfigurationBasis, apply_string
from .grid import DimensionError, OneBodyOperatorSpec, SpatialGrid, apply_one_body

SQRT2 = np.sqrt(2.0)
KERNEL_NAMES = ("a", "m", "am", "conv")


@dataclass(frozen=True, eq=False)
class InteractionSpec:
    """Contact couplings or general two-body kernels sampled on the grid.

    For ``kind == "general"`` the kernels already include their strength;
    the lambda fields are then informational only.
    """

    kind: str = "contact"
    lambda_a: float = 0.0
    lambda_m: float = 0.0
    lambda_am: float = 0.0
    lambda_con: float = 0.0
    kernels: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("contact", "general"):
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "general":
            missing = [k for k in KERNEL_NAMES if k not in self.kernels]
            if missing:
                raise ValueError(f"general interaction lacks kernels {missing}")
            shapes = {np.shape(self.kernels[k]) for k in KERNEL_NAMES}
            if len(shapes) != 1:
                raise DimensionError(f"kernel shapes differ: {shapes}")
            for name in KERNEL_NAMES:
                w = np.asarray(self.kernels[name], dtype=float)
                if w.ndim != 2 or w.shape[0] != w.shape[1]:
                    raise DimensionError(f"kernel {name!r} must be square, got {w.shape}")
                if np.max(np.abs(w - w.T), initial=0.0) > 1e-12:
                    raise ValueError(f"kernel {name!r} is not symmetric")

    @property
    def is_contact(self) -> bool:
        return self.kind == "contact"

    def kernel(self, name: str) -> np.ndarray:
        return np.asarray(self.kernels[name], dtype=float)

    def couplings(self) -> dict:
        return {"a": self.lambda_a, "m": self.lambda_m, "am": self.lambda_am, "conv": self.lambda_con}

    @classmethod
    def delta_kernels(cls, grid: SpatialGrid, lambda_a=0.0, lambda_m=0.0,
                      lambda_am=0.0, lambda_con=0.0) -> "InteractionSpec":
        """General kernels lambda * delta_ij / dx, the grid image of lambda * delta(r - r')."""
        eye = np.eye(grid.n_points) / grid.spacing
        lams = dict(a=lambda_a, m=lambda_m, am=lambda_am, conv=lambda_con)
        return cls("general", lambda_a, lambda_m, lambda_am, lambda_con,
                   {k: lam * eye for k, lam in lams.items()})


@dataclass(frozen=True)
class IntegralTables:
    h_a: np.ndarray      # [k, q]
    h_m: np.ndarray      # [k', q']
    W_a: np.ndarray      # [k, s, q, l] = <phi_k phi_s | W | phi_q phi_l>
    W_m: np.ndarray      # [k', s', q', l']
    W_am: np.ndarray     # [k, k', q, q'] = <phi_k psi_k' | W | phi_q psi_q'>
    W_conv: np.ndarray   # [k', k, q] = <psi_k'(R) | W | phi_k phi_q>


def pair_products(fs: np.ndarray) -> np.ndarray:
    """P[k, q, i] = conj(f_k(x_i)) f_q(x_i)."""
    return np.conj(fs)[:, None, :] * fs[None, :, :]


def kernel_potential(grid: SpatialGrid, kernel: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """V[..., i] = sum_j dx K[i, j] pairs[..., j]."""
    return pairs @ kernel.T * grid.spacing


def compute_integrals(atomic: np.ndarray, molecular: np.ndarray, interaction: InteractionSpec,
                      h_a: OneBodyOperatorSpec, h_m: OneBodyOperatorSpec,
                      check: bool = True) -> IntegralTables:
    grid = h_a.grid
    phi = grid.check(np.atleast_2d(atomic))
    psi = grid.check(np.atleast_2d(molecular))
    if check:
        for name, fs in (("atomic", phi), ("molecular", psi)):
            dev = np.max(np.abs(grid.overlap(fs, fs) - np.eye(len(fs))))
            if dev > 1e-8:
                raise ValueError(f"{name} orbitals not orthonormal (deviation {dev:.2e})")
    dx = grid.spacing
    ha = grid.overlap(phi, apply_one_body(h_a, phi))
    hm = grid.overlap(psi, apply_one_body(h_m, psi))
    rho_phi = pair_products(phi)
    rho_psi = pair_products(psi)

    if interaction.is_contact:
        lam = interaction.couplings()
        W_a = lam["a"] * dx * np.einsum("kqi,sli->ksql", rho_phi, rho_phi)
        W_m = lam["m"] * dx * np.einsum("kqi,sli->ksql", rho_psi, rho_psi)
        W_am = lam["am"] * dx * np.einsum("kqi,abi->kaqb", rho_phi, rho_psi)
        W_conv = lam["conv"] * dx * np.einsum("ai,ki,qi->akq", np.conj(psi), phi, phi)
    else:
        pot_a = kernel_potential(grid, interaction.kernel("a"), rho_phi)
        pot_m = kernel_potential(grid, interaction.kernel("m"), rho_psi)
        # atom at r (first kernel slot), molecule at r'
        pot_am = kernel_potential(grid, interaction.kernel("am"), rho_psi)
        W_a = dx * np.einsum("kqi,sli->ksql", rho_phi, pot_a)
        W_m = dx * np.einsum("kqi,sli->ksql", rho_psi, pot_m)
        W_am = dx * np.einsum("kqi,abi->kaqb", rho_phi, pot_am)
        mid = np.conj(grid.midpoint_table(psi))
        W_conv = dx * dx * np.einsum("aij,ij,ki,qj->akq", mid, interaction.kernel("conv"), phi, phi)
    return IntegralTables(ha, hm, W_a, W_m, W_am, W_conv)


@dataclass(frozen=True)
class Couplings:
    """Nonzero <row| string |col> amplitudes; ``terms`` indexes the flattened tensor."""

    rows: np.ndarray
    cols: np.ndarray
    amps: np.ndarray
    terms: np.ndarray

    @classmethod
    def build(cls, basis: ConfigurationBasis, strings: dict) -> "Couplings":
        rows, cols, amps, terms = [], [], [], []
        for j, config in enumerate(basis.configs):
            for term, ops in strings.items():
                res = apply_string(config, ops)
                i = basis.lookup(res.target)
                if i is None:
                    continue
                rows.append(i)
                cols.append(j)
                amps.append(res.amplitude)
                terms.append(term)
        return cls(np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp),
                   np.array(amps, dtype=float), np.array(terms, dtype=np.intp))

    def weighted(self, tensor: np.ndarray) -> np.ndarray:
        return self.amps * np.ravel(tensor)[self.terms]

    def expectation(self, C: np.ndarray, n_terms: int) -> np.ndarray:
        """sum_{row, col} conj(C_row) amp C_col accumulated per term."""
        w = np.conj(C[self.rows]) * self.amps * C[self.cols]
        return _accumulate(self.terms, w, n_terms)


def _strings(species_pattern, dims):
    """Map flat tensor index -> ladder string for every index tuple."""
    out = {}
    for flat, idx in enumerate(itertools.product(*(range(d) for d in dims))):
        out[flat] = [(sp, dag, idx[pos]) for sp, dag, pos in species_pattern]
    return out


class OperatorStructure:
    """Orbital-independent ladder couplings for every Hamiltonian/RDM string.

    Tensor axis conventions (all match the reduced density matrices):
      one_a   [k, q]          b+_k b_q
      two_a   [k, s, l, q]    b+_k b+_s b_l b_q
      one_m   [k', q']        c+_k' c_q'
      two_m   [k', s', l', q']
      inter   [k, k', q, q']  b+_k b_q c+_k' c_q'
      conv    [k', k, q]      c+_k' b_k b_q   (rows in sector p, cols in p - 1)
    """

    def __init__(self, basis: ConfigurationBasis):
        self.basis = basis
        M, Mm = basis.M, basis.M_mol
        a, m = ATOM, MOLECULE
        self.shapes = {
            "one_a": (M, M), "two_a": (M, M, M, M),
            "one_m": (Mm, Mm), "two_m": (Mm, Mm, Mm, Mm),
            "inter": (M, Mm, M, Mm), "conv": (Mm, M, M),
        }
        patterns = {
            "one_a": [(a, True, 0), (a, False, 1)],
            "two_a": [(a, True, 0), (a, True, 1), (a, False, 2), (a, False, 3)],
            "one_m": [(m, True, 0), (m, False, 1)],
            "two_m": [(m, True, 0), (m, True, 1), (m, False, 2), (m, False, 3)],
            "inter": [(a, True, 0), (a, False, 2), (m, True, 1), (m, False, 3)],
            "conv": [(m, True, 0), (a, False, 1), (a, False, 2)],
        }
        self.couplings = {
            name: Couplings.build(basis, _strings(patterns[name], self.shapes[name]))
            for name in patterns
        }

    @cached_property
    def upper_mask(self) -> np.ndarray:
        """Which Hamiltonian coupling entries land on or above the diagonal."""
        rows, cols = self._hamiltonian_positions()
        return rows <= cols

    @cached_property
    def upper_pattern(self):
        """Sorted unique flat positions of the upper triangle and the scatter map."""
        rows, cols = self._hamiltonian_positions()
        mask = self.upper_mask
        flat = rows[mask] * self.basis.size + cols[mask]
        keys, inverse = np.unique(flat, return_inverse=True)
        return keys, inverse

    def _hamiltonian_positions(self):
        names = ("one_a", "two_a", "one_m", "two_m", "inter")
        rows = [self.couplings[n].rows for n in names] + [self.couplings["conv"].cols]
        cols = [self.couplings[n].cols for n in names] + [self.couplings["conv"].rows]
        return np.concatenate(rows), np.concatenate(cols)

    def expectation(self, name: str, C: np.ndarray) -> np.ndarray:
        shape = self.shapes[name]
        return self.couplings[name].expectation(C, int(np.prod(shape))).reshape(shape)


def operator_structure(basis: ConfigurationBasis) -> OperatorStructure:
    """Cached :class:`OperatorStructure` attached to ``basis``."""
    cached = basis.__dict__.get("_operator_structure")
    if cached is None:
        cached = OperatorStructure(basis)
        object.__setattr__(basis, "_operator_structure", cached)
    return cached


def _accumulate(index: np.ndarray, weights: np.ndarray, length: int) -> np.ndarray:
    """Deterministic scatter-add of complex weights."""
    out = np.bincount(index, weights=weights.real, minlength=length).astype(complex)
    out += 1j * np.bincount(index, weights=weights.imag, minlength=length)
    return out


@dataclass(eq=False)
class SparseHamiltonian:
    """Upper triangle (row <= col) in coordinate form, sorted by (row, col).

    The lower triangle is implied by Hermiticity.
    """

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.intp)
        self.cols = np.asarray(self.cols, dtype=np.intp)
        if np.any(self.rows > self.cols):
            raise ValueError("entries must satisfy row <= col")
        self.values = np.asarray(self.values, dtype=complex).copy()
        self._diag = self.rows == self.cols
        self.values[self._diag] = self.values[self._diag].real
        self._off = ~self._diag
        self._off_rows = self.rows[self._off]
        self._off_cols = self.cols[self._off]
        self._off_vals = self.values[self._off]
        self._off_conj = np.conj(self._off_vals)
        self.diagonal = _accumulate(self.rows[self._diag], self.values[self._diag],
                                    self.dimension).real

    def matvec(self, C: np.ndarray) -> np.ndarray:
        C = np.asarray(C)
        if C.shape != (self.dimension,):
            raise DimensionError(f"vector shape {C.shape} != ({self.dimension},)")
        y = self.diagonal * C
        y = y + _accumulate(self._off_rows, self._off_vals * C[self._off_cols], self.dimension)
        y = y + _accumulate(self._off_cols, self._off_conj * C[self._off_rows], self.dimension)
        return y

    def to_dense(self) -> np.ndarray:
        U = np.zeros((self.dimension, self.dimension), dtype=complex)
        np.add.at(U, (self.rows, self.cols), self.values)
        return U + U.conj().T - np.diag(np.diag(U).real)

    def dump(self) -> str:
        """Coordinate text, one ``row col re im`` line per stored entry."""
        return "".join(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n"
                       for r, c, v in zip(self.rows, self.cols, self.values))


def matvec(H: SparseHamiltonian, C: np.ndarray) -> np.ndarray:
    return H.matvec(C)


def assemble_hamiltonian(basis: ConfigurationBasis, tables: IntegralTables) -> SparseHamiltonian:
    st = operator_structure(basis)
    M, Mm = basis.M, basis.M_mol
    for name, arr, shape in (("h_a", tables.h_a, (M, M)), ("h_m", tables.h_m, (Mm, Mm)),
                             ("W_a", tables.W_a, (M,) * 4), ("W_m", tables.W_m, (Mm,) * 4),
                             ("W_am", tables.W_am, (M, Mm, M, Mm)),
                             ("W_conv", tables.W_conv, (Mm, M, M))):
        if np.shape(arr) != shape:
            raise DimensionError(f"{name} has shape {np.shape(arr)}, basis expects {shape}")

    weights = {
        "one_a": tables.h_a,
        "two_a": 0.5 * tables.W_a.transpose(0, 1, 3, 2),
        "one_m": tables.h_m,
        "two_m": 0.5 * tables.W_m.transpose(0, 1, 3, 2),
        "inter": tables.W_am,
    }
    vals = [st.couplings[name].weighted(tensor) for name, tensor in weights.items()]
    conv = st.couplings["conv"]
    # the creation part sits below the diagonal (higher p); store its adjoint above
    vals.append(np.conj(conv.weighted(tables.W_conv)) / SQRT2)
    vals = np.concatenate(vals)
    keys, inverse = st.upper_pattern
    total = _accumulate(inverse, vals[st.upper_mask], len(keys))
    n = basis.size
    return SparseHamiltonian(n, keys // n, keys % n, total)


def energy(H: SparseHamiltonian, C: np.ndarray) -> float:
    return float(np.real(np.vdot(C, H.matvec(C))))
