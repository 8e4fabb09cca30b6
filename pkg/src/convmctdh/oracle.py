"""Brute-force dense reference built from explicit ladder-operator matrices.

Ladder matrices act on the extended space of all configurations with
weight |n| + 2|m| <= N, so strings whose annihilators act first never leave
it.  Products are formed by plain matrix multiplication and then restricted
to the weight-N sector.  Meant for validation only (size <= 4000).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fock import ATOM, MOLECULE, ConfigurationBasis, apply_annihilator, enumerate_basis
from .operators import IntegralTables
from .rdm import RdmBundle

MAX_ORACLE_SIZE = 4000

_TOKEN = re.compile(r"^(?P<sp>[bcam])(?P<dag>†|\^|\+|\^\\dagger|\\dagger)?_?\{?(?P<idx>\d+)\}?$")


class OracleTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class DenseOperator:
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, C: np.ndarray) -> complex:
        return complex(np.vdot(C, self.matrix @ C))


def parse_expression(expression) -> list[tuple[str, bool, int]]:
    """Ladder string to (species, dagger, 0-based orbital) triples.

    Accepts text such as ``"c^1 b1 b2"`` or ``"c†_1 b_1 b_2"`` (orbitals
    1-based) or an iterable of (species, dagger, orbital) triples (0-based).
    """
    if isinstance(expression, str):
        tokens = expression.split()
        if not tokens:
            raise ValueError("empty operator expression")
        ops = []
        for tok in tokens:
            match = _TOKEN.match(tok)
            if not match or int(match["idx"]) < 1:
                raise ValueError(f"malformed ladder symbol {tok!r}")
            species = ATOM if match["sp"] in "ba" else MOLECULE
            ops.append((species, match["dag"] is not None, int(match["idx"]) - 1))
        return ops
    ops = []
    for item in expression:
        try:
            species, dagger, orbital = item
        except (TypeError, ValueError):
            raise ValueError(f"malformed ladder term {item!r}") from None
        if species not in (ATOM, MOLECULE, "a", "b", "m", "c") or int(orbital) < 0:
            raise ValueError(f"malformed ladder term {item!r}")
        ops.append((ATOM if species in (ATOM, "a", "b") else MOLECULE, bool(dagger), int(orbital)))
    if not ops:
        raise ValueError("empty operator expression")
    return ops


class LadderAlgebra:
    """Dense annihilator matrices on the weight <= N space."""

    def __init__(self, basis: ConfigurationBasis):
        if basis.size > MAX_ORACLE_SIZE:
            raise OracleTooLargeError(f"basis size {basis.size} exceeds oracle limit {MAX_ORACLE_SIZE}")
        self.basis = basis
        configs = []
        for weight in range(basis.N + 1):
            configs.extend(enumerate_basis(weight, basis.M, basis.M_mol).configs)
        if len(configs) > MAX_ORACLE_SIZE:
            raise OracleTooLargeError(f"extended space {len(configs)} exceeds oracle limit")
        self.configs = configs
        self.index = {c: i for i, c in enumerate(configs)}
        self.weights = np.array([c.weight for c in configs])
        self.sector = np.array([self.index[c] for c in basis.configs])
        self.annihilators = {
            ATOM: [self._annihilator(ATOM, k) for k in range(basis.M)],
            MOLECULE: [self._annihilator(MOLECULE, k) for k in range(basis.M_mol)],
        }

    def _annihilator(self, species, orbital):
        d = len(self.configs)
        mat = np.zeros((d, d))
        for j, c in enumerate(self.configs):
            res = apply_annihilator(c, species, orbital)
            if not res.annihilated:
                mat[self.index[res.target], j] = res.amplitude
        return mat

    @property
    def dimension(self) -> int:
        return len(self.configs)

    def ladder(self, species: str, dagger: bool, orbital: int) -> np.ndarray:
        mats = self.annihilators[species]
        if not 0 <= orbital < len(mats):
            raise ValueError(f"{species} orbital {orbital} out of range")
        a = mats[orbital]
        return a.T if dagger else a

    def extended_operator(self, expression) -> np.ndarray:
        out = np.eye(self.dimension)
        for species, dagger, orbital in parse_expression(expression):
            out = out @ self.ladder(species, dagger, orbital)
        return out

    def build_operator(self, expression) -> DenseOperator:
        full = self.extended_operator(expression)
        return DenseOperator(full[np.ix_(self.sector, self.sector)].astype(complex))

    @cached_property
    def term_operators(self) -> dict:
        """Dense matrices of every Hamiltonian string, keyed by (name, index tuple)."""
        M, Mm = self.basis.M, self.basis.M_mol
        a, m = ATOM, MOLECULE
        out = {}
        r, rm = range(M), range(Mm)
        for k in r:
            for q in r:
                out["one_a", (k, q)] = self.build_operator([(a, 1, k), (a, 0, q)]).matrix
        for k in rm:
            for q in rm:
                out["one_m", (k, q)] = self.build_operator([(m, 1, k), (m, 0, q)]).matrix
        for k, s, l, q in np.ndindex(M, M, M, M):
            out["two_a", (k, s, l, q)] = self.build_operator(
                [(a, 1, k), (a, 1, s), (a, 0, l), (a, 0, q)]).matrix
        for k, s, l, q in np.ndindex(Mm, Mm, Mm, Mm):
            out["two_m", (k, s, l, q)] = self.build_operator(
                [(m, 1, k), (m, 1, s), (m, 0, l), (m, 0, q)]).matrix
        for k, kp, q, qp in np.ndindex(M, Mm, M, Mm):
            out["inter", (k, kp, q, qp)] = self.build_operator(
                [(a, 1, k), (a, 0, q), (m, 1, kp), (m, 0, qp)]).matrix
        for kp, k, q in np.ndindex(Mm, M, M):
            out["conv", (kp, k, q)] = self.build_operator([(m, 1, kp), (a, 0, k), (a, 0, q)]).matrix
        return out

    def hamiltonian(self, tables: IntegralTables) -> DenseOperator:
        """Second-quantized Hamiltonian summed term by term."""
        H = np.zeros((self.basis.size,) * 2, dtype=complex)
        for (name, idx), mat in self.term_operators.items():
            if name == "one_a":
                H += tables.h_a[idx] * mat
            elif name == "one_m":
                H += tables.h_m[idx] * mat
            elif name == "two_a":
                k, s, l, q = idx
                H += 0.5 * tables.W_a[k, s, q, l] * mat
            elif name == "two_m":
                k, s, l, q = idx
                H += 0.5 * tables.W_m[k, s, q, l] * mat
            elif name == "inter":
                H += tables.W_am[idx] * mat
            else:
                x = tables.W_conv[idx] / np.sqrt(2.0) * mat
                H += x + x.conj().T
        return DenseOperator(H)

    def rdms(self, C: np.ndarray) -> RdmBundle:
        M, Mm = self.basis.M, self.basis.M_mol
        shapes = {"one_a": (M, M), "one_m": (Mm, Mm), "two_a": (M,) * 4, "two_m": (Mm,) * 4,
                  "inter": (M, Mm, M, Mm), "conv": (Mm, M, M)}
        out = {name: np.zeros(shape, dtype=complex) for name, shape in shapes.items()}
        for (name, idx), mat in self.term_operators.items():
            out[name][idx] = np.vdot(C, mat @ C)
        return RdmBundle(out["one_a"], out["one_m"], out["two_a"], out["two_m"],
                         out["inter"], out["conv"])


def build_operator(basis: ConfigurationBasis, expression) -> DenseOperator:
    return LadderAlgebra(basis).build_operator(expression)


def _check_hermitian(H) -> np.ndarray:
    H = H.matrix if isinstance(H, DenseOperator) else np.asarray(H)
    dev = np.max(np.abs(H - H.conj().T), initial=0.0)
    if dev > 1e-10 * max(1.0, np.max(np.abs(H), initial=0.0)):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.2e})")
    return 0.5 * (H + H.conj().T)


def exact_evolve(H, C0: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) C0 by full eigendecomposition."""
    vals, vecs = np.linalg.eigh(_check_hermitian(H))
    return vecs @ (np.exp(-1j * vals * t) * (vecs.conj().T @ C0))


def exact_ground_state(H) -> tuple[float, np.ndarray]:
    vals, vecs = np.linalg.eigh(_check_hermitian(H))
    return float(vals[0]), vecs[:, 0]
