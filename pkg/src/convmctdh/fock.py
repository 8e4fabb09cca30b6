"""Configurations |n, m> of N - 2p atoms in M orbitals and p molecules in M' orbitals."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt
from typing import Iterator

import numpy as np

MAX_BASIS_SIZE = 10**7

ATOM = "atom"
MOLECULE = "molecule"
_SPECIES_ALIASES = {"atom": ATOM, "a": ATOM, "b": ATOM, "molecule": MOLECULE, "m": MOLECULE, "c": MOLECULE}


class BasisTooLargeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Configuration:
    atom_occ: tuple[int, ...]
    mol_occ: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "atom_occ", tuple(int(n) for n in self.atom_occ))
        object.__setattr__(self, "mol_occ", tuple(int(m) for m in self.mol_occ))
        if min(self.atom_occ + self.mol_occ, default=0) < 0:
            raise ValueError(f"negative occupation in {self}")

    @property
    def p(self) -> int:
        """Number of molecules."""
        return sum(self.mol_occ)

    @property
    def n_atoms(self) -> int:
        return sum(self.atom_occ)

    @property
    def weight(self) -> int:
        """Eigenvalue of N_a + 2 N_m."""
        return self.n_atoms + 2 * self.p

    def occupations(self, species: str) -> tuple[int, ...]:
        return self.atom_occ if _species(species) == ATOM else self.mol_occ

    def replace(self, species: str, orbital: int, value: int) -> "Configuration":
        if _species(species) == ATOM:
            occ = list(self.atom_occ)
            occ[orbital] = value
            return Configuration(tuple(occ), self.mol_occ)
        occ = list(self.mol_occ)
        occ[orbital] = value
        return Configuration(self.atom_occ, tuple(occ))


@dataclass(frozen=True)
class LadderResult:
    target: Configuration | None
    amplitude: float

    @property
    def annihilated(self) -> bool:
        return self.target is None


VACUUM_ANNIHILATED = LadderResult(None, 0.0)


def _species(species: str) -> str:
    try:
        return _SPECIES_ALIASES[species]
    except KeyError:
        raise ValueError(f"unknown species {species!r}") from None


def _check_orbital(c: Configuration, species: str, orbital: int) -> None:
    n_orb = len(c.occupations(species))
    if not 0 <= orbital < n_orb:
        raise IndexError(f"{species} orbital {orbital} out of range [0, {n_orb})")


def apply_annihilator(c: Configuration, species: str, orbital: int) -> LadderResult:
    """b_k |..n_k..> = sqrt(n_k) |..n_k - 1..> (c_k' for molecules)."""
    _check_orbital(c, species, orbital)
    n = c.occupations(species)[orbital]
    if n == 0:
        return VACUUM_ANNIHILATED
    return LadderResult(c.replace(species, orbital, n - 1), sqrt(n))


def apply_creator(c: Configuration, species: str, orbital: int) -> LadderResult:
    """b_k^dag |..n_k..> = sqrt(n_k + 1) |..n_k + 1..>."""
    _check_orbital(c, species, orbital)
    n = c.occupations(species)[orbital]
    return LadderResult(c.replace(species, orbital, n + 1), sqrt(n + 1))


def apply_string(c: Configuration, ops) -> LadderResult:
    """Apply a product of ladder operators, written left to right as in the
    operator expression, to ``c``; the rightmost acts first.

    ``ops`` is a sequence of (species, dagger, orbital) triples.
    """
    amplitude = 1.0
    target = c
    for species, dagger, orbital in reversed(list(ops)):
        res = (apply_creator if dagger else apply_annihilator)(target, species, orbital)
        if res.annihilated:
            return VACUUM_ANNIHILATED
        target = res.target
        amplitude *= res.amplitude
    return LadderResult(target, amplitude)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` non-negative ints summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def basis_size(N: int, M: int, M_mol: int) -> int:
    return sum(
        comb(N - 2 * p + M - 1, M - 1) * comb(p + M_mol - 1, M_mol - 1)
        for p in range(N // 2 + 1)
    )


@dataclass(frozen=True, eq=False)
class ConfigurationBasis:
    N: int
    M: int
    M_mol: int
    configs: tuple[Configuration, ...] = field(repr=False)
    index_of: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.configs)

    def __len__(self) -> int:
        return len(self.configs)

    def __getitem__(self, i: int) -> Configuration:
        return self.configs[i]

    def lookup(self, c: Configuration | None) -> int | None:
        """Index of ``c`` or None when it lies outside the basis."""
        if c is None:
            return None
        return self.index_of.get(c)

    @property
    def p_values(self) -> np.ndarray:
        return np.array([c.p for c in self.configs])

    @property
    def atom_occupations(self) -> np.ndarray:
        return np.array([c.atom_occ for c in self.configs], dtype=int).reshape(self.size, self.M)

    @property
    def mol_occupations(self) -> np.ndarray:
        return np.array([c.mol_occ for c in self.configs], dtype=int).reshape(self.size, self.M_mol)

    def sector(self, p: int) -> np.ndarray:
        """Indices of configurations with ``p`` molecules."""
        return np.flatnonzero(self.p_values == p)

    def dump(self) -> str:
        """One line per configuration: ``p | n1 ... nM | m1 ... mM'``."""
        lines = [
            f"{c.p} | {' '.join(map(str, c.atom_occ))} | {' '.join(map(str, c.mol_occ))}"
            for c in self.configs
        ]
        return "\n".join(lines) + "\n"


def enumerate_basis(N: int, M: int, M_mol: int, max_size: int = MAX_BASIS_SIZE) -> ConfigurationBasis:
    """All configurations with |n| + 2|m| = N, ordered by p, then (n, m) lexicographically."""
    if N < 0 or M < 1 or M_mol < 1:
        raise ValueError(f"need N >= 0, M >= 1, M' >= 1; got N={N}, M={M}, M'={M_mol}")
    size = basis_size(N, M, M_mol)
    if size > max_size:
        raise BasisTooLargeError(
            f"basis for N={N}, M={M}, M'={M_mol} has {size} configurations (limit {max_size})"
        )
    configs = []
    for p in range(N // 2 + 1):
        block = [
            Configuration(n, m)
            for n in _compositions(N - 2 * p, M)
            for m in _compositions(p, M_mol)
        ]
        configs.extend(sorted(block))
    configs = tuple(configs)
    return ConfigurationBasis(N, M, M_mol, configs, {c: i for i, c in enumerate(configs)})


def all_atoms_configuration(N: int, M: int, M_mol: int) -> Configuration:
    return Configuration((N,) + (0,) * (M - 1), (0,) * M_mol)
