"""Uniform periodic 1-D grid, spectral one-body operators and quadrature.

Units: hbar = 1.  The kinetic term uses the discrete Fourier transform, so
every grid function is treated as periodic on [-L/2, L/2).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class DimensionError(ValueError):
    """Raised when array lengths disagree with the grid."""


@dataclass(frozen=True)
class SpatialGrid:
    n_points: int
    length: float

    def __post_init__(self):
        if self.n_points < 8 or self.n_points % 2:
            raise ValueError(f"n_points must be even and >= 8, got {self.n_points}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def points(self) -> np.ndarray:
        return -0.5 * self.length + self.spacing * np.arange(self.n_points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[-1] != self.n_points:
            raise DimensionError(
                f"grid function has {f.shape[-1]} samples, grid has {self.n_points}"
            )
        return f

    def inner(self, f, g):
        """Quadrature of conj(f) * g along the last axis."""
        f = self.check(f)
        g = self.check(g)
        return np.sum(np.conj(f) * g, axis=-1) * self.spacing

    def norm(self, f) -> float:
        return float(np.sqrt(np.real(self.inner(f, f))))

    def overlap(self, fs, gs) -> np.ndarray:
        """Matrix S[k, q] = <f_k|g_q> for stacked grid functions."""
        fs = self.check(np.atleast_2d(fs))
        gs = self.check(np.atleast_2d(gs))
        return np.conj(fs) @ gs.T * self.spacing

    def second_derivative(self, f) -> np.ndarray:
        f = self.check(f)
        return np.fft.ifft(-(self.wavenumbers**2) * np.fft.fft(f, axis=-1), axis=-1)

    def interpolate_half_points(self, f, shift: float) -> np.ndarray:
        """Periodic linear interpolation of f at x_i + shift.

        ``shift`` must be an integer or half-integer multiple of the spacing;
        integer multiples reduce to an exact cyclic rotation.
        """
        f = self.check(f)
        halves = 2.0 * shift / self.spacing
        j = int(round(halves))
        if abs(halves - j) > 1e-9 * max(1.0, abs(halves)):
            raise ValueError(f"shift {shift} is not a half-integer multiple of the spacing")
        if j % 2 == 0:
            return np.roll(f, -j // 2, axis=-1)
        lo = (j - 1) // 2
        return 0.5 * (np.roll(f, -lo, axis=-1) + np.roll(f, -(lo + 1), axis=-1))

    def half_point_extension(self, f) -> np.ndarray:
        """Samples of f at x_0, x_0 + dx/2, x_1, ... x_{n-1} (length 2n-1).

        Entry s is f at the midpoint (x_i + x_j)/2 for every i + j = s; odd
        entries use linear interpolation.  No wrap-around: midpoints of two
        box positions stay inside the box.
        """
        f = self.check(f)
        n = self.n_points
        ext = np.empty(f.shape[:-1] + (2 * n - 1,), dtype=np.result_type(f, float))
        ext[..., 0::2] = f
        ext[..., 1::2] = 0.5 * (f[..., :-1] + f[..., 1:])
        return ext

    def midpoint_table(self, f) -> np.ndarray:
        """T[..., i, j] = f((x_i + x_j) / 2)."""
        return self.half_point_extension(f)[..., self._pair_sum]

    def midpoint_adjoint(self, table) -> np.ndarray:
        """Adjoint of :meth:`midpoint_table` w.r.t. the plain sample sum.

        Returns g with sum_l conj(u_l) g_l == sum_ij conj(midpoint_table(u))_ij table_ij
        for every u.
        """
        n = self.n_points
        table = np.asarray(table)
        flat = table.reshape(table.shape[:-2] + (n * n,))
        idx = self._pair_sum.ravel()
        sums = np.zeros(table.shape[:-2] + (2 * n - 1,), dtype=np.result_type(table, float))
        for s_idx in np.ndindex(*table.shape[:-2]):
            sums[s_idx] = np.bincount(idx, weights=flat[s_idx].real, minlength=2 * n - 1)
            if np.iscomplexobj(flat):
                sums[s_idx] = sums[s_idx] + 1j * np.bincount(
                    idx, weights=flat[s_idx].imag, minlength=2 * n - 1
                )
        out = sums[..., 0::2].copy()
        out[..., :-1] += 0.5 * sums[..., 1::2]
        out[..., 1:] += 0.5 * sums[..., 1::2]
        return out

    @cached_property
    def _pair_sum(self) -> np.ndarray:
        i = np.arange(self.n_points)
        return i[:, None] + i[None, :]


@dataclass(frozen=True, eq=False)
class OneBodyOperatorSpec:
    """h = -(1/2 mass) d^2/dx^2 + V(x) + energy_offset on ``grid``."""

    grid: SpatialGrid
    mass: float
    potential: np.ndarray = field(repr=False)
    energy_offset: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        pot = np.asarray(self.potential, dtype=float)
        if pot.shape != (self.grid.n_points,):
            raise DimensionError(
                f"potential has shape {pot.shape}, expected ({self.grid.n_points},)"
            )
        pot.setflags(write=False)
        object.__setattr__(self, "potential", pot)

    def dense_matrix(self) -> np.ndarray:
        """Explicit n x n matrix of the operator (small grids only)."""
        n = self.grid.n_points
        return np.stack([apply_one_body(self, e) for e in np.eye(n)], axis=-1)


def apply_one_body(spec: OneBodyOperatorSpec, f) -> np.ndarray:
    """-(1/2m) f'' + (V + offset) f along the last axis of ``f``."""
    f = spec.grid.check(f)
    kinetic = -0.5 / spec.mass * spec.grid.second_derivative(f)
    return kinetic + (spec.potential + spec.energy_offset) * f


_HARMONIC = re.compile(r"^\s*harmonic\(\s*([^)]+?)\s*\)\s*$")


def potential_from_text(grid: SpatialGrid, text: str, mass: float,
                        base_dir: Path | None = None) -> np.ndarray:
    """Parse a potential description.

    ``harmonic(omega)`` gives 0.5 * mass * omega**2 * x**2, ``none`` gives
    zero, anything else is read as a file with one value per grid point.
    """
    text = text.strip()
    if text.lower() == "none":
        return np.zeros(grid.n_points)
    match = _HARMONIC.match(text)
    if match:
        omega = float(match.group(1))
        return 0.5 * mass * omega**2 * grid.points**2
    path = Path(text)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ValueError(f"potential {text!r} is neither 'none', 'harmonic(w)' nor a file")
    values = np.loadtxt(path, dtype=float, ndmin=1)
    if values.shape != (grid.n_points,):
        raise DimensionError(
            f"potential file {path} has {values.size} values, grid has {grid.n_points}"
        )
    return values


def lowest_eigenfunctions(spec: OneBodyOperatorSpec, count: int) -> np.ndarray:
    """Lowest ``count`` eigenfunctions of ``spec``, orthonormal on the grid.

    Phases are fixed so the largest-magnitude sample is real positive.
    """
    h = spec.dense_matrix()
    h = 0.5 * (h + h.conj().T)
    _, vecs = np.linalg.eigh(h.real if np.allclose(h.imag, 0.0) else h)
    vecs = vecs[:, :count].T.astype(complex) / np.sqrt(spec.grid.spacing)
    for v in vecs:
        peak = v[np.argmax(np.abs(v))]
        v *= np.abs(peak) / peak
    return vecs
