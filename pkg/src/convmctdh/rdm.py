"""Reduced density matrices of a configuration-interaction state.

Conventions (all expectation values in the state with coefficients C):
    rho_a[k, q]            = <b+_k b_q>
    rho_m[k', q']          = <c+_k' c_q'>
    rho_a2[k, s, l, q]     = <b+_k b+_s b_l b_q>
    rho_m2[k', s', l', q'] = <c+_k' c+_s' c_l' c_q'>
    rho_am[k, k', q, q']   = <b+_k b_q c+_k' c_q'>
    rho_conv[k', k, q]     = <c+_k' b_k b_q>
The reverse conversion matrix <b+_q b+_k c_k'> is the complex conjugate of
rho_conv and is not stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fock import ConfigurationBasis
from .grid import DimensionError
from .operators import operator_structure

RDM_KEYS = ("rho_a", "rho_m", "rho_a2", "rho_m2", "rho_am", "rho_conv")


@dataclass(frozen=True)
class RdmBundle:
    rho_a: np.ndarray
    rho_m: np.ndarray
    rho_a2: np.ndarray
    rho_m2: np.ndarray
    rho_am: np.ndarray
    rho_conv: np.ndarray

    @property
    def n_atoms(self) -> float:
        return float(np.trace(self.rho_a).real)

    @property
    def n_molecules(self) -> float:
        return float(np.trace(self.rho_m).real)

    @property
    def rho_m_to_2a(self) -> np.ndarray:
        """[q, k, k'] = <b+_q b+_k c_k'> = conj(rho_conv[k', k, q])."""
        return np.conj(self.rho_conv).transpose(2, 1, 0)

    def as_dict(self) -> dict:
        return {key: getattr(self, key) for key in RDM_KEYS}

    def to_json(self) -> str:
        def encode(a):
            a = np.asarray(a)
            if a.ndim == 0:
                return {"re": float(a.real), "im": float(a.imag)}
            return [encode(x) for x in a]
        return json.dumps({key: encode(val) for key, val in self.as_dict().items()}, indent=1)


def compute_rdms(basis: ConfigurationBasis, C: np.ndarray, check: bool = True) -> RdmBundle:
    C = np.asarray(C, dtype=complex)
    if C.shape != (basis.size,):
        raise DimensionError(f"coefficient vector has shape {C.shape}, basis size is {basis.size}")
    if check:
        dev = abs(np.linalg.norm(C) - 1.0)
        if dev > 1e-8:
            raise ValueError(f"coefficient vector not normalized (|norm - 1| = {dev:.2e})")
    st = operator_structure(basis)
    return RdmBundle(
        rho_a=st.expectation("one_a", C),
        rho_m=st.expectation("one_m", C),
        rho_a2=st.expectation("two_a", C),
        rho_m2=st.expectation("two_m", C),
        rho_am=st.expectation("inter", C),
        rho_conv=st.expectation("conv", C),
    )


def regularized_inverse(rho: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Inverse of a Hermitian PSD matrix with eigenvalues lifted to l + eps * exp(-l / eps)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    rho = np.asarray(rho)
    dev = np.max(np.abs(rho - rho.conj().T), initial=0.0)
    if dev > 1e-8 * max(1.0, float(np.max(np.abs(rho), initial=0.0))):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.2e})")
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    lifted = vals + eps * np.exp(-vals / eps)
    return (vecs / lifted) @ vecs.conj().T


def natural_occupations(rho: np.ndarray) -> np.ndarray:
    """Eigenvalues of a one-body density matrix in descending order."""
    rho = np.asarray(rho)
    return np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[::-1]


def one_body_density(orbitals: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """rho(x|x) = sum_kq rho[k, q] conj(f_k(x)) f_q(x)."""
    fs = np.atleast_2d(orbitals)
    return np.real(np.einsum("kq,kx,qx->x", rho, np.conj(fs), fs))
