import json
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convmctdh.fock import Configuration, enumerate_basis
from convmctdh.grid import DimensionError
from convmctdh.oracle import LadderAlgebra
from convmctdh.rdm import RDM_KEYS, compute_rdms, natural_occupations, regularized_inverse
from convmctdh.validation import random_coefficients


def state_on(basis, amplitudes: dict):
    C = np.zeros(basis.size, dtype=complex)
    for config, amp in amplitudes.items():
        C[basis.lookup(config)] = amp
    return C


def test_two_atom_conversion_coherence():
    b = enumerate_basis(2, 1, 1)
    C0, C1 = 0.6, 0.8j
    r = compute_rdms(b, np.array([C0, C1]))
    assert r.rho_conv[0, 0, 0] == pytest.approx(np.sqrt(2) * np.conj(C1) * C0)


def test_number_expectations_for_superposition():
    b = enumerate_basis(4, 1, 1)
    C = state_on(b, {Configuration((4,), (0,)): 1 / np.sqrt(2), Configuration((0,), (2,)): 1 / np.sqrt(2)})
    r = compute_rdms(b, C)
    assert r.n_atoms == pytest.approx(2.0)
    assert r.n_molecules == pytest.approx(1.0)
    assert r.rho_a2[0, 0, 0, 0].real == pytest.approx(6.0)
    assert np.all(r.rho_conv == 0)  # no adjacent sectors populated


def test_conversion_between_two_orbitals():
    b = enumerate_basis(2, 2, 1)
    alpha, beta = 0.6, 0.8j
    C = state_on(b, {Configuration((0, 0), (1,)): alpha, Configuration((1, 1), (0,)): beta})
    r = compute_rdms(b, C)
    assert r.rho_conv[0, 0, 1] == pytest.approx(np.conj(alpha) * beta)
    assert r.rho_conv[0, 1, 0] == pytest.approx(np.conj(alpha) * beta)
    np.testing.assert_allclose(r.rho_m_to_2a[1, 0, 0], np.conj(r.rho_conv[0, 0, 1]))


def test_normalization_and_shape_checks():
    b = enumerate_basis(2, 1, 1)
    with pytest.raises(ValueError, match="normalized"):
        compute_rdms(b, np.array([1.0, 1.0]))
    with pytest.raises(DimensionError):
        compute_rdms(b, np.array([1.0]))


def test_regularized_inverse_examples():
    np.testing.assert_allclose(regularized_inverse(np.eye(3)), np.eye(3), atol=1e-7)
    inv = regularized_inverse(np.diag([4.0, 0.0]), eps=1e-8)
    assert inv[0, 0] == pytest.approx(0.25)
    assert inv[1, 1] == pytest.approx(1e8)
    np.testing.assert_allclose(regularized_inverse(np.diag([2.0, 1.0]), eps=1e-14), np.diag([0.5, 1.0]))
    with pytest.raises(ValueError, match="Hermitian"):
        regularized_inverse(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        regularized_inverse(np.eye(2), eps=0.0)


def test_natural_occupations_examples():
    b = enumerate_basis(5, 3, 1)
    C = state_on(b, {Configuration((5, 0, 0), (0,)): 1.0})
    np.testing.assert_allclose(natural_occupations(compute_rdms(b, C).rho_a), [5, 0, 0], atol=1e-14)
    np.testing.assert_allclose(natural_occupations(np.array([[1, 0.5], [0.5, 1]])), [1.5, 0.5])


def test_condensed_state_has_single_natural_orbital():
    # all N atoms in the orbital cos(t) phi_1 + sin(t) phi_2
    N, t = 6, 0.4
    b = enumerate_basis(N, 2, 1)
    amps = {Configuration((n1, N - n1), (0,)):
            np.sqrt(comb(N, n1)) * np.cos(t) ** n1 * np.sin(t) ** (N - n1) for n1 in range(N + 1)}
    occ = natural_occupations(compute_rdms(b, state_on(b, amps)).rho_a)
    assert occ[0] / occ.sum() == pytest.approx(1.0, abs=1e-12)


def test_json_dump():
    b = enumerate_basis(2, 1, 1)
    doc = json.loads(compute_rdms(b, np.array([0.6, 0.8])).to_json())
    assert set(doc) == set(RDM_KEYS)
    assert doc["rho_a"][0][0] == {"re": pytest.approx(0.72), "im": 0.0}


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 6), M=st.integers(1, 3), Mm=st.integers(1, 2))
def test_rdm_invariants(seed, N, M, Mm):
    rng = np.random.default_rng(seed)
    b = enumerate_basis(N, M, Mm)
    C = random_coefficients(b.size, rng)
    r = compute_rdms(b, C)
    for rho in (r.rho_a, r.rho_m):
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-10
    assert r.n_atoms + 2 * r.n_molecules == pytest.approx(N, abs=1e-10)
    np.testing.assert_allclose(r.rho_conv, r.rho_conv.transpose(0, 2, 1), atol=1e-14)
    # sum_s <b+_k b+_s b_s b_q> = <b+_k b_q (N_a - 1)>
    algebra = LadderAlgebra(b)
    n_a = sum(algebra.extended_operator([("atom", 1, k), ("atom", 0, k)]) for k in range(M))
    for k in range(M):
        for q in range(M):
            op = algebra.extended_operator([("atom", 1, k), ("atom", 0, q)]) @ (n_a - np.eye(len(n_a)))
            ref = np.vdot(C, op[np.ix_(algebra.sector, algebra.sector)] @ C)
            assert np.einsum("ss->", r.rho_a2[k, :, :, q]) == pytest.approx(ref, abs=1e-11)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 6), p=st.integers(0, 3))
def test_single_sector_has_no_conversion_coherence(seed, N, p):
    p = min(p, N // 2)
    rng = np.random.default_rng(seed)
    b = enumerate_basis(N, 2, 2)
    C = np.zeros(b.size, dtype=complex)
    idx = b.sector(p)
    C[idx] = random_coefficients(len(idx), rng)
    assert np.all(compute_rdms(b, C).rho_conv == 0)
