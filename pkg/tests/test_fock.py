from math import sqrt

import pytest
from hypothesis import given, settings, strategies as st

from convmctdh.fock import (ATOM, MOLECULE, BasisTooLargeError, Configuration, apply_annihilator,
                            apply_creator, apply_string, basis_size, enumerate_basis)


def test_enumerate_small_cases():
    b = enumerate_basis(4, 1, 1)
    assert [(c.atom_occ, c.mol_occ) for c in b.configs] == [((4,), (0,)), ((2,), (1,)), ((0,), (2,))]
    assert enumerate_basis(4, 2, 1).size == 9
    assert [len(enumerate_basis(4, 2, 1).sector(p)) for p in range(3)] == [5, 3, 1]
    assert enumerate_basis(0, 3, 2).size == 1


def test_ordering_and_dump():
    b = enumerate_basis(4, 2, 2)
    keys = [(c.p, c.atom_occ, c.mol_occ) for c in b.configs]
    assert keys == sorted(keys)
    assert b.dump().splitlines()[0] == "0 | 0 4 | 0 0"


def test_size_guard():
    with pytest.raises(BasisTooLargeError, match="configurations"):
        enumerate_basis(40, 8, 8, max_size=1000)


def test_ladder_examples():
    c = Configuration((2,), (0,))
    r = apply_annihilator(c, ATOM, 0)
    assert r.amplitude == pytest.approx(sqrt(2)) and r.target == Configuration((1,), (0,))
    assert apply_annihilator(c, MOLECULE, 0).annihilated
    r = apply_annihilator(Configuration((1, 3), (1,)), "b", 1)
    assert r.amplitude == pytest.approx(sqrt(3)) and r.target == Configuration((1, 2), (1,))
    r = apply_creator(Configuration((0, 0), (0,)), ATOM, 0)
    assert r.amplitude == 1.0 and r.target == Configuration((1, 0), (0,))
    r = apply_string(c, [(MOLECULE, True, 0), (ATOM, False, 0), (ATOM, False, 0)])
    assert r.amplitude == pytest.approx(sqrt(2)) and r.target == Configuration((0,), (1,))
    r = apply_creator(Configuration((3,), (0,)), ATOM, 0)
    assert r.amplitude == pytest.approx(2.0) and r.target == Configuration((4,), (0,))


def test_ladder_index_errors():
    with pytest.raises(IndexError):
        apply_annihilator(Configuration((1,), (0,)), ATOM, 1)
    with pytest.raises(ValueError):
        apply_creator(Configuration((1,), (0,)), "x", 0)


shapes = st.tuples(st.integers(0, 7), st.integers(1, 3), st.integers(1, 3))


@settings(max_examples=40, deadline=None)
@given(shapes)
def test_basis_invariants(shape):
    N, M, Mm = shape
    b = enumerate_basis(N, M, Mm)
    assert b.size == basis_size(N, M, Mm)
    for i, c in enumerate(b.configs):
        assert b.lookup(c) == i
        assert c.weight == N and 0 <= c.p <= N // 2
        for k in range(M):
            r = apply_string(c, [(ATOM, True, k), (ATOM, False, k)])
            assert (r.annihilated and c.atom_occ[k] == 0) or r.amplitude == pytest.approx(c.atom_occ[k])
        for kp in range(Mm):
            for k in range(M):
                for q in range(M):
                    r = apply_string(c, [(MOLECULE, True, kp), (ATOM, False, k), (ATOM, False, q)])
                    assert r.annihilated or b.lookup(r.target) is not None
