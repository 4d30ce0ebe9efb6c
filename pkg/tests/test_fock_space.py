from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corespec.fock_space import (CISpace, Determinant, FermionOperator, apply_annihilate,
                                 apply_create, enumerate_space, excitation_rank,
                                 hamiltonian_operator, operator_matrix, popcount)


def test_ket_rendering_puts_highest_orbital_first():
    d = Determinant.from_occupied([0, 2], 4)
    assert d.ket() == "|0101>"
    assert (d.n_alpha, d.n_beta, d.n_elec) == (2, 0, 2)
    assert d.occupied() == [0, 2]


def test_determinant_validation():
    with pytest.raises(ValueError):
        Determinant(0b100, 2)
    with pytest.raises(ValueError):
        Determinant(0, 0)


def test_create_phase_counts_occupied_orbitals_below():
    d = Determinant(0b011, 3)
    res = apply_create(d, 2)
    assert res.det.occ == 0b111 and res.sign == 1
    res = apply_create(Determinant(0b001, 3), 1)
    assert res.det.occ == 0b011 and res.sign == -1
    res = apply_annihilate(Determinant(0b111, 3), 1)
    assert res.det.occ == 0b101 and res.sign == -1


def test_pauli_and_vacuum_give_none():
    d = Determinant(0b01, 2)
    assert apply_create(d, 0) is None
    assert apply_annihilate(d, 1) is None
    with pytest.raises(IndexError):
        apply_create(d, 2)
    with pytest.raises(IndexError):
        apply_annihilate(d, -1)


def _apply(ops, det):
    """Apply a right-to-left list of (p, dagger); returns {occ: coef}."""
    state = {det.occ: 1}
    for p, dag in reversed(ops):
        new = {}
        for occ, c in state.items():
            res = (apply_create if dag else apply_annihilate)(Determinant(occ, det.m), p)
            if res is not None:
                new[res.det.occ] = new.get(res.det.occ, 0) + c * res.sign
        state = new
    return {k: v for k, v in state.items() if v}


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10).flatmap(
    lambda m: st.tuples(st.just(m), st.integers(0, 2 ** m - 1), st.integers(0, m - 1), st.integers(0, m - 1))))
def test_ladder_operators_anticommute(args):
    m, occ, i, j = args
    d = Determinant(occ, m)
    lhs = _apply([(i, False), (j, True)], d)
    for k, v in _apply([(j, True), (i, False)], d).items():
        lhs[k] = lhs.get(k, 0) + v
    lhs = {k: v for k, v in lhs.items() if v}
    assert lhs == ({occ: 1} if i == j else {})
    both = _apply([(i, False), (j, False)], d)
    for k, v in _apply([(j, False), (i, False)], d).items():
        both[k] = both.get(k, 0) + v
    assert not {k: v for k, v in both.items() if v}


@pytest.mark.parametrize("m,na,nb", [(4, 1, 1), (6, 2, 1), (8, 2, 2), (10, 3, 2), (6, 0, 3)])
def test_sector_sizes_and_order(m, na, nb):
    space = enumerate_space(m, na, nb)
    assert len(space) == comb(m // 2, na) * comb(m // 2, nb)
    assert np.all(np.diff(space.dets.astype(np.int64)) > 0)
    for det in space:
        assert (det.n_alpha, det.n_beta) == (na, nb)
        assert space.position(det) == space.index[det.occ]


def test_out_of_capacity_sector_is_empty():
    space = enumerate_space(4, 3, 0)
    assert len(space) == 0
    assert space.positions(np.array([1, 2])).tolist() == [-1, -1]


def test_truncated_space_counts_holes_against_reference():
    ref = Determinant.from_occupied([0, 1, 2, 3], 8)
    full = enumerate_space(8, 2, 2)
    for rank in range(5):
        sub = enumerate_space(8, 2, 2, reference=ref, rank=rank)
        expected = sum(1 for d in full if excitation_rank(d.occ, ref.occ) <= rank)
        assert len(sub) == expected
    assert len(enumerate_space(8, 2, 2, reference=ref, rank=0)) == 1
    ion = enumerate_space(8, 1, 2, reference=ref, rank=1)
    assert all(excitation_rank(d.occ, ref.occ) == 1 for d in ion)
    with pytest.raises(ValueError):
        enumerate_space(8, 1, 2, reference=ref, rank=0)
    with pytest.raises(ValueError):
        enumerate_space(8, 2, 2, rank=2)


def test_excitation_rank_scalar_matches_array():
    ref = 0b1111
    occs = np.arange(64, dtype=np.uint64)
    arr = excitation_rank(occs, ref)
    assert arr.tolist() == [excitation_rank(int(o), ref) for o in occs]
    assert popcount(7) == 3 and popcount(np.array([3, 8])).tolist() == [2, 1]


def test_positions_flags_missing_determinants():
    space = enumerate_space(4, 1, 1)
    pos = space.positions(np.array([space.dets[2], 0b1111, space.dets[0]]))
    assert pos.tolist() == [2, -1, 0]


def test_number_operator_is_diagonal_occupation():
    space = enumerate_space(6, 2, 1)
    for p in range(6):
        n_p = FermionOperator.create(p) * FermionOperator.annihilate(p)
        mat = operator_matrix(n_p, space, space).matrix.toarray()
        assert np.array_equal(mat, np.diag(space.occupation_matrix()[:, p].astype(float)))


def test_operator_matrix_rejects_wrong_sector():
    space = enumerate_space(4, 1, 1)
    with pytest.raises(ValueError):
        operator_matrix(FermionOperator.annihilate(0), space, space)
    target = enumerate_space(4, 0, 1)
    mat = operator_matrix(FermionOperator.annihilate(0), space, target)
    assert mat.matrix.shape == (len(target), len(space))


def test_fermion_operator_bookkeeping():
    op = FermionOperator.create(2) * FermionOperator.annihilate(0)
    assert op.particle_change() == 0 and op.spin_change() == (0, 0)
    assert FermionOperator.annihilate(1).spin_change() == (0, -1)
    mixed = FermionOperator.create(0) + FermionOperator.annihilate(0)
    with pytest.raises(ValueError):
        mixed.particle_change()
    assert not (op - op).terms
    assert (2 * op).terms == {((2, True), (0, False)): 2.0}
    assert "a2^" in repr(op)


def test_hamiltonian_operator_is_hermitian():
    from oracles import random_store
    from corespec.integrals import to_spin_integrals

    si = to_spin_integrals(random_store(3, 3, seed=4))
    space = enumerate_space(si.m, 2, 1)
    H = operator_matrix(hamiltonian_operator(si.h, si.v), space, space).matrix.toarray()
    assert np.allclose(H, H.T, atol=1e-13)
