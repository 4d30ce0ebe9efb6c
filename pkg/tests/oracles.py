"""Independent reference computations used only by the tests."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from corespec.fock_space import (CISpace, Determinant, FermionOperator, apply_annihilate,
                                 apply_create, enumerate_space, hamiltonian_operator,
                                 operator_matrix)
from corespec.integrals import IntegralStore


def random_store(n_orb: int, n_elec: int, seed: int, scale: float = 0.3, ms2: int | None = None) -> IntegralStore:
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n_orb, n_orb))
    h = 0.5 * (h + h.T) + np.diag(np.arange(n_orb) * 1.0)
    g = rng.normal(scale=scale, size=(n_orb,) * 4)
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    return IntegralStore(n_orb=n_orb, n_elec=n_elec, ms2=n_elec % 2 if ms2 is None else ms2,
                         e_nuc=0.7, h_spatial=h, g_spatial=g / 8)


def excitation_operator(t1, t2, occ, virt) -> FermionOperator:
    terms = {}
    for i, p in enumerate(occ):
        for a, q in enumerate(virt):
            if t1[i, a] != 0:
                terms[((q, True), (p, False))] = t1[i, a]
    for i, p in enumerate(occ):
        for j, r in enumerate(occ):
            for a, q in enumerate(virt):
                for b, s in enumerate(virt):
                    if t2[i, j, a, b] != 0:
                        key = ((q, True), (s, True), (r, False), (p, False))
                        terms[key] = terms.get(key, 0) + 0.25 * t2[i, j, a, b]
    return FermionOperator(terms)


def similarity_projections(h, v, phi: Determinant, t1, t2, occ, virt, e_nuc=0.0):
    """<mu| e^-T H e^T |phi> by dense matrix exponentials in phi's sector."""
    space = enumerate_space(phi.m, phi.n_alpha, phi.n_beta)
    H = operator_matrix(hamiltonian_operator(h, v), space, space).matrix.toarray()
    T = operator_matrix(excitation_operator(t1, t2, occ, virt), space, space).matrix.toarray()
    ket = np.zeros(len(space), complex)
    ket[space.position(phi)] = 1
    vec = scipy.linalg.expm(-T) @ H @ scipy.linalg.expm(T) @ ket

    def amp(ops):
        det, sign = phi, 1
        for p, dag in ops:
            res = (apply_create if dag else apply_annihilate)(det, p)
            if res is None:
                return 0.0
            det, sign = res.det, sign * res.sign
        k = space.index.get(det.occ)
        return 0.0 if k is None else sign * vec[k]

    r1 = np.array([[amp([(i, False), (a, True)]) for a in virt] for i in occ])
    r2 = np.zeros((len(occ),) * 2 + (len(virt),) * 2, complex)
    for x, i in enumerate(occ):
        for y, j in enumerate(occ):
            for z, a in enumerate(virt):
                for w, b in enumerate(virt):
                    if i != j and a != b:
                        # |phi_ij^ab> = a_a^+ a_b^+ a_j a_i |phi>
                        r2[x, y, z, w] = amp([(i, False), (j, False), (b, True), (a, True)])
    e_ref = H[space.position(phi), space.position(phi)]
    return r1, r2, vec[space.position(phi)] - e_ref


def brute_hamiltonian(h, v, space: CISpace, e_nuc: float = 0.0) -> np.ndarray:
    """Dense H by operator strings, a route independent of Slater-Condon assembly."""
    H = operator_matrix(hamiltonian_operator(h, v), space, space).matrix.toarray()
    return H + e_nuc * np.eye(len(space))
