import hashlib

import numpy as np
import pytest

from corespec.fixtures import (FIXTURES, H2O_FCIDUMP_SHA256, hubbard_dimer, random_instance,
                               two_orbital, two_orbital_exact)
from corespec.integrals import to_spin_integrals


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixtures_have_full_integral_symmetry(name):
    store = FIXTURES[name]()
    g = store.g_spatial
    for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]:
        assert np.array_equal(g, g.transpose(perm))
    assert np.array_equal(store.h_spatial, store.h_spatial.T)
    to_spin_integrals(store)


def test_bundled_random_instance_has_four_spin_orbitals():
    si = to_spin_integrals(random_instance())
    assert si.m == 4
    assert np.array_equal(random_instance().g_spatial, random_instance().g_spatial)
    assert not np.array_equal(random_instance(seed=1).h_spatial, random_instance().h_spatial)


def test_hubbard_dimer_is_in_molecular_orbitals():
    store = hubbard_dimer(t=1.0, u=4.0)
    assert np.allclose(store.h_spatial, np.diag([-1.0, 1.0]))
    # on-site U spread evenly over the delocalized orbitals
    assert store.g_spatial[0, 0, 0, 0] == pytest.approx(2.0)
    assert store.g_spatial[0, 1, 0, 1] == pytest.approx(2.0)


def test_two_orbital_exact_is_normalized():
    exact = two_orbital_exact()
    assert exact["weights"].sum() == pytest.approx(1.0)
    assert exact["e0"] < 2 * two_orbital().h_spatial[0, 0] + 0.6


def test_water_file_hash(h2o_path):
    digest = hashlib.sha256(h2o_path.read_bytes()).hexdigest()
    assert digest == H2O_FCIDUMP_SHA256
