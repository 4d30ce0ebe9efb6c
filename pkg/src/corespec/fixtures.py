"""Small bundled model Hamiltonians with known answers.

Each builder returns an :class:`~corespec.integrals.IntegralStore`, so the
fixtures go through the same code paths as an FCIDUMP file.  ``FIXTURES``
maps the names accepted by the command line (``fixture:<name>``) to the
default builders.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from corespec.integrals import IntegralStore

__all__ = [
    "hubbard_dimer",
    "two_orbital",
    "two_orbital_exact",
    "random_instance",
    "FIXTURES",
    "H2O_FCIDUMP_SHA256",
    "h2o_fcidump_path",
]

# sha256 of the 9-orbital cc-pVDZ water file produced by
# scripts/make_h2o_fcidump.py with pyscf 2.14 (geometry and basis are
# documented there).  Other pyscf versions may differ in the last digits.
H2O_FCIDUMP_SHA256 = "bd9b5bea9d7b7bea5ef1024086afb3b6dc62c03df6f428a9cc1eb7051be2e72b"


def hubbard_dimer(t: float = 1.0, u: float = 4.0) -> IntegralStore:
    """Half-filled two-site Hubbard model in the bonding/antibonding basis.

    The exact ground energy is ``(U - sqrt(U**2 + 16 t**2)) / 2``.
    """
    h_site = np.array([[0.0, -t], [-t, 0.0]])
    g_site = np.zeros((2, 2, 2, 2))
    g_site[0, 0, 0, 0] = g_site[1, 1, 1, 1] = u
    c = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    h = c.T @ h_site @ c
    g = np.einsum("pi,qj,rk,sl,pqrs->ijkl", c, c, c, c, g_site)
    # the rotation is exact in exact arithmetic; drop round-off asymmetry
    h, g = np.round(h, 14), np.round(g, 14)
    return IntegralStore(n_orb=2, n_elec=2, ms2=0, e_nuc=0.0, h_spatial=h, g_spatial=g)


def two_orbital(e1: float = -1.0, e2: float = 0.5, j11: float = 0.6, j22: float = 0.5,
                j12: float = 0.4, k12: float = 0.15) -> IntegralStore:
    """Two electrons in two orbitals with a diagonal one-body part.

    Only ``(11|11)``, ``(22|22)``, ``(11|22)`` and ``(12|12)`` are nonzero, so
    the singlet ground state mixes the two closed shells through ``k12``
    alone and every one-electron state is an orbital.  See
    :func:`two_orbital_exact` for the closed-form answers.
    """
    h = np.diag([e1, e2])
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = j11
    g[1, 1, 1, 1] = j22
    g[0, 0, 1, 1] = g[1, 1, 0, 0] = j12
    for idx in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)]:
        g[idx] = k12
    return IntegralStore(n_orb=2, n_elec=2, ms2=0, e_nuc=0.0, h_spatial=h, g_spatial=g)


def two_orbital_exact(e1: float = -1.0, e2: float = 0.5, j11: float = 0.6, j22: float = 0.5,
                      j12: float = 0.4, k12: float = 0.15) -> dict:
    """Closed-form ground energy, ionization energies and hole weights.

    Returns a dict with ``e0``, ``coefficients`` (closed-shell amplitudes
    ``c1, c2``), ``ion_energies`` (the orbital energies ``e1, e2``) and
    ``weights`` (``c1**2, c2**2`` for removing an electron from orbital 1, 2).
    """
    a, d = 2 * e1 + j11, 2 * e2 + j22
    mean, half = 0.5 * (a + d), 0.5 * (a - d)
    e0 = mean - np.hypot(half, k12)
    # eigenvector of [[a, k], [k, d]] for e0
    vec = np.array([k12, e0 - a]) if k12 != 0 else np.array([1.0, 0.0])
    vec = vec / np.linalg.norm(vec)
    return {"e0": float(e0), "coefficients": vec, "ion_energies": np.array([e1, e2]),
            "weights": vec ** 2}


def random_instance(n_orb: int = 2, n_elec: int = 2, seed: int = 11, scale: float = 0.3,
                    ms2: int | None = None) -> IntegralStore:
    """Seeded random Hamiltonian with the full 8-fold integral symmetry.

    The defaults give the bundled 4-spin-orbital instance.  A ramp on the
    diagonal of ``h`` keeps the aufbau reference sensible.
    """
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n_orb, n_orb))
    h = 0.5 * (h + h.T) + np.diag(np.arange(n_orb, dtype=float))
    g = rng.normal(scale=scale, size=(n_orb,) * 4)
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    # keep the two-electron part positive on average like a real repulsion
    g = g / 8 + scale * np.einsum("ij,kl->ijkl", np.eye(n_orb), np.eye(n_orb))
    return IntegralStore(n_orb=n_orb, n_elec=n_elec, ms2=n_elec % 2 if ms2 is None else ms2,
                         e_nuc=0.5, h_spatial=h, g_spatial=g)


FIXTURES = {
    "hubbard_dimer": hubbard_dimer,
    "two_orbital": two_orbital,
    "random4": random_instance,
}


def h2o_fcidump_path(root: str | Path | None = None) -> Path | None:
    """Location of the user-supplied water FCIDUMP, or ``None`` if absent.

    Looks in ``$CORESPEC_H2O_FCIDUMP`` first, then ``tests/data`` under
    ``root`` (default: the source checkout).
    """
    env = os.environ.get("CORESPEC_H2O_FCIDUMP")
    candidates = [Path(env)] if env else []
    base = Path(root) if root is not None else Path(__file__).resolve().parents[2]
    candidates.append(base / "tests" / "data" / "h2o_ccpvdz_9orb.fcidump")
    for path in candidates:
        if path.is_file():
            return path
    return None
