"""Generate the 9-orbital cc-pVDZ H2O model as an FCIDUMP file.

Requires pyscf, which is not a runtime dependency of the package.

    python scripts/make_h2o_fcidump.py tests/data/h2o_ccpvdz_9orb.fcidump
"""
import sys

import numpy as np
from pyscf import gto, scf, ao2mo
from pyscf.tools import fcidump

R_OH = 0.9772
ANGLE = np.deg2rad(104.52)
N_ORB = 9


def main(path):
    half = ANGLE / 2
    mol = gto.M(
        atom=[
            ["O", (0.0, 0.0, 0.0)],
            ["H", (0.0, R_OH * np.sin(half), R_OH * np.cos(half))],
            ["H", (0.0, -R_OH * np.sin(half), R_OH * np.cos(half))],
        ],
        basis="cc-pvdz",
        symmetry=False,
        verbose=0,
    )
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    c = mf.mo_coeff[:, :N_ORB]
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), N_ORB)
    fcidump.from_integrals(path, h1, eri, N_ORB, mol.nelectron,
                           nuc=mol.energy_nuc(), ms=0, tol=1e-14)
    print(f"E(RHF) = {mf.e_tot:.10f}  eps(1s) = {mf.mo_energy[0]:.6f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "h2o_ccpvdz_9orb.fcidump")
