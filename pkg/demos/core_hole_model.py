"""A core hole in a four-orbital model: FCI against real-time EOM-CCSD.

The model has one deep, nearly canonical orbital (-20 Hartree) below three
valence orbitals with random two-electron integrals.  Removing the deep
electron gives a quasiparticle line and weak shake-up satellites.  The
real-time route propagates CCSD amplitudes for the (N-1)-electron
reference, builds the cumulant Green's function, and Fourier transforms it;
its peaks should sit on the exact poles.

    python demos/core_hole_model.py          # about a minute
"""
import dataclasses

import numpy as np

from corespec.ci_solver import build_hamiltonian, solve_dense
from corespec.constants import HARTREE_TO_EV
from corespec.fixtures import random_instance
from corespec.fock_space import Determinant, enumerate_space
from corespec.greens import lehmann_poles, make_trial
from corespec.integrals import to_spin_integrals
from corespec.rt_eom_cc import gf_and_spectrum, init_reference, propagate, resolved_peaks

rng = np.random.default_rng(2)
x = rng.normal(scale=0.05, size=(4, 4))
store = dataclasses.replace(random_instance(4, 4, seed=2, scale=0.2),
                            h_spatial=np.diag([-20.0, -1.5, 0.5, 1.5]) + x + x.T)
si = to_spin_integrals(store)

ground = solve_dense(build_hamiltonian(si, enumerate_space(si.m, 2, 2)))
# weights against the core-hole determinant, which is the state the
# real-time route starts from
trial = make_trial(Determinant(si.reference_occupation, si.m), 0)
exact = lehmann_poles(solve_dense(build_hamiltonian(si, trial.space)), trial,
                      ground.energies[0], weight_floor=1e-3)
print("FCI poles (eV, weight):")
for e, w in sorted(zip(exact.binding_ev, exact.weights), key=lambda p: -p[1]):
    print(f"  {e:10.3f}  {w:.4f}")

ref = init_reference(si, 0, e_corr="fci")
print(f"\nKoopmans {ref.eps_c * HARTREE_TO_EV:.3f} eV; adding the correlation energy "
      f"gives {(ref.eps_c + ref.e_corr) * HARTREE_TO_EV:.3f} eV")
traj = propagate(ref, dt=0.05, t_max=200.0)
centre = (ref.eps_c + ref.e_corr) * HARTREE_TO_EV
sf = gf_and_spectrum(traj, damping=0.1, grid=(centre - 90, centre + 10, 0.002))
print(f"\nRT-EOM-CCSD peaks (resolution 2 pi / t_max = {2 * np.pi / traj.t_max * HARTREE_TO_EV:.3f} eV):")
for e, h, w in resolved_peaks(sf, min_weight=1e-3):
    nearest = exact.binding_ev[np.argmin(np.abs(exact.binding_ev - e))]
    print(f"  {e:10.3f} eV  weight ~{w:.4f}  nearest FCI pole {nearest:10.3f}")
