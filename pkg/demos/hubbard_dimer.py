"""Three routes to one ionization spectrum: the two-site Hubbard model.

The half-filled dimer (t = 1, U = 4) is small enough to check by hand.  We
diagonalize the two- and one-electron sectors, read off the Lehmann poles
for removing a spin-up electron from the bonding orbital, emulate a phase
estimation campaign on the same trial state, and compare both with the
analytic answer.

    python demos/hubbard_dimer.py
"""
import numpy as np

from corespec.ci_solver import build_hamiltonian, solve_dense
from corespec.constants import HARTREE_TO_EV
from corespec.fixtures import hubbard_dimer
from corespec.fock_space import enumerate_space
from corespec.greens import lehmann_poles, make_trial, spectral_function
from corespec.integrals import to_spin_integrals
from corespec.qpe_sim import phase_window, run_campaign

si = to_spin_integrals(hubbard_dimer(t=1.0, u=4.0))
ground = solve_dense(build_hamiltonian(si, enumerate_space(si.m, 1, 1)))
e0 = ground.energies[0]
print(f"ground energy {e0:.12f}  (exact 2 - 2*sqrt(2) = {2 - 2 * np.sqrt(2):.12f})")

# a_0 removes the spin-up electron from the bonding orbital; in the
# one-electron sector the only eigenstates are the orbitals themselves
trial = make_trial(ground, 0)
ion = solve_dense(build_hamiltonian(si, trial.space))
poles = lehmann_poles(ion, trial, e0, weight_floor=1e-12)
print("\nLehmann poles (binding energy eV, weight):")
for e, w in zip(poles.binding_ev, poles.weights):
    print(f"  {e:10.4f}  {w:.6f}")
print(f"  weight of the bonding pole, 1/2 + 1/(2 sqrt 2) = {0.5 + 0.5 / np.sqrt(2):.6f}")

# Phase estimation samples the same poles with probability proportional to
# the weight.  Twelve bits over this window give bins of a few meV.
window = phase_window(poles.energies.min(), poles.energies.max(), bits=12)
camp = run_campaign(poles, window, n_shots=2000, seed=3)
print(f"\nQPE, {camp.n_shots} shots, bin width {window.bin_width * HARTREE_TO_EV * 1000:.2f} meV:")
for peak in camp.top_peaks(3):
    print(f"  {peak.binding_ev:10.4f} eV  P = {peak.probability:.3f}  ({peak.count} shots)")

# The area under the broadened curve is the orbital occupation.  A Lorentzian
# keeps about 2 theta / (pi * half-window) of it in tails beyond the window;
# a Gaussian of the same half width does not.
grid = (poles.binding_ev.min() - 3, poles.binding_ev.max() + 3, 0.01)
for shape in ("lorentzian", "gaussian"):
    sf = spectral_function(poles, grid, 0.1, shape)
    print(f"\n{shape:10s} area {sf.integral():.4f}", end="")
print(f"\noccupation of the orbital  {trial.vector @ trial.vector:.4f}")
