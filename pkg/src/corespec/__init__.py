"""Core-level photoemission spectra of small molecular Hamiltonians.

Three routes to the ionization-potential spectral function of a core hole:
exact or truncated CI in the Lehmann representation, statistically
emulated quantum phase estimation, and real-time EOM-CCSD cumulant
propagation.
"""

from corespec.constants import HARTREE_TO_EV
from corespec.integrals import (
    FockNMinus1,
    IntegralStore,
    SpinIntegrals,
    fock_n_minus_1,
    parse_fcidump,
    read_fcidump,
    to_spin_integrals,
    write_fcidump,
)
from corespec.fock_space import (
    CISpace,
    Determinant,
    FermionOperator,
    apply_annihilate,
    apply_create,
    enumerate_space,
    operator_matrix,
)
from corespec.greens import (
    PoleSet,
    SpectralFunction,
    TrialState,
    continued_fraction,
    lehmann_poles,
    make_trial,
    postprocess,
    spectral_function,
)
from corespec.ci_solver import (
    EigenSolution,
    LanczosTridiagonal,
    SectorHamiltonian,
    build_hamiltonian,
    correlation_energy,
    lanczos_from_vector,
    solve_dense,
    solve_ground_lanczos,
)

__version__ = "0.1.0"
