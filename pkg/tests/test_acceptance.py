"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL verdict (printed in the terminal summary) and
then asserts it.  Criteria 7-10 need the water FCIDUMP and are skipped when it
is absent; 9 and 10 share one real-time trajectory that takes several minutes.
"""
import dataclasses
import json
import time
from itertools import product

import numpy as np
import pytest
import scipy.sparse as sp

from acceptance_log import record, skip
from corespec.ci_solver import build_hamiltonian, solve_dense
from corespec.cli import compare, load_config, run_job
from corespec.constants import HARTREE_TO_EV
from corespec.fixtures import h2o_fcidump_path, hubbard_dimer, random_instance
from corespec.fock_space import Determinant, FermionOperator, enumerate_space, operator_matrix
from corespec.greens import lehmann_poles, make_trial, spectral_function
from corespec.integrals import IntegralStore, to_spin_integrals
from corespec.qpe_sim import fejer_probabilities, phase_window, run_campaign
from corespec.rt_eom_cc import gf_and_spectrum, init_reference, propagate, resolved_peaks
from oracles import brute_hamiltonian, random_store

# reference values from the water tables
QP_FCI = -552.86
SATELLITES_FCI = {-574.56: 0.01, -580.86: 0.08, -595.63: 0.01}
QPE_T2 = {-574.5: (0.44, 0.06), -573.6: (0.22, 0.05)}


# --------------------------------------------------------------------------- 1-6

def test_criterion_1_fermionic_algebra():
    start = time.perf_counter()
    checked, bad = 0, []
    for m in range(2, 11, 2):
        half = m // 2
        spaces = {(na, nb): enumerate_space(m, na, nb)
                  for na, nb in product(range(half + 1), repeat=2)}
        ops = {}

        def ladder(p, dag, key):
            # matrix of a_p or a_p^+ acting on sector ``key``
            cache = (p, dag, key)
            if cache not in ops:
                da = (1 if dag else -1) * (p % 2 == 0)
                db = (1 if dag else -1) * (p % 2 == 1)
                target = (key[0] + da, key[1] + db)
                if target not in spaces:
                    ops[cache] = None
                else:
                    op = FermionOperator.create(p) if dag else FermionOperator.annihilate(p)
                    ops[cache] = (target, operator_matrix(op, spaces[key], spaces[target]).matrix)
            return ops[cache]

        def anticommutator(x, y, key):
            # {x, y} on sector ``key`` as (target sector, matrix); both
            # orderings land in the same sector
            parts = []
            for first, second in ((x, y), (y, x)):
                a = ladder(*first, key)
                b = ladder(*second, a[0]) if a is not None else None
                if b is not None:
                    parts.append((b[0], b[1] @ a[1]))
            if not parts:
                return None
            assert len({t for t, _ in parts}) == 1
            return parts[0][0], sum(mat for _, mat in parts)

        for key, space in spaces.items():
            dim = len(space)
            if dim == 0:
                continue
            for i, j in product(range(m), repeat=2):
                for y, expect_identity in (((j, True), i == j), ((j, False), False)):
                    res = anticommutator((i, False), y, key)
                    if res is None:
                        continue
                    target, mat = res
                    if expect_identity:
                        mat = mat - sp.identity(dim, format="csr")
                    mat = sp.csr_matrix(mat)
                    mat.eliminate_zeros()
                    if mat.nnz:
                        bad.append((m, key, i, y))
                checked += 2
    elapsed = time.perf_counter() - start
    record(1, not bad and elapsed < 10,
           f"{checked} anticommutators over all sectors of M=2..10, {len(bad)} violations, {elapsed:.1f} s")


def test_criterion_2_hubbard_dimer():
    start = time.perf_counter()
    store = hubbard_dimer(t=1.0, u=4.0)
    si = to_spin_integrals(store)
    space_n = enumerate_space(si.m, 1, 1)
    ground = solve_dense(build_hamiltonian(si, space_n))
    e0 = ground.energies[0]
    trial = make_trial(ground, 0)
    ion = solve_dense(build_hamiltonian(si, trial.space))
    poles = lehmann_poles(ion, trial, e0, weight_floor=1e-12)
    elapsed = time.perf_counter() - start
    # independent route: 4x4 and 2x2 matrices from operator strings
    h4 = brute_hamiltonian(si.h, si.v, space_n)
    h2 = brute_hamiltonian(si.h, si.v, trial.space)
    vals4, vecs4 = np.linalg.eigh(h4)
    vals2, vecs2 = np.linalg.eigh(h2)
    amp = operator_matrix(FermionOperator.annihilate(0), space_n, trial.space).matrix @ vecs4[:, 0]
    w = (vecs2.T @ amp) ** 2
    brute = (vals4[0] - vals2[w > 1e-12]) * HARTREE_TO_EV
    e_err = abs(e0 - (2 - 2 * np.sqrt(2)))
    pole_err = np.abs(np.sort(poles.binding_ev) - np.sort(brute)).max() / HARTREE_TO_EV
    record(2, e_err < 1e-12 and pole_err < 1e-12 and h4.shape == (4, 4) and elapsed < 1,
           f"|E0 - (2-2sqrt2)| = {e_err:.1e}, pole vs brute force {pole_err:.1e} Ha, {elapsed:.3f} s")


def test_criterion_3_ci_hierarchy():
    worst = np.inf
    for seed in range(20):
        si = to_spin_integrals(random_store(4, 4, seed, ms2=0))
        ref = Determinant(si.reference_occupation, si.m)
        energies = []
        for rank in (2, 3, 4, None):
            space = enumerate_space(si.m, si.n_alpha, si.n_beta,
                                    reference=ref if rank else None, rank=rank)
            energies.append(solve_dense(build_hamiltonian(si, space)).energies[0])
        gaps = -np.diff(energies)
        worst = min(worst, gaps.min())
    record(3, worst >= -1e-10,
           f"20 instances, smallest E(lower rank) - E(higher rank) = {worst:.2e} Ha")


def test_criterion_4_sum_rule():
    theta, worst, count = 0.1, 0.0, 0
    for n_elec, seed in [(2, 1), (3, 2), (4, 3), (5, 4), (6, 5)]:
        store = random_instance(4, n_elec, seed=seed)
        si = to_spin_integrals(store)
        ground = solve_dense(build_hamiltonian(si, enumerate_space(si.m, si.n_alpha, si.n_beta)))
        vec, space = ground.ground_vector(), ground.space
        for p in range(si.m):
            occ = float(np.sum(vec ** 2 * ((space.dets >> np.uint64(p)) & np.uint64(1))))
            if occ < 1e-14:
                continue
            trial = make_trial(ground, p)
            ion = solve_dense(build_hamiltonian(si, trial.space))
            poles = lehmann_poles(ion, trial, ground.energies[0], weight_floor=0.0)
            grid = (poles.binding_ev.min() - 50 * theta, poles.binding_ev.max() + 50 * theta,
                    theta / 10)
            sf = spectral_function(poles, grid, theta, shape="gaussian")
            worst = max(worst, abs(sf.integral() - occ))
            count += 1
    record(4, worst < 1e-3,
           f"{count} spin-orbitals, max |integral - occupation| = {worst:.1e} (Gaussian, step theta/10)")


def test_criterion_5_qpe_fidelity():
    start = time.perf_counter()
    si = to_spin_integrals(random_instance(4, 4, seed=0, scale=0.5))
    ground = solve_dense(build_hamiltonian(si, enumerate_space(si.m, 2, 2)))
    trial = make_trial(ground, 0)
    ion = solve_dense(build_hamiltonian(si, trial.space))
    poles = lehmann_poles(ion, trial, ground.energies[0], weight_floor=0.0)
    exact = poles.weights / poles.weights.sum()
    n_poles = int(np.sum(exact > 0.01))
    window = phase_window(poles.energies.min(), poles.energies.max(), bits=12)
    camp = run_campaign(poles, window, 10_000, seed=1)
    sampled = np.zeros(len(exact))
    for peak in camp.peaks:
        sampled[np.argmin(np.abs(poles.energies - peak.energy))] += peak.probability
    tv = 0.5 * np.abs(sampled - exact).sum()
    # peaks are clusters holding at least 50 shots; isolated Fejer-tail
    # readouts are not attributed to any pole
    offsets = [np.min(np.abs(poles.energies - pk.energy)) / window.bin_width
               for pk in camp.peaks if pk.probability >= 0.005]
    kernel = max(abs(fejer_probabilities(phi, 12).sum() - 1)
                 for phi in np.random.default_rng(0).random(20))
    elapsed = time.perf_counter() - start
    ok = n_poles >= 4 and tv < 0.03 and max(offsets) <= 1 and kernel < 1e-12 and elapsed < 30
    record(5, ok, f"{n_poles} poles, TV = {tv:.4f}, max peak offset {max(offsets):.2f} bins, "
                  f"Fejer sum error {kernel:.1e}, {elapsed:.1f} s")


def _resolved(traj, lo, hi, step=0.002):
    return resolved_peaks(gf_and_spectrum(traj, damping=0.1, grid=(lo, hi, step)), min_weight=1e-3)


def test_criterion_6_rtcc_limits():
    notes, ok = [], True
    # (a) no interaction: one peak at -eps_c
    h = np.diag([-3.0, -1.0, 0.5])
    store = IntegralStore(n_orb=3, n_elec=4, ms2=0, e_nuc=0.0, h_spatial=h,
                          g_spatial=np.zeros((3,) * 4))
    si = to_spin_integrals(store)
    traj = propagate(init_reference(si, 0, e_corr="fci"), dt=0.05, t_max=100.0)
    koopmans = si.eps[0] * HARTREE_TO_EV
    step = 0.01
    peaks = resolved_peaks(gf_and_spectrum(traj, damping=0.1, grid=(koopmans - 10, koopmans + 10, step)))
    err_a = abs(peaks[0][0] - koopmans) if peaks else np.inf
    ok &= len(peaks) == 1 and err_a <= step
    notes.append(f"(a) {len(peaks)} peak, {err_a:.4f} eV off Koopmans")

    # (b) two electrons: every resolved peak sits on an exact pole and every
    # pole of the reference-determinant trial is found
    si = to_spin_integrals(random_store(3, 2, seed=5, ms2=0))
    ref = init_reference(si, 0, e_corr="fci")
    ground = solve_dense(build_hamiltonian(si, enumerate_space(si.m, 1, 1)))
    trial = make_trial(Determinant(si.reference_occupation, si.m), 0)
    exact = lehmann_poles(solve_dense(build_hamiltonian(si, trial.space)), trial,
                          ground.energies[0], weight_floor=0.0)
    t_max = 300.0
    resolution = 2 * np.pi / t_max * HARTREE_TO_EV
    traj = propagate(ref, dt=0.05, t_max=t_max)
    found = _resolved(traj, exact.binding_ev.min() - 3, exact.binding_ev.max() + 3)
    off = max(np.min(np.abs(exact.binding_ev - e)) for e, _, _ in found)
    strong = exact.binding_ev[exact.weights > 0.01]
    missed = [e for e in strong if min(abs(e - f[0]) for f in found) > resolution]
    ok &= off < resolution and not missed
    notes.append(f"(b) {len(found)} peaks, max offset {off:.3f} eV < {resolution:.3f}, "
                 f"{len(missed)} of {len(strong)} poles missed")

    # (c) halving the step, on a model with a deep, nearly canonical core orbital
    rng = np.random.default_rng(2)
    x = rng.normal(scale=0.05, size=(4, 4))
    store = dataclasses.replace(random_instance(4, 4, seed=2, scale=0.2),
                                h_spatial=np.diag([-20.0, -1.5, 0.5, 1.5]) + x + x.T)
    ref = init_reference(to_spin_integrals(store), 0, e_corr="fci")
    centre = (ref.eps_c + ref.e_corr) * HARTREE_TO_EV
    qp = []
    for dt in (0.05, 0.025):
        traj = propagate(ref, dt=dt, t_max=100.0)
        found = _resolved(traj, centre - 5, centre + 10, step=0.001)
        qp.append(max(found, key=lambda f: f[1])[0])
    shift = abs(qp[0] - qp[1])
    ok &= shift < 1e-3
    notes.append(f"(c) dt halving moves the quasiparticle {shift:.1e} eV")
    record(6, ok, "; ".join(notes))


# --------------------------------------------------------------------------- water

@pytest.fixture(scope="module")
def water(tmp_path_factory):
    path = h2o_fcidump_path()
    if path is None:
        for number in (7, 8, 9, 10):
            skip(number, "water FCIDUMP not available")
        pytest.skip("water FCIDUMP not available")
    return path, tmp_path_factory.mktemp("water")


def _run(water, name, body):
    path, root = water
    cfg = load_config(text=f"[run]\nintegrals = {path}\nlabel = {name}\n{body}")
    out = root / name
    if not (out / "manifest.json").exists():
        run_job(cfg, out)
    return out, json.loads((out / "peaks.json").read_text())["peaks"]


def _nearest(rows, energy):
    return min(rows, key=lambda r: abs(r["energy_eV"] - energy))


def test_criterion_7_water_fci(water):
    # weights are overlaps with the core-hole reference determinant
    _, rows = _run(water, "FCI", "method = fci\n[trial]\nsource = hf\n")
    qp = _nearest(rows, QP_FCI)
    errs = [abs(qp["energy_eV"] - QP_FCI)]
    werrs = [abs(qp["weight"] - 0.82)]
    ok = errs[0] <= 0.02 and werrs[0] <= 0.01
    for energy, weight in SATELLITES_FCI.items():
        row = _nearest(rows, energy)
        errs.append(abs(row["energy_eV"] - energy))
        werrs.append(abs(row["weight"] - weight))
        ok &= errs[-1] <= 0.05 and werrs[-1] <= 0.01
    record(7, ok, f"quasiparticle {qp['energy_eV']:.3f} eV (w {qp['weight']:.3f}); "
                  f"max satellite error {max(errs[1:]):.3f} eV / {max(werrs[1:]):.3f} weight")


def test_criterion_8_water_qpe(water):
    _, rows1 = _run(water, "QPE", "method = qpe\n")
    _, rows2 = _run(water, "QPE-T2", "method = qpe\n[trial]\nexcite_from = 3\nexcite_to = 5\n")
    top = max(rows1, key=lambda r: r["probability"])
    ok = abs(top["energy_eV"] + 552.8) <= 0.1 and abs(top["probability"] - 0.84) <= 0.05
    notes = [f"dominant {top['energy_eV']:.3f} eV (P {top['probability']:.3f})"]
    for energy, (prob, tol) in QPE_T2.items():
        row = _nearest(rows2, energy)
        ok &= abs(row["energy_eV"] - energy) <= 0.1 and abs(row["probability"] - prob) <= tol
        notes.append(f"{row['energy_eV']:.2f} eV (P {row['probability']:.3f})")
    record(8, ok, "; ".join(notes))


def _satellite_errors(rt_rows, fci_rows):
    """|E_rt - E_fci| for the quasiparticle and each tabulated satellite."""
    out = {}
    for energy in [QP_FCI, *SATELLITES_FCI]:
        fci = _nearest(fci_rows, energy)["energy_eV"]
        out[energy] = abs(_nearest(rt_rows, fci)["energy_eV"] - fci)
    return out


def test_criterion_9_water_rtcc(water):
    _, fci_rows = _run(water, "FCI", "method = fci\n[trial]\nsource = hf\n")
    _, rt_rows = _run(water, "CCSD", "method = rtcc\n")
    errs = _satellite_errors(rt_rows, fci_rows)
    main = _nearest(rt_rows, -580.86)["energy_eV"]
    # mean over the tabulated peaks, quasiparticle included
    mad = float(np.mean(list(errs.values())))
    sat_only = float(np.mean([v for k, v in errs.items() if k != QP_FCI]))
    ok = errs[QP_FCI] <= 0.01 and abs(main + 580.86) <= 0.3 and mad <= 0.35
    record(9, ok, f"quasiparticle off by {errs[QP_FCI]:.4f} eV; main satellite {main:.3f} eV; "
                  f"mean deviation {mad:.3f} eV (satellites alone {sat_only:.3f})")


def test_criterion_10_comparison_report(water):
    fci_dir, fci_rows = _run(water, "FCI", "method = fci\n[trial]\nsource = hf\n")
    qpe_dir, qpe_rows = _run(water, "QPE", "method = qpe\n")
    rt_dir, rt_rows = _run(water, "CCSD", "method = rtcc\n")
    out = water[1] / "compare"
    report = compare([fci_dir, qpe_dir, rt_dir], out, shift=4.3, broaden=0.5)
    overlay = np.loadtxt(out / "overlay.tsv")
    grid, curves = overlay[:, 0], overlay[:, 1:]
    # each curve's main maximum moves with the scissors shift
    tops = [grid[np.nanargmax(c)] for c in curves.T]
    qp_fci = _nearest(fci_rows, QP_FCI)["energy_eV"]
    shifted = all(abs(t - (qp_fci + 4.3)) <= 0.1 for t in tops)
    pair_qpe = report["discrepancies"]["FCI vs QPE"]
    pair_rt = report["discrepancies"]["FCI vs CCSD"]
    qpe_qp = abs(_nearest(qpe_rows, qp_fci)["energy_eV"] - qp_fci)
    errs = _satellite_errors(rt_rows, fci_rows)
    worst_sat = max(v for k, v in errs.items() if k != QP_FCI)
    ok = (shifted and qpe_qp <= 0.1 and errs[QP_FCI] <= 0.01 and worst_sat <= 0.6
          and pair_qpe["matched"] > 0 and pair_rt["matched"] > 0)
    record(10, ok, f"overlay maxima at {', '.join(f'{t:.2f}' for t in tops)} eV; "
                   f"QPE-FCI quasiparticle {qpe_qp:.3f} eV; max CCSD-FCI satellite error {worst_sat:.3f} eV")
