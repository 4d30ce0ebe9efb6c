"""Command-line driver: ``corespec run`` and ``corespec compare``.

A run is described by an INI-style file with the sections ``[run]``,
``[trial]``, ``[spectrum]``, ``[solver]``, ``[qpe]`` and ``[rtcc]``.  Every
key has a default (see :data:`DEFAULTS`) and the fully resolved
configuration is echoed into ``manifest.json``, which can itself be passed
back to ``run --config`` to repeat the job.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 input/output error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from corespec import __version__
from corespec.ci_solver import (CapacityError, ConvergenceError, build_hamiltonian,
                                ground_state, lanczos_from_vector, ritz_poles, solve_dense)
from corespec.constants import HARTREE_TO_EV
from corespec.fixtures import FIXTURES
from corespec.fock_space import Determinant, enumerate_space
from corespec.greens import (SCHEMA_VERSION, PoleSet, SpectralFunction, krylov_poles,
                             lehmann_poles, make_trial, postprocess, read_tsv,
                             spectral_function)
from corespec.integrals import (FCIDumpError, IntegralStore, read_fcidump, to_spin_integrals,
                                write_fcidump)
from corespec.qpe_sim import (CLIP_WEIGHT, WindowError, estimate_ground_energy, phase_window,
                              qpe_spectrum, run_campaign)
from corespec.rt_eom_cc import (PropagationError, gf_and_spectrum, init_reference, propagate,
                                resolved_peaks)

__all__ = ["DEFAULTS", "ConfigError", "RunConfig", "load_config", "run_job", "compare", "main"]

log = logging.getLogger(__name__)

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"integrals": "", "method": "fci", "rank": "", "label": ""},
    "trial": {"annihilate": "0", "excite_from": "", "excite_to": "", "excite_spin": "alpha",
              "source": "auto"},
    "spectrum": {"start": "auto", "stop": "auto", "step": "0.01", "broadening": "0.1",
                 "shape": "lorentzian", "min_weight": "0.005"},
    "solver": {"dense_limit": "3000", "krylov_iterations": "400"},
    "qpe": {"bits": "12", "shots": "500", "seed": "2024", "gap": "2", "margin": "0.05",
            "reference": "qpe", "reference_shots": "100", "reference_seed": "7"},
    "rtcc": {"dt": "0.05", "t_max": "900", "damping": "0.1", "e_corr": "fci",
             "integrator": "trapezoidal", "tol": "1e-10", "min_weight": "0.001"},
}

METHODS = ("fci", "ci", "qpe", "rtcc")
EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved run description; ``sections`` holds every key as text."""

    sections: dict[str, dict[str, str]]
    base_dir: Path

    def get(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def number(self, section: str, key: str, kind=float, positive: bool = False):
        text = self.get(section, key)
        try:
            value = kind(text)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {text!r} is not a valid {kind.__name__}") from None
        if positive and not value > 0:
            raise ConfigError(f"[{section}] {key} must be positive")
        return value

    def optional_int(self, section: str, key: str) -> int | None:
        text = self.get(section, key).strip()
        return None if text == "" else self.number(section, key, int)

    @property
    def method(self) -> str:
        return self.get("run", "method")

    def echo(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(self.sections)
        lines = []
        for name in parser.sections():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in parser[name].items()]
            lines.append("")
        return "\n".join(lines)


def _parse_text(text: str, source: str) -> dict[str, dict[str, str]]:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
            text = data["config"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ConfigError(f"{source}: JSON input must be a run manifest with a 'config' field") from None
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out = {}
    for name in parser.sections():
        if name not in DEFAULTS:
            raise ConfigError(f"{source}: unknown section [{name}]")
        for key in parser[name]:
            if key not in DEFAULTS[name]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{name}]")
        out[name] = dict(parser[name])
    return out


def load_config(path: str | Path | None = None, text: str | None = None,
                seed: int | None = None) -> RunConfig:
    """Read a run file (or ``text``), fill defaults and validate."""
    if text is None:
        if path is None:
            raise ConfigError("no configuration given")
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read configuration {path}: {exc}") from exc
    base = Path(path).resolve().parent if path is not None else Path.cwd()
    given = _parse_text(text, str(path or "<text>"))
    sections = {name: dict(keys) for name, keys in DEFAULTS.items()}
    for name, keys in given.items():
        sections[name].update({k: v.strip() for k, v in keys.items()})
    if seed is not None:
        sections["qpe"]["seed"] = str(seed)
    cfg = RunConfig(sections, base)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if not cfg.get("run", "integrals"):
        raise ConfigError("[run] integrals is required")
    if cfg.method not in METHODS:
        raise ConfigError(f"[run] method must be one of {', '.join(METHODS)}")
    if cfg.method == "ci":
        rank = cfg.optional_int("run", "rank")
        if rank is None or rank < 1:
            raise ConfigError("[run] rank >= 1 is required for method = ci")
    cfg.number("trial", "annihilate", int)
    frm, to = cfg.optional_int("trial", "excite_from"), cfg.optional_int("trial", "excite_to")
    if (frm is None) != (to is None):
        raise ConfigError("[trial] excite_from and excite_to go together")
    if cfg.get("trial", "excite_spin") not in ("alpha", "beta"):
        raise ConfigError("[trial] excite_spin must be alpha or beta")
    if cfg.get("trial", "source") not in ("auto", "ground", "hf"):
        raise ConfigError("[trial] source must be auto, ground or hf")
    if cfg.method == "rtcc" and frm is not None:
        raise ConfigError("method = rtcc propagates a plain core hole; drop the excitation")
    for key in ("step", "broadening"):
        cfg.number("spectrum", key, positive=True)
    cfg.number("spectrum", "min_weight")
    for key in ("start", "stop"):
        if cfg.get("spectrum", key) != "auto":
            cfg.number("spectrum", key)
    if cfg.get("spectrum", "shape") not in ("lorentzian", "gaussian"):
        raise ConfigError("[spectrum] shape must be lorentzian or gaussian")
    for key in ("dense_limit", "krylov_iterations"):
        cfg.number("solver", key, int, positive=True)
    for key in ("bits", "shots", "reference_shots"):
        cfg.number("qpe", key, int, positive=True)
    for key in ("seed", "reference_seed", "gap"):
        if cfg.number("qpe", key, int) < 0:
            raise ConfigError(f"[qpe] {key} must be non-negative")
    cfg.number("qpe", "margin", positive=True)
    if cfg.get("qpe", "reference") not in ("qpe", "exact"):
        raise ConfigError("[qpe] reference must be qpe or exact")
    for key in ("dt", "t_max", "damping", "tol"):
        cfg.number("rtcc", key, positive=True)
    cfg.number("rtcc", "min_weight")
    if cfg.get("rtcc", "integrator") not in ("backward_euler", "trapezoidal"):
        raise ConfigError("[rtcc] integrator must be backward_euler or trapezoidal")
    e_corr = cfg.get("rtcc", "e_corr")
    if e_corr not in ("fci", "ccsd"):
        cfg.number("rtcc", "e_corr")


# --------------------------------------------------------------------------- inputs

def load_integrals(cfg: RunConfig) -> tuple[IntegralStore, str]:
    """The integral store and the sha256 of its FCIDUMP text."""
    name = cfg.get("run", "integrals")
    if name.startswith("fixture:"):
        key = name.split(":", 1)[1]
        if key not in FIXTURES:
            raise ConfigError(f"unknown fixture {key!r}; choose from {', '.join(FIXTURES)}")
        store = FIXTURES[key]()
        return store, hashlib.sha256(write_fcidump(store).encode()).hexdigest()
    path = Path(name)
    if not path.is_absolute():
        path = cfg.base_dir / path
    data = path.read_bytes()
    store = read_fcidump(path)
    return store, hashlib.sha256(data).hexdigest()


def _trial_extra(cfg: RunConfig):
    frm = cfg.optional_int("trial", "excite_from")
    if frm is None:
        return None
    return frm, cfg.optional_int("trial", "excite_to"), cfg.get("trial", "excite_spin")


def _grid(cfg: RunConfig, centers: np.ndarray) -> tuple[float, float, float]:
    step = cfg.number("spectrum", "step")
    theta = cfg.number("spectrum", "broadening")
    start, stop = cfg.get("spectrum", "start"), cfg.get("spectrum", "stop")
    lo = float(start) if start != "auto" else float(np.floor(centers.min() - 10 * theta - 5.0))
    hi = float(stop) if stop != "auto" else float(np.ceil(centers.max() + 10 * theta + 5.0))
    if hi <= lo:
        raise ConfigError("[spectrum] stop must exceed start")
    return lo, hi, step


# --------------------------------------------------------------------------- methods

def _sector_poles(cfg, si, trial, e0):
    """Lehmann poles of ``trial`` in its sector, dense or by Krylov."""
    ham = build_hamiltonian(si, trial.space)
    if ham.dim <= cfg.number("solver", "dense_limit", int):
        return lehmann_poles(solve_dense(ham), trial, e0), "dense"
    iters = cfg.number("solver", "krylov_iterations", int)
    return krylov_poles(ham, trial, e0, iterations=iters), f"krylov({iters})"


def _ci_poles(cfg: RunConfig, store: IntegralStore, derived: dict) -> PoleSet:
    si = to_spin_integrals(store)
    rank = cfg.optional_int("run", "rank") if cfg.method == "ci" else None
    ref = Determinant(si.reference_occupation, si.m)
    space_n = enumerate_space(si.m, si.n_alpha, si.n_beta, reference=ref if rank else None, rank=rank)
    ham_n = build_hamiltonian(si, space_n)
    ground = ground_state(ham_n, dense_limit=cfg.number("solver", "dense_limit", int))
    e0 = float(ground.energies[0])
    p = cfg.number("trial", "annihilate", int)
    na, nb = (si.n_alpha - 1, si.n_beta) if p % 2 == 0 else (si.n_alpha, si.n_beta - 1)
    # the ionized space keeps determinants up to one extra hole
    space_i = enumerate_space(si.m, na, nb, reference=ref if rank else None,
                              rank=rank + 1 if rank else None)
    source = cfg.get("trial", "source")
    src = ref if source == "hf" else ground
    trial = make_trial(src, p, _trial_extra(cfg), space=space_i)
    poles, route = _sector_poles(cfg, si, trial, e0)
    derived.update({"e0_hartree": e0, "dim_n": len(space_n), "dim_n_minus_1": len(space_i),
                    "pole_route": route, "trial_norm2": float(trial.vector @ trial.vector)})
    return poles


def _qpe_run(cfg: RunConfig, store: IntegralStore, derived: dict):
    si = to_spin_integrals(store)
    ref = Determinant(si.reference_occupation, si.m)
    space_n = enumerate_space(si.m, si.n_alpha, si.n_beta)
    ham_n = build_hamiltonian(si, space_n)
    dense_limit = cfg.number("solver", "dense_limit", int)
    iters = cfg.number("solver", "krylov_iterations", int)
    ground = ground_state(ham_n, dense_limit=dense_limit)
    e0 = float(ground.energies[0])
    p = cfg.number("trial", "annihilate", int)
    src = ground if cfg.get("trial", "source") == "ground" else ref
    trial = make_trial(src, p, _trial_extra(cfg))
    poles, route = _sector_poles(cfg, si, trial, e0)
    bits = cfg.number("qpe", "bits", int)
    margin = cfg.number("qpe", "margin")
    sig = poles.weights > CLIP_WEIGHT * poles.total_weight
    energies = poles.energies[sig]
    window = phase_window(energies.min(), energies.max(), bits, margin)
    reference = None
    if cfg.get("qpe", "reference") == "qpe":
        # overlaps of the reference determinant with the N-electron eigenstates
        start = np.zeros(len(space_n))
        start[space_n.position(ref)] = 1.0
        if ham_n.dim <= dense_limit:
            sol = solve_dense(ham_n)
            e_n, w_n = sol.energies, sol.vectors[space_n.position(ref)] ** 2
        else:
            e_n, w_n = ritz_poles(lanczos_from_vector(ham_n, start, iters))
        reference = estimate_ground_energy(e_n, w_n, bits, cfg.number("qpe", "reference_shots", int),
                                           cfg.number("qpe", "reference_seed", int),
                                           cfg.number("qpe", "gap", int), margin)
        derived["qpe_reference"] = {"energy_hartree": reference.energy,
                                    "error_vs_exact_eV": (reference.energy - e0) * HARTREE_TO_EV,
                                    "window": reference.window.to_dict()}
    camp = run_campaign(poles, window, cfg.number("qpe", "shots", int), cfg.number("qpe", "seed", int),
                        reference, cfg.number("qpe", "gap", int))
    derived.update({"e0_hartree": e0, "pole_route": route, "window": window.to_dict(),
                    "trial_norm2": float(trial.vector @ trial.vector)})
    return camp, poles


def _rtcc_run(cfg: RunConfig, store: IntegralStore, derived: dict):
    si = to_spin_integrals(store)
    e_corr = cfg.get("rtcc", "e_corr")
    if e_corr not in ("fci", "ccsd"):
        e_corr = float(e_corr)
    ref = init_reference(si, cfg.number("trial", "annihilate", int), e_corr)
    traj = propagate(ref, dt=cfg.number("rtcc", "dt"), t_max=cfg.number("rtcc", "t_max"),
                     integrator=cfg.get("rtcc", "integrator"), tol=cfg.number("rtcc", "tol"))
    qp = (ref.eps_c + ref.e_corr) * HARTREE_TO_EV
    derived.update({"eps_c_hartree": ref.eps_c, "e_corr_hartree": ref.e_corr,
                    "e_corr_source": ref.e_corr_source, "n_steps": len(traj.times) - 1,
                    "resolution_eV": 2 * np.pi / traj.t_max * HARTREE_TO_EV,
                    "antisymmetry_error": traj.antisymmetry_error,
                    "koopmans_plus_corr_eV": qp})
    return traj, qp


# --------------------------------------------------------------------------- run

def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def run_job(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Execute one run and write its artifacts; returns the manifest dict.

    Artifacts: ``spectrum.tsv``, ``spectrum.json``, ``peaks.json`` and
    ``manifest.json``.  Everything except the manifest's wall time is a
    pure function of the configuration and the integrals.
    """
    t_start = time.perf_counter()
    out = Path(out_dir)
    store, integral_hash = load_integrals(cfg)
    derived: dict = {}
    theta = cfg.number("spectrum", "broadening")
    shape = cfg.get("spectrum", "shape")
    method = cfg.method
    label = cfg.get("run", "label") or method

    if method in ("fci", "ci"):
        poles = _ci_poles(cfg, store, derived)
        min_w = cfg.number("spectrum", "min_weight")
        shown = [(e, w) for e, w in zip(poles.binding_ev, poles.weights) if w >= min_w]
        grid = _grid(cfg, np.array([e for e, _ in shown] or poles.binding_ev))
        sf = spectral_function(poles, grid, theta, shape)
        rows = [{"energy_eV": float(e), "weight": float(w)} for e, w in shown]
    elif method == "qpe":
        camp, poles = _qpe_run(cfg, store, derived)
        grid = _grid(cfg, np.array([pk.binding_ev for pk in camp.peaks]))
        sf = qpe_spectrum(camp.peaks, grid, theta, shape, camp.reference_energy)
        # isolated Fejer-tail readouts form tiny clusters; the table keeps
        # peaks above min_weight, the curve keeps them all
        min_w = cfg.number("spectrum", "min_weight")
        rows = [{"energy_eV": pk.binding_ev, "probability": pk.probability, "count": pk.count}
                for pk in camp.peaks if pk.probability >= min_w]
        derived["n_shots"] = camp.n_shots
    else:
        traj, qp = _rtcc_run(cfg, store, derived)
        damping = cfg.number("rtcc", "damping")
        grid = _grid(cfg, np.array([qp - 60.0, qp + 15.0]))
        sf = gf_and_spectrum(traj, damping=damping, grid=grid)
        rows = [{"energy_eV": e, "height": h, "weight": w}
                for e, h, w in resolved_peaks(sf, min_weight=cfg.number("rtcc", "min_weight"))]
        theta = damping
    sf = SpectralFunction(sf.grid, sf.values, sf.broadening, sf.shift, sf.shape, sf.poles,
                          dict(sf.metadata, method=method, label=label))
    derived["grid"] = {"start": float(sf.grid[0]), "stop": float(sf.grid[-1]),
                       "step": cfg.number("spectrum", "step"), "points": len(sf.grid)}
    derived["broadening_eV"] = theta

    peaks = {"schema_version": SCHEMA_VERSION, "method": method, "label": label,
             "integrals_sha256": integral_hash,
             "columns": list(rows[0].keys()) if rows else [], "peaks": rows}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "corespec",
        "version": __version__,
        "config": cfg.echo(),
        "integrals": cfg.get("run", "integrals"),
        "integrals_sha256": integral_hash,
        "derived": _jsonable(derived),
        "spectrum_sha256": sf.provenance_hash(),
        "wall_time_s": None,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        sf.to_tsv(out / "spectrum.tsv")
        (out / "spectrum.json").write_text(sf.to_json() + "\n")
        (out / "peaks.json").write_text(_dump(peaks))
        manifest["wall_time_s"] = round(time.perf_counter() - t_start, 3)
        (out / "manifest.json").write_text(_dump(manifest))
    except OSError as exc:
        raise OSError(f"cannot write artifacts to {out}: {exc}") from exc
    return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --------------------------------------------------------------------------- compare

def _load_run(path: Path) -> dict:
    try:
        manifest = json.loads((path / "manifest.json").read_text())
        peaks = json.loads((path / "peaks.json").read_text())
        spectrum = SpectralFunction.from_dict(json.loads((path / "spectrum.json").read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise OSError(f"{path}: not a completed run ({exc})") from exc
    return {"dir": str(path), "manifest": manifest, "peaks": peaks, "spectrum": spectrum,
            "label": peaks.get("label") or peaks["method"]}


def _weight(row: dict) -> float:
    return float(row.get("weight", row.get("probability", 0.0)))


def match_peaks(a: list[dict], b: list[dict], tol: float = 1.0) -> list[tuple[int, int]]:
    """Greedy matching by energy: closest pairs first, each peak used once."""
    pairs = sorted((abs(x["energy_eV"] - y["energy_eV"]), i, j)
                   for i, x in enumerate(a) for j, y in enumerate(b)
                   if abs(x["energy_eV"] - y["energy_eV"]) <= tol)
    used_a, used_b, out = set(), set(), []
    for _, i, j in pairs:
        if i not in used_a and j not in used_b:
            used_a.add(i)
            used_b.add(j)
            out.append((i, j))
    return sorted(out)


def compare(dirs: list[str | Path], out_dir: str | Path | None = None, shift: float = 0.0,
            broaden: float | None = None, experiment: str | Path | None = None,
            tol: float = 1.0, force: bool = False) -> dict:
    """Side-by-side peak table and overlay curves for completed runs.

    Peaks of every run are matched greedily to those of the first run.  The
    scissors ``shift`` and rebroadening ``broaden`` (eV) act on all curves
    alike; an experimental curve, if given, is interpolated onto the common
    grid.
    """
    if len(dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    runs = [_load_run(Path(d)) for d in dirs]
    hashes = {r["manifest"]["integrals_sha256"] for r in runs}
    if len(hashes) > 1 and not force:
        raise ConfigError("runs used different integrals (hash mismatch); pass --force to compare anyway")
    labels = []
    for r in runs:
        name = r["label"]
        while name in labels:
            name += "'"
        labels.append(name)

    anchor = runs[0]["peaks"]["peaks"]
    rows = [{labels[0]: {"energy_eV": p["energy_eV"] + shift, "weight": _weight(p)}}
            for p in anchor]
    discrepancies = {}
    for label, run in zip(labels[1:], runs[1:]):
        other = run["peaks"]["peaks"]
        matched = match_peaks(anchor, other, tol)
        seen = set()
        errs = []
        for i, j in matched:
            rows[i][label] = {"energy_eV": other[j]["energy_eV"] + shift, "weight": _weight(other[j])}
            errs.append(other[j]["energy_eV"] - anchor[i]["energy_eV"])
            seen.add(j)
        for j, p in enumerate(other):
            if j not in seen:
                rows.append({label: {"energy_eV": p["energy_eV"] + shift, "weight": _weight(p)}})
        errs = np.abs(errs)
        discrepancies[f"{labels[0]} vs {label}"] = {
            "matched": len(matched),
            "max_abs_eV": float(errs.max()) if len(errs) else None,
            "mean_abs_eV": float(errs.mean()) if len(errs) else None,
        }
    rows.sort(key=lambda r: min(v["energy_eV"] for v in r.values()))

    curves = {}
    for label, run in zip(labels, runs):
        sf = run["spectrum"]
        target = broaden if broaden is not None else sf.broadening
        if target < sf.broadening and sf.poles is None:
            raise ConfigError(f"{run['dir']}: cannot sharpen a curve without poles (broadening {sf.broadening} eV)")
        curves[label] = postprocess(sf, shift, target)
    # union of the windows at the finest step; curves are NaN outside their own range
    lo = min(c.grid[0] for c in curves.values())
    hi = max(c.grid[-1] for c in curves.values())
    step = min(float(np.min(np.diff(c.grid))) for c in curves.values())
    grid = lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1)
    overlay = {label: np.interp(grid, c.grid, c.values, left=np.nan, right=np.nan)
               for label, c in curves.items()}
    if experiment is not None:
        ex_w, ex_a = read_tsv(experiment)
        overlay["experiment"] = np.interp(grid, ex_w, ex_a, left=np.nan, right=np.nan)

    report = {"schema_version": SCHEMA_VERSION, "runs": [r["dir"] for r in runs],
              "labels": labels, "integrals_sha256": sorted(hashes), "shift_eV": shift,
              "broadening_eV": broaden, "match_tolerance_eV": tol, "rows": rows,
              "discrepancies": discrepancies}
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "comparison.json").write_text(_dump(report))
            header = "# omega_eV\t" + "\t".join(overlay)
            body = np.column_stack([grid] + list(overlay.values()))
            np.savetxt(out / "overlay.tsv", body, delimiter="\t", header=header[2:], comments="# ",
                       fmt="%.10g")
        except OSError as exc:
            raise OSError(f"cannot write comparison to {out}: {exc}") from exc
    return report


def format_table(report: dict) -> str:
    labels = report["labels"]
    head = "".join(f"{lab:>26s}" for lab in labels)
    lines = [head, "".join(f"{'E (eV)':>16s}{'weight':>10s}" for _ in labels)]
    for row in report["rows"]:
        cells = []
        for lab in labels:
            if lab in row:
                cells.append(f"{row[lab]['energy_eV']:16.3f}{row[lab]['weight']:10.4f}")
            else:
                cells.append(f"{'-':>16s}{'-':>10s}")
        lines.append("".join(cells))
    for pair, d in report["discrepancies"].items():
        if d["max_abs_eV"] is not None:
            lines.append(f"{pair}: {d['matched']} matched, max |dE| {d['max_abs_eV']:.3f} eV, "
                         f"mean |dE| {d['mean_abs_eV']:.3f} eV")
        else:
            lines.append(f"{pair}: no peaks matched")
    return "\n".join(lines)


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corespec", description="Core-hole spectral functions.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one job from a configuration file")
    run.add_argument("--config", required=True, help="INI run file or a previous manifest.json")
    run.add_argument("--seed", type=int, default=None, help="override [qpe] seed")
    run.add_argument("--out", default="corespec_out", help="output directory")
    cmp_ = sub.add_parser("compare", help="compare completed runs")
    cmp_.add_argument("dirs", nargs="+", help="run directories")
    cmp_.add_argument("--shift", type=float, default=0.0, help="scissors shift in eV")
    cmp_.add_argument("--broaden", type=float, default=None, help="common broadening in eV")
    cmp_.add_argument("--experiment", default=None, help="digitized experimental curve (TSV)")
    cmp_.add_argument("--tol", type=float, default=1.0, help="peak matching tolerance in eV")
    cmp_.add_argument("--out", default=None, help="directory for comparison.json and overlay.tsv")
    cmp_.add_argument("--force", action="store_true", help="compare runs on different integrals")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config, seed=args.seed)
            manifest = run_job(cfg, args.out)
            print(f"wrote {args.out} (spectrum sha256 {manifest['spectrum_sha256'][:12]})")
        else:
            report = compare(args.dirs, args.out, args.shift, args.broaden, args.experiment,
                             args.tol, args.force)
            print(format_table(report))
    except FCIDumpError as exc:
        print(f"cannot read integrals: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, PropagationError, CapacityError, WindowError,
            np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
