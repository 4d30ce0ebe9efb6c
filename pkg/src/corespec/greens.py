"""Ionization-potential Green's functions and spectral functions.

Binding energies follow the sign convention ``omega_i = E_0(N) - E_i(N-1)``
in eV, so core levels come out large and negative.  Broadening widths are
half widths at half maximum, in eV.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal

from corespec.ci_solver import EigenSolution, LanczosTridiagonal, SectorHamiltonian, lanczos_from_vector, ritz_poles
from corespec.constants import HARTREE_TO_EV
from corespec.fock_space import CISpace, Determinant, enumerate_space

__all__ = [
    "SCHEMA_VERSION",
    "TrialState",
    "PoleSet",
    "SpectralFunction",
    "make_grid",
    "make_trial",
    "lehmann_poles",
    "krylov_poles",
    "spectral_function",
    "continued_fraction",
    "postprocess",
    "find_peaks",
    "read_tsv",
]

SCHEMA_VERSION = 1
WEIGHT_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class TrialState:
    vector: np.ndarray
    space: CISpace
    label: str
    source_spin_orbital: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass(frozen=True, eq=False)
class PoleSet:
    """Poles ``(binding energy in eV, weight)`` of a diagonal IP Green's function."""

    binding_ev: np.ndarray
    weights: np.ndarray
    reference_energy: float
    label: str = ""

    def __post_init__(self):
        order = np.argsort(self.binding_ev, kind="stable")
        object.__setattr__(self, "binding_ev", np.asarray(self.binding_ev, float)[order])
        object.__setattr__(self, "weights", np.asarray(self.weights, float)[order])

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def energies(self) -> np.ndarray:
        """Pole energies of the ionized sector, E_i(N-1), in Hartree."""
        return self.reference_energy - self.binding_ev / HARTREE_TO_EV

    def shifted(self, shift_ev: float) -> "PoleSet":
        return replace(self, binding_ev=self.binding_ev + shift_ev)

    def dominant(self, count: int | None = None) -> "PoleSet":
        order = np.argsort(-self.weights, kind="stable")[:count]
        return PoleSet(self.binding_ev[order], self.weights[order], self.reference_energy, self.label)

    def table(self) -> list[dict]:
        return [{"energy_eV": float(e), "weight": float(w)}
                for e, w in zip(self.binding_ev, self.weights)]


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    grid: np.ndarray
    values: np.ndarray
    broadening: float
    shift: float = 0.0
    shape: str = "lorentzian"
    poles: PoleSet | None = None
    metadata: dict = field(default_factory=dict)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def peaks(self, min_height: float = 0.0, prominence: float = 0.0) -> list[tuple[float, float]]:
        return find_peaks(self.grid, self.values, min_height, prominence)

    def provenance_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.grid).tobytes())
        digest.update(np.ascontiguousarray(self.values).tobytes())
        return digest.hexdigest()

    def to_tsv(self, path: str | Path | None = None) -> str:
        lines = [f"# broadening_eV\t{self.broadening!r}", f"# shift_eV\t{self.shift!r}",
                 f"# shape\t{self.shape}", "# omega_eV\tA_per_eV"]
        lines += [f"{w:.10f}\t{a:.12e}" for w, a in zip(self.grid, self.values)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_dict(self, include_curve: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "broadening_eV": self.broadening,
            "shift_eV": self.shift,
            "shape": self.shape,
            "poles": self.poles.table() if self.poles is not None else None,
            "reference_energy_hartree": self.poles.reference_energy if self.poles is not None else None,
            "pole_label": self.poles.label if self.poles is not None else None,
            "metadata": self.metadata,
            "provenance_sha256": self.provenance_hash(),
        }
        if include_curve:
            out["omega_eV"] = self.grid.tolist()
            out["A_per_eV"] = self.values.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralFunction":
        """Inverse of :meth:`to_dict` (the curve must be included)."""
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported spectrum schema {data.get('schema_version')!r}")
        poles = None
        if data.get("poles") is not None:
            table = data["poles"]
            poles = PoleSet(np.array([r["energy_eV"] for r in table], float),
                            np.array([r["weight"] for r in table], float),
                            float(data["reference_energy_hartree"]), data.get("pole_label") or "")
        return cls(np.asarray(data["omega_eV"], float), np.asarray(data["A_per_eV"], float),
                   float(data["broadening_eV"]), float(data["shift_eV"]), data["shape"], poles,
                   dict(data.get("metadata", {})))

    def to_json(self, path: str | Path | None = None, include_curve: bool = True) -> str:
        text = json.dumps(self.to_dict(include_curve), indent=1, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text


def read_tsv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column (omega_eV, value) data; '#' lines are comments."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    return data[:, 0], data[:, 1]


def make_grid(spec) -> np.ndarray:
    """Grid from an explicit array or a ``(start, stop, step)`` triple (inclusive)."""
    if isinstance(spec, tuple) and len(spec) == 3:
        start, stop, step = spec
        if step <= 0 or stop <= start:
            raise ValueError("grid needs start < stop and step > 0")
        n = int(round((stop - start) / step)) + 1
        return start + step * np.arange(n)
    grid = np.asarray(spec, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be one-dimensional and strictly ascending")
    return grid


def _spin_of(p: int) -> int:
    return p % 2


def _target_space(space_or_m, n_alpha: int, n_beta: int) -> CISpace:
    if isinstance(space_or_m, CISpace):
        return space_or_m
    return enumerate_space(space_or_m, n_alpha, n_beta)


def make_trial(source, p: int, extra: tuple[int, int, int | str] | None = None,
               space: CISpace | None = None, label: str | None = None) -> TrialState:
    """Apply ``a_p`` (then an optional excitation) to a state.

    ``source`` is a :class:`Determinant`, an :class:`EigenSolution` (its
    lowest vector is used) or a ``(vector, CISpace)`` pair.  ``extra`` is
    ``(from_orbital, to_orbital, spin)`` over spatial orbitals, applied as
    ``a_to^+ a_from`` after the annihilation.  The result is not
    renormalized.
    """
    if isinstance(source, Determinant):
        m, src_dets, coefs = source.m, np.array([source.occ], dtype=np.uint64), np.ones(1)
        na, nb = source.n_alpha, source.n_beta
    else:
        if isinstance(source, EigenSolution):
            vec, src_space = source.ground_vector(), source.space
        else:
            vec, src_space = source
        m, na, nb = src_space.m, src_space.n_alpha, src_space.n_beta
        src_dets, coefs = src_space.dets, np.asarray(vec, dtype=float)
    if not 0 <= p < m:
        raise IndexError(f"spin-orbital {p} outside 0..{m - 1}")

    ops = [(p, False)]
    if extra is not None:
        frm, to, spin = extra
        spin = {"alpha": 0, "a": 0, "beta": 1, "b": 1}.get(spin, spin)
        ops += [(2 * frm + spin, False), (2 * to + spin, True)]
    if _spin_of(p):
        nb -= 1
    else:
        na -= 1
    target = _target_space(space if space is not None else m, na, nb)

    dets = np.asarray(src_dets, dtype=np.uint64)
    sign = np.ones(len(dets))
    alive = coefs != 0
    for q, dag in ops:
        bit = (dets >> np.uint64(q)) & np.uint64(1)
        alive &= bit == (0 if dag else 1)
        below = np.bitwise_count(dets & np.uint64((1 << q) - 1)) & 1
        sign = np.where(below, -sign, sign)
        dets = dets ^ np.uint64(1 << q)

    vector = np.zeros(len(target))
    pos = target.positions(dets[alive])
    inside = pos >= 0
    np.add.at(vector, pos[inside], (sign * coefs)[alive][inside])
    if not np.any(vector):
        raise ValueError("trial annihilates state")
    if label is None:
        label = f"a_{p}" + (f" then {extra[0]}->{extra[1]}" if extra else "")
    return TrialState(vector, target, label, p)


def lehmann_poles(eigen: EigenSolution, trial: TrialState, e0_n: float,
                  weight_floor: float = WEIGHT_FLOOR) -> PoleSet:
    """Poles ``E_0 - E_i`` with weights ``|<psi_i|trial>|^2``."""
    if eigen.vectors is None:
        raise ValueError("eigenvectors are required")
    if eigen.space is not None and not (eigen.space.same_sector(trial.space)
                                        and len(eigen.space) == len(trial.space)):
        raise ValueError("trial and eigenvectors live in different CI spaces")
    if eigen.vectors.shape[0] != len(trial.vector):
        raise ValueError("trial length does not match eigenvector length")
    weights = (eigen.vectors.T @ trial.vector) ** 2
    binding = (e0_n - eigen.energies) * HARTREE_TO_EV
    keep = weights >= weight_floor if weight_floor else np.ones(len(weights), bool)
    return PoleSet(binding[keep], weights[keep], e0_n, trial.label)


def krylov_poles(ham: SectorHamiltonian, trial: TrialState, e0_n: float,
                 iterations: int = 400, weight_floor: float = WEIGHT_FLOOR) -> PoleSet:
    """Lehmann poles from Ritz pairs of the trial's Krylov space.

    The large-space substitute for :func:`lehmann_poles`; exact once the
    Lanczos run exhausts the Krylov space.
    """
    tri = lanczos_from_vector(ham, trial.vector, iterations)
    values, weights = ritz_poles(tri)
    keep = weights >= weight_floor
    return PoleSet((e0_n - values[keep]) * HARTREE_TO_EV, weights[keep], e0_n, trial.label)


def _kernel(grid: np.ndarray, centers: np.ndarray, weights: np.ndarray, theta: float,
            shape: str) -> np.ndarray:
    out = np.zeros(len(grid))
    for c, w in zip(centers, weights):
        d = grid - c
        if shape == "lorentzian":
            out += w * theta / np.pi / (d * d + theta * theta)
        elif shape == "gaussian":
            sigma = theta / np.sqrt(2 * np.log(2))
            out += w * np.exp(-0.5 * (d / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
        else:
            raise ValueError(f"unknown broadening shape {shape!r}")
    return out


def spectral_function(poles: PoleSet, grid, theta: float,
                      shape: str = "lorentzian") -> SpectralFunction:
    """Broadened pole sum; with ``shape='lorentzian'`` this is
    ``-Im G(omega) / pi`` evaluated at ``omega + i theta``."""
    if theta <= 0:
        raise ValueError("broadening must be positive")
    grid = make_grid(grid)
    values = _kernel(grid, poles.binding_ev, poles.weights, theta, shape)
    return SpectralFunction(grid, values, theta, 0.0, shape, poles)


def continued_fraction(tri: LanczosTridiagonal, grid, theta: float, e0_n: float) -> SpectralFunction:
    """Lorentzian spectral function from the Lanczos continued fraction.

    Evaluates ``|v|^2 <v|(z - H)^{-1}|v>`` bottom-up at
    ``z = E_0 - omega - i theta`` (Hartree), which places the poles at the
    binding energies ``E_0 - E_i``.
    """
    if theta <= 0:
        raise ValueError("broadening must be positive")
    grid = make_grid(grid)
    z = e0_n - (grid + 1j * theta) / HARTREE_TO_EV
    denom = z - tri.alphas[-1]
    for a, b in zip(tri.alphas[-2::-1], tri.betas[::-1]):
        denom = z - a - b * b / denom
    resolvent = tri.start_norm ** 2 / denom
    values = resolvent.imag / np.pi / HARTREE_TO_EV
    return SpectralFunction(grid, values, theta, 0.0, "lorentzian", None,
                            {"lanczos_iterations": tri.iterations})


def postprocess(sf: SpectralFunction, shift: float = 0.0,
                broadening: float | None = None) -> SpectralFunction:
    """Rigid scissors shift (eV) and optional rebroadening.

    With stored poles the curve is rebuilt at the new width.  Without poles a
    Lorentzian curve on a uniform grid is convolved with a Lorentzian of the
    width difference.
    """
    theta = sf.broadening if broadening is None else broadening
    grid = sf.grid + shift
    meta = dict(sf.metadata, scissors_eV=sf.shift + shift)
    if sf.poles is not None:
        poles = sf.poles.shifted(shift)
        values = _kernel(grid, poles.binding_ev, poles.weights, theta, sf.shape)
        return SpectralFunction(grid, values, theta, sf.shift + shift, sf.shape, poles, meta)
    if theta < sf.broadening:
        raise ValueError("cannot sharpen a curve without its poles")
    values = sf.values
    if theta > sf.broadening:
        if sf.shape != "lorentzian":
            raise ValueError("pole-free rebroadening is only defined for Lorentzian curves")
        step = np.diff(sf.grid)
        if not np.allclose(step, step[0], rtol=1e-6):
            raise ValueError("pole-free rebroadening needs a uniform grid")
        extra = theta - sf.broadening
        offsets = step[0] * np.arange(-len(grid) + 1, len(grid))
        kern = extra / np.pi / (offsets ** 2 + extra ** 2) * step[0]
        n = len(grid)
        values = np.convolve(values, kern)[n - 1: 2 * n - 1]
    return SpectralFunction(grid, values, theta, sf.shift + shift, sf.shape, None, meta)


def find_peaks(grid: np.ndarray, values: np.ndarray, min_height: float = 0.0,
               prominence: float = 0.0) -> list[tuple[float, float]]:
    """Local maxima refined by a parabola through the three nearest points.

    ``prominence`` is relative to the tallest point of ``values`` and drops
    ripples such as the sinc side lobes of a finite-time transform.
    Returns ``(position, height)`` pairs sorted by position.
    """
    y = np.asarray(values, dtype=float)
    x = np.asarray(grid, dtype=float)
    if y.size < 3:
        return []
    scale = max(float(y.max()), 0.0)
    idx, _ = signal.find_peaks(y, height=min_height if min_height > 0 else None,
                               prominence=prominence * scale if prominence > 0 else None)
    out = []
    for k in idx:
        y0, y1, y2 = y[k - 1], y[k], y[k + 1]
        curv = y0 - 2 * y1 + y2
        if curv == 0:
            out.append((float(x[k]), float(y1)))
            continue
        frac = 0.5 * (y0 - y2) / curv
        h = 0.5 * (x[k + 1] - x[k - 1])
        out.append((float(x[k] + frac * h), float(y1 - 0.25 * (y0 - y2) * frac)))
    return out
