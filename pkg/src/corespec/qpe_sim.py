"""Measurement-level emulation of quantum phase estimation.

A trial state with overlap weights ``w_i`` on eigenstates of energy ``E_i``
yields, per shot, eigenstate ``i`` with probability ``w_i / sum(w)`` and then
an m-bit readout ``k`` from the Fejer kernel of the phase ``phi_i``.  No
gates, Trotter error or noise are modelled.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from corespec.constants import HARTREE_TO_EV
from corespec.greens import PoleSet, SpectralFunction, make_grid, spectral_function

__all__ = [
    "WindowError",
    "PhaseWindow",
    "QPEShot",
    "Peak",
    "QPEReference",
    "QPECampaign",
    "phase_window",
    "fejer_kernel",
    "fejer_probabilities",
    "sample_shot",
    "shot_uniforms",
    "run_campaign",
    "estimate_ground_energy",
    "aggregate",
    "qpe_spectrum",
]

CLIP_WEIGHT = 1e-3


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseWindow:
    """Affine energy-to-phase map ``phi = tau (E - offset) / 2 pi``."""

    tau: float
    offset: float
    bits: int

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 1 <= self.bits <= 32:
            raise ValueError("bits must be in 1..32")

    @property
    def n_bins(self) -> int:
        return 1 << self.bits

    @property
    def bin_width(self) -> float:
        """Energy per readout bin, Hartree."""
        return 2 * np.pi / (self.n_bins * self.tau)

    @property
    def upper(self) -> float:
        return self.offset + 2 * np.pi / self.tau

    def phase(self, energy):
        return self.tau * (np.asarray(energy, dtype=float) - self.offset) / (2 * np.pi)

    def energy(self, k):
        return self.offset + np.asarray(k) * self.bin_width

    def to_dict(self) -> dict:
        return {"tau": self.tau, "offset_hartree": self.offset, "bits": self.bits,
                "bin_width_hartree": self.bin_width,
                "bin_width_eV": self.bin_width * HARTREE_TO_EV}


def phase_window(e_min: float, e_max: float, bits: int = 12, margin: float = 0.05,
                 min_width: float = 0.05) -> PhaseWindow:
    """Window mapping ``[e_min - pad, e_max + pad]`` onto ``[0, 1 - 2**-bits]``.

    ``pad = margin * (e_max - e_min)``.  Ranges narrower than ``min_width``
    (Hartree) are first widened symmetrically to it, so that a single pole
    still gets a window of sensible resolution.
    """
    if e_max < e_min:
        raise ValueError("e_max must not be below e_min")
    if min_width <= 0:
        raise ValueError("min_width must be positive")
    if e_max - e_min < min_width:
        mid = 0.5 * (e_max + e_min)
        e_min, e_max = mid - 0.5 * min_width, mid + 0.5 * min_width
    pad = margin * (e_max - e_min)
    tau = 2 * np.pi * (1 - 2.0 ** -bits) / (e_max - e_min + 2 * pad)
    return PhaseWindow(tau=tau, offset=e_min - pad, bits=bits)


def fejer_kernel(delta, bits: int):
    """``Pr(k | phi)`` as a function of ``delta = phi - k / 2**bits``."""
    n = 1 << bits
    delta = np.asarray(delta, dtype=float)
    s = np.sin(np.pi * delta)
    num = np.sin(n * np.pi * delta)
    small = np.abs(s) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (num / (n * np.where(small, 1.0, s))) ** 2
    return np.where(small, 1.0, out)


def fejer_probabilities(phi: float, bits: int) -> np.ndarray:
    """Outcome distribution over all ``2**bits`` readouts."""
    n = 1 << bits
    k = np.arange(n)
    # reduce delta to [-1/2, 1/2) to keep sin(pi delta) well conditioned
    delta = (phi - k / n + 0.5) % 1.0 - 0.5
    p = fejer_kernel(delta, bits)
    return p


@dataclass(frozen=True)
class QPEShot:
    outcome: int
    energy_estimate: float


@dataclass(frozen=True)
class Peak:
    binding_ev: float
    probability: float
    count: int
    energy: float

    def to_dict(self) -> dict:
        return {"energy_eV": round(self.binding_ev, 10), "P": round(self.probability, 10),
                "count": self.count, "energy_hartree": round(self.energy, 12)}


@dataclass(frozen=True)
class QPEReference:
    """Ground-state energy estimate from a campaign on the N-electron sector."""

    energy: float
    probability: float
    window: PhaseWindow
    n_shots: int
    seed: int


@dataclass(frozen=True, eq=False)
class QPECampaign:
    window: PhaseWindow
    seed: int
    label: str
    outcomes: np.ndarray
    reference_energy: float
    reference_source: str
    peaks: tuple[Peak, ...] = ()
    gap: int = 2
    metadata: dict = field(default_factory=dict)

    @property
    def n_shots(self) -> int:
        return len(self.outcomes)

    @property
    def energies(self) -> np.ndarray:
        return self.window.energy(self.outcomes)

    @property
    def shots(self) -> list[QPEShot]:
        return [QPEShot(int(k), float(e)) for k, e in zip(self.outcomes, self.energies)]

    def top_peaks(self, count: int) -> list[Peak]:
        return sorted(self.peaks, key=lambda p: -p.probability)[:count]

    def to_dict(self, include_shots: bool = False) -> dict:
        out = {
            "window": self.window.to_dict(),
            "seed": self.seed,
            "label": self.label,
            "n_shots": self.n_shots,
            "gap_bins": self.gap,
            "reference_energy_hartree": self.reference_energy,
            "reference_source": self.reference_source,
            "peaks": [p.to_dict() for p in self.peaks],
            "metadata": self.metadata,
        }
        if include_shots:
            out["outcomes"] = self.outcomes.tolist()
        return out


def shot_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Two uniforms per shot from a counter-based stream.

    Shot ``j`` reads Philox block ``j`` under key ``seed``, so any shard of
    shots reproduces the same numbers as a single sequential run.
    """
    bitgen = np.random.Philox(key=seed, counter=start)
    raw = bitgen.random_raw(4 * count).reshape(count, 4)[:, :2]
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def _pole_phases(energies, weights, window: PhaseWindow, clip_weight: float):
    phases = window.phase(energies)
    outside = (phases < 0) | (phases >= 1)
    clipped = outside & (weights > clip_weight)
    if clipped.any():
        bad = np.asarray(energies)[clipped]
        raise WindowError(
            f"{clipped.sum()} pole(s) with weight > {clip_weight} fall outside the phase "
            f"window [{window.offset:.6f}, {window.upper:.6f}] Hartree, e.g. {bad[0]:.6f}")
    return phases % 1.0


def sample_shot(energies, weights, window: PhaseWindow,
                rng: np.random.Generator, normalize: bool = True) -> QPEShot:
    """One QPE measurement.

    With ``normalize=False`` and ``sum(weights) < 1`` the missing probability
    produces a uniformly random readout.
    """
    weights = np.asarray(weights, dtype=float)
    phases = _pole_phases(energies, weights, window, clip_weight=np.inf)
    total = weights.sum()
    u = rng.random()
    if not normalize and u >= total:
        k = int(rng.integers(window.n_bins))
    else:
        scale = total if normalize else 1.0
        i = min(int(np.searchsorted(np.cumsum(weights) / scale, u, side="right")), len(weights) - 1)
        cdf = np.cumsum(fejer_probabilities(phases[i], window.bits))
        k = min(int(np.searchsorted(cdf / cdf[-1], rng.random(), side="right")), window.n_bins - 1)
    return QPEShot(k, float(window.energy(k)))


def _draw(energies, weights, window, n_shots, seed, start=0, clip_weight=CLIP_WEIGHT):
    weights = np.asarray(weights, dtype=float)
    energies = np.asarray(energies, dtype=float)
    phases = _pole_phases(energies, weights, window, clip_weight)
    u = shot_uniforms(seed, start, n_shots)
    cdf_w = np.cumsum(weights)
    cdf_w /= cdf_w[-1]
    which = np.minimum(np.searchsorted(cdf_w, u[:, 0], side="right"), len(weights) - 1)
    outcomes = np.empty(n_shots, dtype=np.int64)
    for i in np.unique(which):
        sel = which == i
        cdf = np.cumsum(fejer_probabilities(phases[i], window.bits))
        cdf /= cdf[-1]
        outcomes[sel] = np.minimum(np.searchsorted(cdf, u[sel, 1], side="right"), window.n_bins - 1)
    return outcomes


def aggregate(campaign: QPECampaign, gap: int = 2) -> tuple[Peak, ...]:
    """Cluster readouts into peaks.

    Occupied bins separated by more than ``gap`` empty bins start a new
    cluster.  Each peak carries the shot-averaged energy and its shot
    fraction, returned in ascending order of binding energy.
    """
    if campaign.n_shots == 0:
        raise ValueError("campaign has no shots")
    bins, counts = np.unique(campaign.outcomes, return_counts=True)
    breaks = np.nonzero(np.diff(bins) - 1 > gap)[0] + 1
    peaks = []
    for b, c in zip(np.split(bins, breaks), np.split(counts, breaks)):
        energy = float(np.sum(campaign.window.energy(b) * c) / c.sum())
        peaks.append(Peak(
            binding_ev=(campaign.reference_energy - energy) * HARTREE_TO_EV,
            probability=float(c.sum() / campaign.n_shots),
            count=int(c.sum()),
            energy=energy,
        ))
    return tuple(sorted(peaks, key=lambda p: p.binding_ev))


def estimate_ground_energy(energies, weights, bits: int = 12, n_shots: int = 100,
                           seed: int = 0, gap: int = 2, margin: float = 0.05,
                           window: PhaseWindow | None = None,
                           min_probability: float = 0.05) -> QPEReference:
    """Phase-estimate the N-electron ground energy.

    ``energies``/``weights`` describe the reference determinant's overlap
    with N-electron eigenstates.  E_0 is the lowest-energy peak holding at
    least ``min_probability`` of the shots; the floor keeps isolated
    Fejer-tail readouts below the true ground state from being taken for it.
    """
    energies = np.asarray(energies, float)
    weights = np.asarray(weights, float)
    if window is None:
        sig = weights > CLIP_WEIGHT
        window = phase_window(energies[sig].min(), energies[sig].max(), bits, margin)
    outcomes = _draw(energies, weights, window, n_shots, seed)
    tmp = QPECampaign(window, seed, "reference", outcomes, 0.0, "qpe")
    peaks = [p for p in aggregate(tmp, gap) if p.probability >= min_probability]
    if not peaks:
        raise ValueError(f"no peak reached probability {min_probability}; add shots")
    lowest = min(peaks, key=lambda p: p.energy)
    return QPEReference(lowest.energy, lowest.probability, window, n_shots, seed)


def run_campaign(poles: PoleSet, window: PhaseWindow, n_shots: int, seed: int,
                 reference: QPEReference | float | None = None, gap: int = 2,
                 label: str | None = None) -> QPECampaign:
    """Sample ``n_shots`` readouts for a trial's pole set.

    Binding energies are taken against ``reference``: a QPE estimate of the
    N-electron ground energy, an explicit energy, or (``None``) the exact
    energy stored on ``poles``.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    outcomes = _draw(poles.energies, poles.weights, window, n_shots, seed)
    if isinstance(reference, QPEReference):
        ref, source = reference.energy, "qpe"
        meta = {"reference_shots": reference.n_shots, "reference_seed": reference.seed,
                "reference_window": reference.window.to_dict(),
                "reference_probability": reference.probability}
    elif reference is None:
        ref, source, meta = poles.reference_energy, "exact", {}
    else:
        ref, source, meta = float(reference), "given", {}
    camp = QPECampaign(window, seed, label if label is not None else poles.label,
                       outcomes, ref, source, gap=gap, metadata=meta)
    return replace(camp, peaks=aggregate(camp, gap))


def qpe_spectrum(peaks, grid, theta: float, shape: str = "lorentzian",
                 reference_energy: float = 0.0) -> SpectralFunction:
    """Spectral function with peak probabilities as pole weights."""
    if theta <= 0:
        raise ValueError("broadening must be positive")
    peaks = list(peaks)
    poles = PoleSet(np.array([p.binding_ev for p in peaks], float),
                    np.array([p.probability for p in peaks], float), reference_energy, "qpe")
    return spectral_function(poles, grid, theta, shape)
