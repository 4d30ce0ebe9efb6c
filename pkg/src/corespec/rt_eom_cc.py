"""Real-time EOM-CCSD cumulant Green's function of a core hole.

The (N-1)-electron state ``a_c |Phi_0>`` is propagated as
``exp(i (H - E_ref) t) |phi> = exp(C(t)) exp(T(t)) |phi>`` with
time-dependent singles and doubles.  Amplitudes obey
``dt_mu/dt = i <mu| e^-T H e^T |phi>`` and the cumulant
``dC/dt = i <phi| e^-T (H - E_ref) e^T |phi>``; both vanish at t = 0.
Times are in atomic units, energies in Hartree unless stated.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import opt_einsum as oe
from scipy import signal

from corespec.ci_solver import build_hamiltonian, correlation_energy
from corespec.constants import HARTREE_TO_EV
from corespec.fock_space import Determinant, enumerate_space
from corespec.greens import SpectralFunction, find_peaks, make_grid
from corespec.integrals import FockNMinus1, SpinIntegrals, fock_n_minus_1

__all__ = [
    "PropagationError",
    "CCReference",
    "CCState",
    "CCTrajectory",
    "init_reference",
    "ccsd_residuals",
    "cumulant_rhs",
    "cc_energy",
    "static_ccsd",
    "propagate",
    "gf_and_spectrum",
    "resolved_peaks",
    "save_checkpoint",
    "load_checkpoint",
]

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class PropagationError(RuntimeError):
    pass


class _Blocks:
    """Occupied/virtual slices of ``f`` and ``<pq||rs>``, cut on first use."""

    def __init__(self, f: np.ndarray, v: np.ndarray, occ, virt):
        self._f, self._v = f, v
        self._idx = {"o": np.asarray(occ, dtype=int), "v": np.asarray(virt, dtype=int)}
        self._cache: dict[str, np.ndarray] = {}

    def __getattr__(self, name: str) -> np.ndarray:
        if name.startswith("_"):
            raise AttributeError(name)
        key = name[1:] if name[0] == "f" and len(name) == 3 else name
        cache_key = name
        if cache_key not in self._cache:
            src = self._f if len(key) == 2 else self._v
            self._cache[cache_key] = src[np.ix_(*(self._idx[c] for c in key))]
        return self._cache[cache_key]

    @property
    def n_occ(self) -> int:
        return len(self._idx["o"])

    @property
    def n_virt(self) -> int:
        return len(self._idx["v"])


@dataclass(frozen=True, eq=False)
class CCReference:
    """Core-ionized reference ``phi = a_c |Phi_0>`` and its Fock operator."""

    core: int
    phi: Determinant
    occ: tuple[int, ...]
    virt: tuple[int, ...]
    fock: FockNMinus1
    eps_c: float
    e_corr: float
    e_corr_source: str
    v: np.ndarray = field(repr=False)

    @property
    def blocks(self) -> _Blocks:
        cached = self.__dict__.get("_blocks")
        if cached is None:
            cached = _Blocks(self.fock.f, self.v, self.occ, self.virt)
            object.__setattr__(self, "_blocks", cached)
        return cached

    def denominators(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal parts ``f_aa - f_ii`` and ``f_aa + f_bb - f_ii - f_jj``."""
        fo = np.diag(self.blocks.foo)
        fv = np.diag(self.blocks.fvv)
        d1 = fv[None, :] - fo[:, None]
        d2 = (fv[None, None, :, None] + fv[None, None, None, :]
              - fo[:, None, None, None] - fo[None, :, None, None])
        return d1, d2

    def zero_state(self) -> "CCState":
        no, nv = len(self.occ), len(self.virt)
        return CCState(0.0, np.zeros((no, nv), complex), np.zeros((no, no, nv, nv), complex), 0j)


@dataclass(frozen=True, eq=False)
class CCState:
    time: float
    t1: np.ndarray
    t2: np.ndarray
    C: complex


@dataclass(frozen=True, eq=False)
class CCTrajectory:
    times: np.ndarray
    cumulant: np.ndarray
    dt: float
    t_max: float
    integrator: str
    t1_norm: np.ndarray
    t2_norm: np.ndarray
    final: CCState
    eps_c: float
    e_corr: float
    antisymmetry_error: float = 0.0

    def green_function(self) -> np.ndarray:
        """``G_c(t) = -i exp(-i (eps_c + E_corr) t) exp(C(t))``."""
        phase = -1j * (self.eps_c + self.e_corr) * self.times
        return -1j * np.exp(phase + self.cumulant)


def init_reference(si: SpinIntegrals, c: int, e_corr: float | str = "fci") -> CCReference:
    """Reference for a hole in spin-orbital ``c``.

    ``e_corr`` is the N-electron correlation energy: ``"fci"`` (exact, from
    the full N-electron sector), ``"ccsd"`` (static CCSD) or a number.
    """
    fock = fock_n_minus_1(si, c)
    phi_occ = si.reference_occupation & ~(1 << c)
    occ = tuple(p for p in range(si.m) if phi_occ >> p & 1)
    virt = tuple(p for p in range(si.m) if not phi_occ >> p & 1)
    if isinstance(e_corr, str):
        source = e_corr
        if e_corr == "fci":
            space = enumerate_space(si.m, si.n_alpha, si.n_beta)
            ham = build_hamiltonian(si, space)
            value = correlation_energy(ham, si.reference_occupation)
        elif e_corr == "ccsd":
            value = static_ccsd(si)[0]
        else:
            raise ValueError(f"unknown correlation-energy source {e_corr!r}")
    else:
        source, value = "given", float(e_corr)
    return CCReference(core=c, phi=Determinant(phi_occ, si.m), occ=occ, virt=virt,
                       fock=fock, eps_c=float(si.eps[c]), e_corr=float(value),
                       e_corr_source=source, v=si.v)


def _antisym(x: np.ndarray) -> np.ndarray:
    return 0.25 * (x - x.transpose(1, 0, 2, 3) - x.transpose(0, 1, 3, 2) + x.transpose(1, 0, 3, 2))


_EXPRESSIONS: dict[tuple, object] = {}


def _einsum(subscripts: str, *operands):
    """Einsum through precompiled contraction expressions, cached per shape."""
    key = (subscripts,) + tuple(op.shape for op in operands)
    expr = _EXPRESSIONS.get(key)
    if expr is None:
        expr = oe.contract_expression(subscripts, *key[1:], optimize="optimal")
        _EXPRESSIONS[key] = expr
    return expr(*operands)


def _residuals(t1, t2, b: _Blocks):
    e = _einsum
    t1t1 = e("ia,jb->ijab", t1, t1)
    tau = t2 + t1t1 - t1t1.transpose(0, 1, 3, 2)
    tau_t = t2 + 0.5 * (t1t1 - t1t1.transpose(0, 1, 3, 2))
    fov, oovv = b.fov, b.oovv

    Fae = (b.fvv - 0.5 * e("me,ma->ae", fov, t1) + e("mf,mafe->ae", t1, b.ovvv)
           - 0.5 * e("mnaf,mnef->ae", tau_t, oovv))
    Fmi = (b.foo + 0.5 * e("ie,me->mi", t1, fov) + e("ne,mnie->mi", t1, b.ooov)
           + 0.5 * e("inef,mnef->mi", tau_t, oovv))
    Fme = fov + e("nf,mnef->me", t1, oovv)

    x = e("je,mnie->mnij", t1, b.ooov)
    Wmnij = b.oooo + x - x.transpose(0, 1, 3, 2) + 0.25 * e("ijef,mnef->mnij", tau, oovv)
    x = e("mb,amef->abef", t1, b.vovv)
    Wabef = b.vvvv - x + x.transpose(1, 0, 2, 3) + 0.25 * e("mnab,mnef->abef", tau, oovv)
    Wmbej = (b.ovvo + e("jf,mbef->mbej", t1, b.ovvv) - e("nb,mnej->mbej", t1, b.oovo)
             - e("jnfb,mnef->mbej", 0.5 * t2 + e("jf,nb->jnfb", t1, t1), oovv))

    r1 = (fov + e("ie,ae->ia", t1, Fae) - e("ma,mi->ia", t1, Fmi) + e("imae,me->ia", t2, Fme)
          - e("nf,naif->ia", t1, b.ovov) - 0.5 * e("imef,maef->ia", t2, b.ovvv)
          - 0.5 * e("mnae,nmei->ia", t2, b.oovo))

    x = e("ijae,be->ijab", t2, Fae - 0.5 * e("mb,me->be", t1, Fme))
    r2 = x - x.transpose(0, 1, 3, 2)
    x = e("imab,mj->ijab", t2, Fmi + 0.5 * e("je,me->mj", t1, Fme))
    r2 -= x - x.transpose(1, 0, 2, 3)
    r2 += 0.5 * e("mnab,mnij->ijab", tau, Wmnij)
    r2 += 0.5 * e("ijef,abef->ijab", tau, Wabef)
    x = e("imae,mbej->ijab", t2, Wmbej)
    x -= e("ie,ma,mbej->ijab", t1, t1, b.ovvo)
    r2 += x - x.transpose(1, 0, 2, 3) - x.transpose(0, 1, 3, 2) + x.transpose(1, 0, 3, 2)
    x = e("ie,abej->ijab", t1, b.vvvo)
    r2 += x - x.transpose(1, 0, 2, 3)
    x = e("ma,mbij->ijab", t1, b.ovoo)
    r2 -= x - x.transpose(0, 1, 3, 2)
    r2 += oovv
    return r1, _antisym(r2)


def ccsd_residuals(state: CCState, ref: CCReference) -> tuple[np.ndarray, np.ndarray]:
    """Projections ``<mu| e^-T H e^T |phi>`` onto singles and doubles."""
    no, nv = len(ref.occ), len(ref.virt)
    if state.t1.shape != (no, nv) or state.t2.shape != (no, no, nv, nv):
        raise ValueError(f"amplitude shapes {state.t1.shape}, {state.t2.shape} do not match "
                         f"{no} occupied / {nv} virtual orbitals")
    return _residuals(state.t1, state.t2, ref.blocks)


def _energy(t1, t2, b: _Blocks) -> complex:
    return (np.einsum("ia,ia->", b.fov, t1)
            + 0.5 * _einsum("ijab,ia,jb->", b.oovv, t1, t1)
            + 0.25 * np.einsum("ijab,ijab->", b.oovv, t2))


def cc_energy(state: CCState, ref: CCReference) -> complex:
    """``<phi| e^-T (H - E_ref) e^T |phi>``."""
    return complex(_energy(state.t1, state.t2, ref.blocks))


def cumulant_rhs(state: CCState, ref: CCReference) -> complex:
    """``dC/dt = i <phi| e^-T (H - E_ref) e^T |phi>``."""
    return 1j * cc_energy(state, ref)


def static_ccsd(si: SpinIntegrals, tol: float = 1e-10, max_iter: int = 500) -> tuple[float, CCState]:
    """Ground-state CCSD correlation energy of the N-electron reference.

    Jacobi updates ``t -= r / D`` accelerated by DIIS.
    """
    occ, virt = si.occupied, si.virtual
    b = _Blocks(si.fock, si.v, occ, virt)
    fo, fv = np.diag(b.foo), np.diag(b.fvv)
    d1 = fv[None, :] - fo[:, None]
    d2 = fv[None, None, :, None] + fv[None, None, None, :] - fo[:, None, None, None] - fo[None, :, None, None]
    t1 = np.zeros_like(b.fov)
    t2 = np.zeros_like(b.oovv)
    hist_x, hist_e = [], []
    for it in range(max_iter):
        r1, r2 = _residuals(t1, t2, b)
        err = max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
        if err < tol:
            energy = float(np.real(_energy(t1, t2, b)))
            return energy, CCState(0.0, t1, t2, 0j)
        x = np.concatenate([(t1 - r1 / d1).ravel(), (t2 - r2 / d2).ravel()])
        hist_x.append(x)
        hist_e.append(np.concatenate([(r1 / d1).ravel(), (r2 / d2).ravel()]))
        hist_x, hist_e = hist_x[-8:], hist_e[-8:]
        if len(hist_x) > 1:
            k = len(hist_x)
            bmat = -np.ones((k + 1, k + 1))
            bmat[-1, -1] = 0
            bmat[:k, :k] = np.array([[ei @ ej for ej in hist_e] for ei in hist_e])
            rhs = np.zeros(k + 1)
            rhs[-1] = -1
            try:
                coef = np.linalg.solve(bmat, rhs)[:k]
                x = sum(c * xi for c, xi in zip(coef, hist_x))
            except np.linalg.LinAlgError:
                pass
        t1 = x[: t1.size].reshape(t1.shape)
        t2 = _antisym(x[t1.size:].reshape(t2.shape))
    raise PropagationError(f"static CCSD did not converge in {max_iter} iterations (residual {err:.2e})")


def _implicit_step(t1, t2, C, dt, ref, d1, d2, integrator, tol, max_inner, anderson=4):
    """One Adams-Moulton step; returns ``None`` if the inner iteration stalls.

    The diagonal of the residual is solved exactly and the remainder by
    fixed-point iteration, which keeps the iteration contractive for the
    stiff, high-frequency core excitations.  The inner loop starts from a
    preconditioned explicit Euler predictor and is accelerated by Anderson
    mixing over the last ``anderson`` iterates.
    """
    b = ref.blocks
    if integrator == "backward_euler":
        theta = 1.0
    elif integrator == "trapezoidal":
        theta = 0.5
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    lhs1 = 1 - 1j * dt * theta * d1
    lhs2 = 1 - 1j * dt * theta * d2
    base1, base2, baseC = t1, t2, C
    r1, r2 = _residuals(t1, t2, b)
    if theta < 1:
        base1 = t1 + 1j * dt * (1 - theta) * r1
        base2 = t2 + 1j * dt * (1 - theta) * r2
        baseC = C + 1j * dt * (1 - theta) * _energy(t1, t2, b)
    n1 = (t1 + 1j * dt * (r1 - d1 * t1)) / (1 - 1j * dt * d1)
    n2 = (t2 + 1j * dt * (r2 - d2 * t2)) / (1 - 1j * dt * d2)
    split = t1.size
    x = np.concatenate([n1.ravel(), n2.ravel()])
    hist_g, hist_f = [], []
    for _ in range(max_inner):
        r1, r2 = _residuals(n1, n2, b)
        new1 = (base1 + 1j * dt * theta * (r1 - d1 * n1)) / lhs1
        new2 = (base2 + 1j * dt * theta * (r2 - d2 * n2)) / lhs2
        g = np.concatenate([new1.ravel(), new2.ravel()])
        f = g - x
        if np.abs(f).max(initial=0.0) < tol:
            n1, n2 = new1, new2
            newC = baseC + 1j * dt * theta * _energy(n1, n2, b)
            return n1, n2, newC
        # Anderson mixing over the last few fixed-point evaluations
        hist_g.append(g)
        hist_f.append(f)
        if len(hist_f) > anderson + 1:
            hist_g.pop(0)
            hist_f.pop(0)
        if len(hist_f) > 1:
            df = np.stack([hist_f[k + 1] - hist_f[k] for k in range(len(hist_f) - 1)], axis=1)
            dg = np.stack([hist_g[k + 1] - hist_g[k] for k in range(len(hist_g) - 1)], axis=1)
            gamma = np.linalg.lstsq(df, f, rcond=None)[0]
            x = g - dg @ gamma
        else:
            x = g
        n1 = x[:split].reshape(t1.shape)
        n2 = x[split:].reshape(t2.shape)
    return None


def propagate(ref: CCReference, dt: float = 0.05, t_max: float = 900.0,
              integrator: str = "trapezoidal", tol: float = 1e-10, max_inner: int = 50,
              max_halvings: int = 4, divergence: float = 1e3,
              resume: CCTrajectory | None = None) -> CCTrajectory:
    """Integrate amplitudes and cumulant from t = 0 (or ``resume``) to ``t_max``.

    ``integrator`` is ``"trapezoidal"`` (the one-step Adams-Moulton rule
    of second order) or ``"backward_euler"`` (its first-order member).  The
    backward Euler step damps a mode of frequency w by ``1/|1 - i w dt|``
    per step, which erases satellites far from the quasiparticle over a
    long run; it is kept for comparison.  A step whose inner iteration fails to reach ``tol``
    in ``max_inner`` sweeps is retried as two half steps, at most
    ``max_halvings`` levels deep.
    """
    if dt <= 0 or t_max < dt:
        raise ValueError("need dt > 0 and t_max >= dt")
    n_steps = int(round(t_max / dt))
    d1, d2 = ref.denominators()

    if resume is None:
        state = ref.zero_state()
        times, cum, n1s, n2s = [0.0], [0j], [0.0], [0.0]
    else:
        if not np.isclose(resume.dt, dt):
            raise ValueError("resume trajectory uses a different time step")
        state = resume.final
        times, cum = list(resume.times), list(resume.cumulant)
        n1s, n2s = list(resume.t1_norm), list(resume.t2_norm)
    start = len(times) - 1
    t1, t2, C = state.t1, state.t2, state.C
    antisym_err = 0.0

    def advance(t1, t2, C, h, depth):
        out = _implicit_step(t1, t2, C, h, ref, d1, d2, integrator, tol, max_inner)
        if out is not None:
            return out
        if depth >= max_halvings:
            raise PropagationError(
                f"inner iteration failed to converge after {max_halvings} step halvings")
        mid = advance(t1, t2, C, h / 2, depth + 1)
        return advance(*mid, h / 2, depth + 1)

    for step in range(start, n_steps):
        t1, t2, C = advance(t1, t2, C, dt, 0)
        norm = float(np.sqrt(np.vdot(t1, t1).real + 0.25 * np.vdot(t2, t2).real))
        if not np.isfinite(norm) or norm > divergence:
            raise PropagationError(f"amplitude norm {norm:.3g} exceeded {divergence:g} at t={(step + 1) * dt:g}")
        times.append((step + 1) * dt)
        cum.append(C)
        n1s.append(float(np.linalg.norm(t1)))
        n2s.append(float(np.linalg.norm(t2)))
        if step % 1000 == 0:
            antisym_err = max(antisym_err, float(np.abs(t2 + t2.transpose(1, 0, 2, 3)).max(initial=0.0)))
    antisym_err = max(antisym_err, float(np.abs(t2 + t2.transpose(1, 0, 2, 3)).max(initial=0.0)),
                      float(np.abs(t2 + t2.transpose(0, 1, 3, 2)).max(initial=0.0)))

    return CCTrajectory(
        times=np.array(times), cumulant=np.array(cum), dt=dt, t_max=n_steps * dt,
        integrator=integrator, t1_norm=np.array(n1s), t2_norm=np.array(n2s),
        final=CCState(n_steps * dt, t1, t2, C), eps_c=ref.eps_c, e_corr=ref.e_corr,
        antisymmetry_error=antisym_err,
    )


def gf_and_spectrum(traj: CCTrajectory, damping: float = 0.1, grid=None,
                    chunk: int = 256) -> SpectralFunction:
    """Spectral function from the time-domain Green's function.

    ``A(w) = -Im int_0^tmax exp(i w t - damping t) G(t) dt / pi`` by the
    trapezoid rule on the trajectory's time grid.  ``damping`` and the grid
    are in eV, with the grid read as binding energies.
    """
    if damping <= 0:
        raise ValueError("damping must be positive")
    if grid is None:
        qp = (traj.eps_c + traj.e_corr) * HARTREE_TO_EV
        grid = (qp - 60.0, qp + 20.0, 0.01)
    grid = make_grid(grid)
    times = traj.times
    g = traj.green_function() * np.exp(-damping / HARTREE_TO_EV * times)
    wts = np.full(len(times), traj.dt)
    wts[0] = wts[-1] = 0.5 * traj.dt
    g = g * wts
    omega = grid / HARTREE_TO_EV
    values = np.empty(len(grid))
    for lo in range(0, len(grid), chunk):
        w = omega[lo: lo + chunk]
        integral = np.exp(1j * np.outer(w, times)) @ g
        values[lo: lo + chunk] = -integral.imag / np.pi / HARTREE_TO_EV
    meta = {"dt_au": traj.dt, "t_max_au": traj.t_max, "integrator": traj.integrator,
            "damping_eV": damping, "e_corr_hartree": traj.e_corr, "eps_c_hartree": traj.eps_c}
    return SpectralFunction(grid, values, damping, 0.0, "lorentzian", None, meta)


def resolved_peaks(sf: SpectralFunction, min_weight: float = 0.0,
                   slack: float = 1.5) -> list[tuple[float, float, float]]:
    """Peaks of a time-domain spectrum with finite-window ripples removed.

    A pole of weight ``w`` seen through ``exp(-theta t)`` on ``[0, T]``
    oscillates around its Lorentzian with amplitude
    ``w exp(-theta T) / (pi |theta - i d|)`` at detuning ``d``.  Maxima are
    visited from the tallest down; one whose prominence does not exceed
    ``slack`` times the peak-to-trough ripple of the peaks already kept is
    dropped.  Returns ``(binding energy eV, height, weight estimate)``
    sorted by energy, the weight being the Lorentzian area
    ``pi theta h / (1 - exp(-theta T))``.
    """
    theta = float(sf.metadata["damping_eV"])
    t_max = float(sf.metadata["t_max_au"]) / HARTREE_TO_EV  # in 1/eV
    fade = np.exp(-theta * t_max)
    idx, props = signal.find_peaks(sf.values, prominence=0.0)
    if len(idx) == 0:
        return []
    refined = dict(zip(idx, find_peaks(sf.grid, sf.values)))
    order = np.argsort(-sf.values[idx])
    kept: list[tuple[float, float, float]] = []
    for k in order:
        pos, height = refined[idx[k]]
        ripple = 0.0
        for cpos, _, cweight in kept:
            ripple += cweight * fade / (np.pi * np.hypot(theta, pos - cpos))
        weight = np.pi * theta * height / (1 - fade)
        if props["prominences"][k] > slack * 2 * ripple and weight >= min_weight:
            kept.append((pos, height, weight))
    return sorted(kept)


def save_checkpoint(traj: CCTrajectory, path: str | Path) -> None:
    """Binary checkpoint (numpy ``.npz``) with a versioned header."""
    np.savez(
        path, header=np.array(f"corespec-rtcc v{CHECKPOINT_VERSION}"),
        version=CHECKPOINT_VERSION, times=traj.times, cumulant=traj.cumulant,
        dt=traj.dt, t_max=traj.t_max, integrator=np.array(traj.integrator),
        t1_norm=traj.t1_norm, t2_norm=traj.t2_norm, t1=traj.final.t1, t2=traj.final.t2,
        C=traj.final.C, eps_c=traj.eps_c, e_corr=traj.e_corr,
    )


def load_checkpoint(path: str | Path) -> CCTrajectory:
    with np.load(path, allow_pickle=False) as data:
        if int(data["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
        times = data["times"]
        return CCTrajectory(
            times=times, cumulant=data["cumulant"], dt=float(data["dt"]),
            t_max=float(data["t_max"]), integrator=str(data["integrator"]),
            t1_norm=data["t1_norm"], t2_norm=data["t2_norm"],
            final=CCState(float(times[-1]), data["t1"], data["t2"], complex(data["C"])),
            eps_c=float(data["eps_c"]), e_corr=float(data["e_corr"]),
        )
