"""Sector Hamiltonians, exact diagonalization and Lanczos recursions."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from corespec.fock_space import CISpace, Determinant, popcount
from corespec.integrals import SpinIntegrals

__all__ = [
    "CapacityError",
    "ConvergenceError",
    "SectorHamiltonian",
    "EigenSolution",
    "LanczosTridiagonal",
    "build_hamiltonian",
    "solve_dense",
    "solve_ground_lanczos",
    "lanczos_from_vector",
    "ritz_poles",
    "correlation_energy",
]

log = logging.getLogger(__name__)

DENSE_CAP = 20000
ASSEMBLY_CAP = 2_000_000


class CapacityError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_estimate: float):
        super().__init__(f"{message} (best estimate {best_estimate:.12g})")
        self.best_estimate = best_estimate


@dataclass(frozen=True, eq=False)
class SectorHamiltonian:
    space: CISpace
    matrix: sp.csr_matrix
    e_nuc_included: bool = True

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(frozen=True, eq=False)
class EigenSolution:
    energies: np.ndarray
    vectors: np.ndarray | None = None
    weights: np.ndarray | None = None
    space: CISpace | None = None
    trial_label: str | None = None

    def ground_vector(self) -> np.ndarray:
        if self.vectors is None:
            raise ValueError("eigenvectors were not kept")
        return self.vectors[:, 0]


@dataclass(frozen=True)
class LanczosTridiagonal:
    """Lanczos recursion coefficients for ``H`` and a start vector.

    ``betas[k]`` couples Lanczos vectors ``k`` and ``k + 1``, so there is one
    fewer beta than alpha.
    """

    alphas: np.ndarray
    betas: np.ndarray
    start_norm: float
    iterations: int
    terminated: bool = False

    def matrix(self) -> np.ndarray:
        return np.diag(self.alphas) + np.diag(self.betas, 1) + np.diag(self.betas, -1)


def _bit_below(dets: np.ndarray, p: int) -> np.ndarray:
    return popcount(dets & np.uint64((1 << p) - 1))


def _sign_after(dets: np.ndarray, ops) -> tuple[np.ndarray, np.ndarray]:
    """Apply ladder operators (rightmost first) to occupied/empty-checked dets."""
    parity = np.zeros(len(dets), dtype=np.int64)
    cur = dets.copy()
    for p in ops:
        parity += _bit_below(cur, p)
        cur ^= np.uint64(1 << p)
    return cur, np.where(parity & 1, -1.0, 1.0)


def build_hamiltonian(si: SpinIntegrals, space: CISpace, cap: int = ASSEMBLY_CAP,
                      cache_dir: str | Path | None = None,
                      cache_key: str | None = None) -> SectorHamiltonian:
    """Assemble the sector Hamiltonian from Slater-Condon rules.

    Each unordered pair of connected determinants is generated once and
    mirrored, so the matrix is exactly symmetric.  ``e_nuc`` sits on the
    diagonal.
    """
    if len(space) == 0:
        raise ValueError("empty CI space")
    if space.m != si.m:
        raise ValueError(f"space has {space.m} spin-orbitals, integrals have {si.m}")
    if len(space) > cap:
        raise CapacityError(f"dimension {len(space)} exceeds assembly cap {cap}")

    cache_file = None
    if cache_dir is not None:
        tag = f"{cache_key}|{space.m}|{space.n_alpha}|{space.n_beta}|{space.reference}|{space.truncation_rank}"
        cache_file = Path(cache_dir) / f"ham_{hashlib.sha256(tag.encode()).hexdigest()[:24]}.npz"
        if cache_file.exists():
            return SectorHamiltonian(space, sp.load_npz(cache_file).tocsr())

    m = si.m
    dets = space.dets
    occ = space.occupation_matrix().astype(float)
    n = len(dets)
    h, v = si.h, si.v

    coulomb = np.einsum("ijij->ij", v)
    diag = occ @ np.diag(h) + 0.5 * np.einsum("ni,ij,nj->n", occ, coulomb, occ) + si.e_nuc

    rows, cols, vals = [], [], []
    spin = np.arange(m) % 2

    def _emit(src_mask, ops, elem):
        src = np.nonzero(src_mask)[0]
        if len(src) == 0:
            return
        tgt, sign = _sign_after(dets[src], ops)
        pos = space.positions(tgt)
        keep = pos >= 0
        value = sign[keep] * (elem[src[keep]] if isinstance(elem, np.ndarray) else elem)
        nz = value != 0
        rows.append(pos[keep][nz])
        cols.append(src[keep][nz])
        vals.append(value[nz])

    # singles a_p^+ a_q with p > q (target > source)
    for q in range(m):
        has_q = (dets >> np.uint64(q)) & np.uint64(1) == 1
        for p in range(q + 1, m):
            if spin[p] != spin[q]:
                continue
            mask = has_q & ((dets >> np.uint64(p)) & np.uint64(1) == 0)
            if not mask.any():
                continue
            elem = h[p, q] + occ @ np.diagonal(v[p, :, q, :])
            _emit(mask, (q, p), elem)

    # doubles a_p^+ a_q^+ a_s a_r, p < q, r < s, max(p, q) > max(r, s)
    bit = [(dets >> np.uint64(k)) & np.uint64(1) == 1 for k in range(m)]
    for r, s in combinations(range(m), 2):
        has_rs = bit[r] & bit[s]
        if not has_rs.any():
            continue
        for p, q in combinations(range(m), 2):
            if q <= s or p in (r, s) or q in (r, s):
                continue
            if sorted((spin[p], spin[q])) != sorted((spin[r], spin[s])):
                continue
            if v[p, q, r, s] == 0:
                continue
            mask = has_rs & ~bit[p] & ~bit[q]
            if mask.any():
                _emit(mask, (r, s, q, p), v[p, q, r, s])

    if rows:
        r_all = np.concatenate(rows)
        c_all = np.concatenate(cols)
        v_all = np.concatenate(vals)
    else:
        r_all = c_all = np.zeros(0, dtype=np.int64)
        v_all = np.zeros(0)
    upper = sp.coo_matrix((v_all, (r_all, c_all)), shape=(n, n)).tocsr()
    mat = (upper + upper.T + sp.diags(diag)).tocsr()
    mat.eliminate_zeros()
    mat.sort_indices()
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        sp.save_npz(cache_file, mat)
    return SectorHamiltonian(space, mat)


def solve_dense(ham: SectorHamiltonian, cap: int = DENSE_CAP) -> EigenSolution:
    """Full spectrum and eigenvectors by dense diagonalization."""
    if ham.dim > cap:
        raise CapacityError(
            f"dimension {ham.dim} exceeds dense cap {cap}; use lanczos_from_vector "
            "or solve_ground_lanczos instead")
    dense = ham.matrix.toarray()
    energies, vectors = np.linalg.eigh(dense)
    scale = max(np.abs(energies).max(), 1.0)
    resid = np.linalg.norm(dense @ vectors - vectors * energies, axis=0)
    if resid.max() > 1e-8 * scale:
        raise ConvergenceError("dense eigensolver residual too large", float(energies[0]))
    return EigenSolution(energies=energies, vectors=vectors, space=ham.space)


def _lanczos(matvec, start: np.ndarray, iterations: int, breakdown_tol: float,
             keep_basis: bool = False):
    norm0 = float(np.linalg.norm(start))
    if norm0 == 0:
        raise ValueError("start vector has zero norm")
    n = len(start)
    iterations = min(iterations, n)
    basis = np.zeros((iterations, n), dtype=start.dtype)
    basis[0] = start / norm0
    alphas, betas = [], []
    terminated = False
    for j in range(iterations):
        w = matvec(basis[j])
        alpha = float(np.real(np.vdot(basis[j], w)))
        alphas.append(alpha)
        scale = max(1.0, float(np.linalg.norm(w)))
        # twice is enough (Kahan-Parlett)
        for _ in range(2):
            w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta = float(np.linalg.norm(w))
        if beta < breakdown_tol * scale:
            terminated = True
            break
        if j + 1 == iterations:
            break
        betas.append(beta)
        basis[j + 1] = w / beta
    k = len(alphas)
    tri = LanczosTridiagonal(np.array(alphas), np.array(betas[: k - 1]), norm0, k,
                             terminated or k == n)
    return tri, (basis[:k] if keep_basis else None)


def lanczos_from_vector(ham: SectorHamiltonian, start: np.ndarray, iterations: int,
                        breakdown_tol: float = 1e-14) -> LanczosTridiagonal:
    """Lanczos recursion with full reorthogonalization.

    Stops early when the next beta falls below ``breakdown_tol`` times
    ``max(1, |H q_j|)``: the Krylov space is then invariant.
    """
    start = np.asarray(start, dtype=float)
    if start.shape != (ham.dim,):
        raise ValueError(f"start vector has shape {start.shape}, expected ({ham.dim},)")
    tri, _ = _lanczos(ham.matrix.dot, start, iterations, breakdown_tol)
    return tri


def ritz_poles(tri: LanczosTridiagonal) -> tuple[np.ndarray, np.ndarray]:
    """Ritz values and their weights ``|start|^2 |u_0|^2``."""
    values, vecs = np.linalg.eigh(tri.matrix())
    return values, tri.start_norm ** 2 * vecs[0] ** 2


def solve_ground_lanczos(ham: SectorHamiltonian, tol: float = 1e-10, max_iter: int = 500,
                         seed: int = 0, start: np.ndarray | None = None) -> EigenSolution:
    """Lowest eigenpair by Lanczos with full reorthogonalization.

    Converged when the Ritz residual norm ``beta_k |u_k[-1]|`` drops below
    ``tol``; the start vector is random (``seed``) unless given.
    """
    n = ham.dim
    if start is None:
        start = np.random.default_rng(seed).standard_normal(n)
    start = np.asarray(start, dtype=float)
    max_iter = min(max_iter, n)

    matvec = ham.matrix.dot
    norm0 = np.linalg.norm(start)
    basis = np.zeros((max_iter, n))
    basis[0] = start / norm0
    alphas: list[float] = []
    betas: list[float] = []
    best = np.inf
    for j in range(max_iter):
        w = matvec(basis[j])
        alphas.append(float(basis[j] @ w))
        scale = max(1.0, float(np.linalg.norm(w)))
        for _ in range(2):
            w = w - basis[: j + 1].T @ (basis[: j + 1] @ w)
        beta = float(np.linalg.norm(w))
        k = len(alphas)
        t = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        theta, u = np.linalg.eigh(t)
        best = float(theta[0])
        exhausted = beta < 1e-14 * scale or k == n
        if exhausted or beta * abs(u[-1, 0]) < tol:
            vec = basis[:k].T @ u[:, 0]
            vec /= np.linalg.norm(vec)
            return EigenSolution(energies=np.array([best]), vectors=vec[:, None],
                                 space=ham.space)
        if j + 1 < max_iter:
            betas.append(beta)
            basis[j + 1] = w / beta
    raise ConvergenceError(f"Lanczos did not converge in {max_iter} iterations", best)


def ground_state(ham: SectorHamiltonian, dense_limit: int = 3000, **lanczos_kw) -> EigenSolution:
    """Ground state by dense solve for small spaces, Lanczos otherwise."""
    if ham.dim <= dense_limit:
        sol = solve_dense(ham)
        return EigenSolution(sol.energies[:1], sol.vectors[:, :1], space=ham.space)
    return solve_ground_lanczos(ham, **lanczos_kw)


def correlation_energy(ham: SectorHamiltonian, reference: Determinant | int,
                       ground: EigenSolution | None = None) -> float:
    """``E_0 - <Phi_0|H|Phi_0>`` for the N-electron sector."""
    occ = reference.occ if isinstance(reference, Determinant) else int(reference)
    if occ not in ham.space.index:
        raise ValueError("reference determinant is not in the space")
    ref_energy = ham.matrix[ham.space.index[occ], ham.space.index[occ]]
    if ground is None:
        ground = ground_state(ham)
    return float(ground.energies[0] - ref_energy)
