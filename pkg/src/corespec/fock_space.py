"""Occupation-number strings, signed ladder operators and CI spaces.

A determinant is an integer whose bit ``p`` is the occupation of
spin-orbital ``p`` (0-based).  The ket ``|n_M ... n_1>`` is the binary
rendering of that integer, most significant orbital first.  Ladder
operators carry the phase ``(-1)**(number of occupied orbitals below p)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MAX_SPIN_ORBITALS",
    "Determinant",
    "SignedDeterminant",
    "CISpace",
    "FermionOperator",
    "SparseOperatorMatrix",
    "apply_create",
    "apply_annihilate",
    "enumerate_space",
    "excitation_rank",
    "operator_matrix",
    "popcount",
]

MAX_SPIN_ORBITALS = 64

_ALPHA_MASK = int("01" * 32, 2)


def popcount(x) -> np.ndarray | int:
    if isinstance(x, (int, np.integer)):
        return int(x).bit_count()
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


@dataclass(frozen=True, order=True)
class Determinant:
    occ: int
    m: int

    def __post_init__(self):
        if not 0 < self.m <= MAX_SPIN_ORBITALS:
            raise ValueError(f"spin-orbital count must be in 1..{MAX_SPIN_ORBITALS}")
        if self.occ < 0 or self.occ >> self.m:
            raise ValueError("occupation has bits beyond m")

    @classmethod
    def from_occupied(cls, occupied: Iterable[int], m: int) -> "Determinant":
        bits = 0
        for p in occupied:
            bits |= 1 << p
        return cls(bits, m)

    @property
    def n_alpha(self) -> int:
        return (self.occ & _ALPHA_MASK).bit_count()

    @property
    def n_beta(self) -> int:
        return (self.occ & (_ALPHA_MASK << 1)).bit_count()

    @property
    def n_elec(self) -> int:
        return self.occ.bit_count()

    def occupied(self) -> list[int]:
        return [p for p in range(self.m) if self.occ >> p & 1]

    def ket(self) -> str:
        return f"|{self.occ:0{self.m}b}>"

    def __str__(self) -> str:
        return self.ket()


@dataclass(frozen=True)
class SignedDeterminant:
    det: Determinant
    sign: int


def _check_index(d: Determinant, i: int):
    if not 0 <= i < d.m:
        raise IndexError(f"spin-orbital {i} outside 0..{d.m - 1}")


def _phase(occ: int, i: int) -> int:
    return -1 if (occ & ((1 << i) - 1)).bit_count() & 1 else 1


def apply_create(d: Determinant, i: int) -> SignedDeterminant | None:
    """``a_i^+ |d>``; ``None`` stands for the zero vector."""
    _check_index(d, i)
    if d.occ >> i & 1:
        return None
    return SignedDeterminant(Determinant(d.occ | 1 << i, d.m), _phase(d.occ, i))


def apply_annihilate(d: Determinant, i: int) -> SignedDeterminant | None:
    """``a_i |d>``; ``None`` stands for the zero vector."""
    _check_index(d, i)
    if not d.occ >> i & 1:
        return None
    return SignedDeterminant(Determinant(d.occ & ~(1 << i), d.m), _phase(d.occ, i))


def excitation_rank(occ, reference: int):
    """Number of reference spin-orbitals left empty (holes) in ``occ``."""
    if isinstance(occ, (int, np.integer)):
        return (reference & ~int(occ)).bit_count()
    occ = np.asarray(occ, dtype=np.uint64)
    return popcount(np.uint64(reference) & ~occ)


@dataclass(frozen=True, eq=False)
class CISpace:
    """Ordered determinant basis of one ``(n_alpha, n_beta)`` sector.

    ``dets`` is sorted by integer value; ``index`` is its inverse.
    """

    m: int
    n_alpha: int
    n_beta: int
    dets: np.ndarray
    reference: int | None = None
    truncation_rank: int | None = None
    index: Mapping[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.dets.setflags(write=False)
        object.__setattr__(self, "index", {int(d): k for k, d in enumerate(self.dets)})

    def __len__(self) -> int:
        return len(self.dets)

    def __iter__(self):
        return (Determinant(int(d), self.m) for d in self.dets)

    def __getitem__(self, k: int) -> Determinant:
        return Determinant(int(self.dets[k]), self.m)

    @property
    def n_elec(self) -> int:
        return self.n_alpha + self.n_beta

    def position(self, det: Determinant | int) -> int:
        key = det.occ if isinstance(det, Determinant) else int(det)
        return self.index[key]

    def positions(self, occs: np.ndarray) -> np.ndarray:
        """Vectorized lookup; -1 where a determinant is not in the space."""
        occs = np.asarray(occs, dtype=np.uint64)
        if len(self.dets) == 0:
            return np.full(occs.shape, -1, dtype=np.int64)
        pos = np.minimum(np.searchsorted(self.dets, occs), len(self.dets) - 1)
        return np.where(self.dets[pos] == occs, pos, -1)

    def occupation_matrix(self) -> np.ndarray:
        """Boolean ``(len, m)`` array of occupations."""
        bits = np.arange(self.m, dtype=np.uint64)
        return ((self.dets[:, None] >> bits[None, :]) & np.uint64(1)).astype(bool)

    def same_sector(self, other: "CISpace") -> bool:
        return (self.m, self.n_alpha, self.n_beta) == (other.m, other.n_alpha, other.n_beta)


def _spin_strings(n_orb: int, n: int) -> list[int]:
    out = []
    for occ in combinations(range(n_orb), n):
        bits = 0
        for k in occ:
            bits |= 1 << k
        out.append(bits)
    return out


def _interleave(bits: np.ndarray, n_orb: int, shift: int) -> np.ndarray:
    out = np.zeros(len(bits), dtype=np.uint64)
    for k in range(n_orb):
        out |= ((bits >> np.uint64(k)) & np.uint64(1)) << np.uint64(2 * k + shift)
    return out


def enumerate_space(m: int, n_alpha: int, n_beta: int,
                    reference: Determinant | int | None = None,
                    rank: int | None = None) -> CISpace:
    """All determinants of a sector, optionally truncated by excitation rank.

    The rank of a determinant is the number of holes it has relative to
    ``reference`` (the N-electron reference, also for ionized sectors).
    """
    if m % 2 or not 0 < m <= MAX_SPIN_ORBITALS:
        raise ValueError("m must be even and at most 64")
    n_orb = m // 2
    if rank is not None and reference is None:
        raise ValueError("a truncation rank needs a reference determinant")
    ref = reference.occ if isinstance(reference, Determinant) else reference
    if n_alpha < 0 or n_beta < 0 or n_alpha > n_orb or n_beta > n_orb:
        return CISpace(m, n_alpha, n_beta, np.zeros(0, dtype=np.uint64), ref, rank)
    if rank is not None and ref is not None:
        n_ref = ref.bit_count()
        if n_alpha + n_beta < n_ref and rank < 1:
            raise ValueError("ionized sectors need truncation rank >= 1")
        if rank < 0:
            raise ValueError("truncation rank must be non-negative")

    a = _interleave(np.array(_spin_strings(n_orb, n_alpha), dtype=np.uint64), n_orb, 0)
    b = _interleave(np.array(_spin_strings(n_orb, n_beta), dtype=np.uint64), n_orb, 1)
    dets = (a[:, None] | b[None, :]).ravel()
    if rank is not None:
        dets = dets[excitation_rank(dets, ref) <= rank]
    dets = np.sort(dets)
    return CISpace(m, n_alpha, n_beta, dets, ref, rank)


class FermionOperator:
    """Linear combination of products of ladder operators.

    Each term is a tuple of ``(p, dagger)`` factors written left to right, so
    ``((3, True), (1, False))`` is ``a_3^+ a_1``.

    >>> n0 = FermionOperator.create(0) * FermionOperator.annihilate(0)
    >>> len((n0 + 2.0 * n0).terms)
    1
    """

    def __init__(self, terms: Mapping[tuple, float] | None = None):
        self.terms: dict[tuple, float] = {}
        for key, coef in (terms or {}).items():
            if coef != 0:
                self.terms[tuple(key)] = self.terms.get(tuple(key), 0.0) + coef

    @classmethod
    def create(cls, p: int) -> "FermionOperator":
        return cls({((p, True),): 1.0})

    @classmethod
    def annihilate(cls, p: int) -> "FermionOperator":
        return cls({((p, False),): 1.0})

    @classmethod
    def identity(cls, coef: float = 1.0) -> "FermionOperator":
        return cls({(): coef})

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        out = dict(self.terms)
        for key, coef in other.terms.items():
            out[key] = out.get(key, 0.0) + coef
        return FermionOperator({k: c for k, c in out.items() if c != 0})

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, FermionOperator):
            out: dict[tuple, float] = {}
            for k1, c1 in self.terms.items():
                for k2, c2 in other.terms.items():
                    out[k1 + k2] = out.get(k1 + k2, 0.0) + c1 * c2
            return FermionOperator(out)
        return FermionOperator({k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def particle_change(self) -> int:
        changes = {sum(1 if dag else -1 for _, dag in key) for key in self.terms}
        if len(changes) > 1:
            raise ValueError("operator mixes particle-number changes")
        return changes.pop() if changes else 0

    def spin_change(self) -> tuple[int, int]:
        changes = {
            (sum((1 if dag else -1) for p, dag in key if p % 2 == 0),
             sum((1 if dag else -1) for p, dag in key if p % 2 == 1))
            for key in self.terms
        }
        if len(changes) > 1:
            raise ValueError("operator mixes spin-sector changes")
        return changes.pop() if changes else (0, 0)

    def __repr__(self) -> str:
        parts = []
        for key, coef in self.terms.items():
            ops = " ".join(f"a{p}{'^' if dag else ''}" for p, dag in key)
            parts.append(f"{coef:+g} {ops}".rstrip())
        return "FermionOperator(" + " ".join(parts) + ")"


@dataclass(frozen=True, eq=False)
class SparseOperatorMatrix:
    rows: CISpace
    cols: CISpace
    matrix: sp.csr_matrix


def _apply_string(occ: int, key: tuple) -> tuple[int, int] | None:
    sign = 1
    for p, dag in reversed(key):
        bit = occ >> p & 1
        if dag == bool(bit):
            return None
        if (occ & ((1 << p) - 1)).bit_count() & 1:
            sign = -sign
        occ ^= 1 << p
    return occ, sign


def operator_matrix(op: FermionOperator, domain: CISpace,
                    codomain: CISpace) -> SparseOperatorMatrix:
    """Matrix of ``op`` from ``domain`` to ``codomain`` by string action."""
    da, db = op.spin_change()
    if (codomain.n_alpha - domain.n_alpha, codomain.n_beta - domain.n_beta) != (da, db):
        raise ValueError(
            f"operator changes (n_alpha, n_beta) by {(da, db)}, but codomain sector "
            f"differs from domain by {(codomain.n_alpha - domain.n_alpha, codomain.n_beta - domain.n_beta)}")
    for key in op.terms:
        for p, _ in key:
            if not 0 <= p < domain.m:
                raise IndexError(f"spin-orbital {p} outside 0..{domain.m - 1}")
    acc: dict[tuple[int, int], float] = {}
    for col, occ in enumerate(domain.dets):
        occ = int(occ)
        for key, coef in op.terms.items():
            res = _apply_string(occ, key)
            if res is None:
                continue
            row = codomain.index.get(res[0])
            if row is None:
                continue
            acc[row, col] = acc.get((row, col), 0.0) + coef * res[1]
    entries = {k: val for k, val in acc.items() if val != 0}
    if entries:
        r, c = np.array(list(entries)).T
        data = np.array(list(entries.values()))
    else:
        r = c = np.zeros(0, dtype=int)
        data = np.zeros(0)
    mat = sp.csr_matrix((data, (r, c)), shape=(len(codomain), len(domain)))
    return SparseOperatorMatrix(codomain, domain, mat)


def hamiltonian_operator(h: np.ndarray, v: np.ndarray, tol: float = 0.0) -> FermionOperator:
    """``sum h_pq a_p^+ a_q + 1/4 sum <pq||rs> a_p^+ a_q^+ a_s a_r``."""
    terms: dict[tuple, float] = {}
    m = h.shape[0]
    for p in range(m):
        for q in range(m):
            if abs(h[p, q]) > tol:
                terms[((p, True), (q, False))] = h[p, q]
    for p, q, r, s in zip(*np.nonzero(np.abs(v) > tol)):
        key = ((int(p), True), (int(q), True), (int(s), False), (int(r), False))
        terms[key] = terms.get(key, 0.0) + 0.25 * v[p, q, r, s]
    return FermionOperator(terms)
