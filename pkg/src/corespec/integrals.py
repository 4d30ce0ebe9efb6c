"""FCIDUMP ingestion and spin-orbital integral tensors.

Spin-orbital ``p`` (0-based) is spatial orbital ``p // 2`` with spin
``p % 2`` (0 = alpha, 1 = beta), i.e. alpha and beta alternate.  Bit ``p``
of a determinant's occupation integer stores that orbital's occupation.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

__all__ = [
    "FCIDumpError",
    "FCIDumpRangeError",
    "FCIDumpConsistencyError",
    "IntegralStore",
    "SpinIntegrals",
    "FockNMinus1",
    "parse_fcidump",
    "read_fcidump",
    "write_fcidump",
    "to_spin_integrals",
    "fock_n_minus_1",
]

_CONFLICT_TOL = 1e-10


class FCIDumpError(ValueError):
    """Malformed FCIDUMP input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FCIDumpRangeError(FCIDumpError):
    pass


class FCIDumpConsistencyError(FCIDumpError):
    pass


@dataclass(frozen=True)
class IntegralStore:
    """Spatial-orbital integrals as stored in an FCIDUMP file.

    ``g_spatial`` is in chemists' notation, ``g[i, j, k, l] = (ij|kl)``, fully
    expanded over its 8 permutational partners.
    """

    n_orb: int
    n_elec: int
    ms2: int
    e_nuc: float
    h_spatial: np.ndarray
    g_spatial: np.ndarray
    orbsym: tuple[int, ...] = ()
    isym: int = 1

    def __post_init__(self):
        if self.n_orb < 1 or self.n_elec < 1:
            raise ValueError("n_orb and n_elec must be positive")
        for arr in (self.h_spatial, self.g_spatial):
            arr.setflags(write=False)

    @property
    def n_alpha(self) -> int:
        return (self.n_elec + self.ms2) // 2

    @property
    def n_beta(self) -> int:
        return (self.n_elec - self.ms2) // 2


@dataclass(frozen=True)
class SpinIntegrals:
    """Spin-orbital Hamiltonian over ``m = 2 * n_orb`` spin orbitals.

    ``v[p, q, r, s]`` is the antisymmetrized integral <pq||rs>.  ``eps`` holds
    reference orbital energies, the diagonal of ``fock``.
    """

    m: int
    h: np.ndarray
    v: np.ndarray
    eps: np.ndarray
    fock: np.ndarray
    reference_occupation: int
    n_alpha: int
    n_beta: int
    e_nuc: float = 0.0

    def __post_init__(self):
        for arr in (self.h, self.v, self.eps, self.fock):
            arr.setflags(write=False)

    @property
    def n_elec(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def occupied(self) -> list[int]:
        return [p for p in range(self.m) if self.reference_occupation >> p & 1]

    @property
    def virtual(self) -> list[int]:
        return [p for p in range(self.m) if not self.reference_occupation >> p & 1]

    def reference_energy(self) -> float:
        """<Phi_0|H|Phi_0> including the nuclear repulsion."""
        occ = self.occupied
        e1 = self.h[occ, occ].sum()
        e2 = 0.5 * self.v[np.ix_(occ, occ, occ, occ)].trace(axis1=0, axis2=2).trace()
        return float(e1 + e2 + self.e_nuc)


@dataclass(frozen=True)
class FockNMinus1:
    f: np.ndarray
    core_index: int

    def __post_init__(self):
        self.f.setflags(write=False)


_HEADER_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _parse_header(text: str, first_line: int) -> dict[str, list[str]]:
    body = re.sub(r"^\s*&\s*FCI", "", text, flags=re.IGNORECASE)
    body = re.sub(r"(&\s*END|/)\s*$", "", body.strip(), flags=re.IGNORECASE)
    keys = list(_HEADER_KEY.finditer(body))
    if not keys:
        raise FCIDumpError("empty namelist header", first_line)
    values: dict[str, list[str]] = {}
    for k, match in enumerate(keys):
        end = keys[k + 1].start() if k + 1 < len(keys) else len(body)
        raw = body[match.end():end]
        values[match.group(1).upper()] = [x for x in re.split(r"[,\s]+", raw) if x]
    return values


def _header_int(values: dict[str, list[str]], key: str, line: int, default=None) -> int:
    if key not in values:
        if default is None:
            raise FCIDumpError(f"header is missing {key}", line)
        return default
    try:
        return int(values[key][0])
    except (IndexError, ValueError):
        raise FCIDumpError(f"header value for {key} is not an integer", line) from None


def _to_float(token: str) -> float:
    return float(token.replace("D", "E").replace("d", "e"))


def parse_fcidump(stream: TextIO | Iterable[str]) -> IntegralStore:
    """Parse FCIDUMP text into an :class:`IntegralStore`.

    Records are ``value i j k l`` with 1-based indices.  ``i j 0 0`` is a
    one-electron element, ``0 0 0 0`` the core energy, and ``i 0 0 0``
    (orbital energies written by some programs) is ignored.
    """
    lines = list(stream)
    header_lines: list[str] = []
    body_start = None
    for n, line in enumerate(lines):
        header_lines.append(line)
        stripped = line.strip()
        if re.search(r"&\s*END\s*$", stripped, re.IGNORECASE) or stripped.endswith("/"):
            body_start = n + 1
            break
    if body_start is None or not header_lines[0].lstrip().upper().startswith("&FCI"):
        raise FCIDumpError("missing &FCI ... &END namelist header", 1)
    values = _parse_header(" ".join(header_lines), 1)
    n_orb = _header_int(values, "NORB", 1)
    n_elec = _header_int(values, "NELEC", 1)
    ms2 = _header_int(values, "MS2", 1, default=0)
    isym = _header_int(values, "ISYM", 1, default=1)
    try:
        orbsym = tuple(int(x) for x in values.get("ORBSYM", []))
    except ValueError:
        raise FCIDumpError("ORBSYM entries must be integers", 1) from None
    if n_orb < 1 or n_elec < 1:
        raise FCIDumpError("NORB and NELEC must be positive", 1)

    h = np.zeros((n_orb, n_orb))
    g = np.zeros((n_orb, n_orb, n_orb, n_orb))
    h_set = np.zeros(h.shape, dtype=bool)
    g_set = np.zeros(g.shape, dtype=bool)
    e_nuc = 0.0
    e_nuc_set = False

    for n, line in enumerate(lines[body_start:], start=body_start + 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise FCIDumpError(f"expected 5 columns, found {len(tokens)}", n)
        try:
            value = _to_float(tokens[0])
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise FCIDumpError(f"cannot parse record {line.strip()!r}", n) from None
        if any(x < 0 or x > n_orb for x in (i, j, k, l)):
            raise FCIDumpRangeError(f"index out of range 1..{n_orb}", n)
        if i == j == k == l == 0:
            if e_nuc_set and abs(e_nuc - value) > _CONFLICT_TOL:
                raise FCIDumpConsistencyError("conflicting core energy", n)
            e_nuc, e_nuc_set = value, True
        elif k == 0 and l == 0:
            if j == 0:
                continue
            if i == 0:
                raise FCIDumpRangeError("one-electron record with zero index", n)
            for a, b in ((i - 1, j - 1), (j - 1, i - 1)):
                if h_set[a, b] and abs(h[a, b] - value) > _CONFLICT_TOL:
                    raise FCIDumpConsistencyError(
                        f"conflicting one-electron entry ({i},{j})", n)
                h[a, b] = value
                h_set[a, b] = True
        else:
            if 0 in (i, j, k, l):
                raise FCIDumpRangeError("two-electron record with zero index", n)
            i, j, k, l = i - 1, j - 1, k - 1, l - 1
            for idx in {(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)}:
                if g_set[idx] and abs(g[idx] - value) > _CONFLICT_TOL:
                    raise FCIDumpConsistencyError(
                        "conflicting two-electron entry "
                        f"({i + 1}{j + 1}|{k + 1}{l + 1})", n)
                g[idx] = value
                g_set[idx] = True

    return IntegralStore(n_orb=n_orb, n_elec=n_elec, ms2=ms2, e_nuc=e_nuc,
                         h_spatial=h, g_spatial=g, orbsym=orbsym, isym=isym)


def read_fcidump(path: str | Path) -> IntegralStore:
    with open(path) as fh:
        return parse_fcidump(fh)


def write_fcidump(store: IntegralStore, stream: TextIO | None = None,
                  tol: float = 0.0) -> str:
    """Serialize ``store`` to FCIDUMP text; returns the text as well."""
    n = store.n_orb
    out = io.StringIO()
    orbsym = store.orbsym or (1,) * n
    out.write(f" &FCI NORB={n},NELEC={store.n_elec},MS2={store.ms2},\n")
    out.write("  ORBSYM=" + ",".join(str(x) for x in orbsym) + ",\n")
    out.write(f"  ISYM={store.isym},\n &END\n")
    g = store.g_spatial
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    if abs(g[i, j, k, l]) > tol:
                        out.write(f"{float(g[i, j, k, l])!r} {i + 1} {j + 1} {k + 1} {l + 1}\n")
    h = store.h_spatial
    for i in range(n):
        for j in range(i + 1):
            if abs(h[i, j]) > tol:
                out.write(f"{float(h[i, j])!r} {i + 1} {j + 1} 0 0\n")
    out.write(f"{float(store.e_nuc)!r} 0 0 0 0\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def _reference_bits(n_orb: int, n_alpha: int, n_beta: int) -> int:
    bits = 0
    for k in range(n_alpha):
        bits |= 1 << (2 * k)
    for k in range(n_beta):
        bits |= 1 << (2 * k + 1)
    return bits


def to_spin_integrals(store: IntegralStore) -> SpinIntegrals:
    """Expand spatial integrals to antisymmetrized spin-orbital tensors.

    The reference determinant is the aufbau filling of the lowest spatial
    orbitals with ``n_alpha`` alpha and ``n_beta`` beta electrons.
    """
    n = store.n_orb
    m = 2 * n
    n_alpha, n_beta = store.n_alpha, store.n_beta
    if store.n_elec > m or n_alpha > n or n_beta > n or n_alpha < 0 or n_beta < 0:
        raise ValueError(
            f"{store.n_elec} electrons (ms2={store.ms2}) do not fit in {n} orbitals")

    spatial = np.arange(m) // 2
    spin = np.arange(m) % 2
    same = (spin[:, None] == spin[None, :]).astype(float)

    h = store.h_spatial[np.ix_(spatial, spatial)] * same
    # <pq|rs> = (pr|qs) delta(sp, sr) delta(sq, ss)
    g = store.g_spatial[np.ix_(spatial, spatial, spatial, spatial)]
    pqrs = g.transpose(0, 2, 1, 3) * same[:, None, :, None] * same[None, :, None, :]
    v = pqrs - pqrs.transpose(0, 1, 3, 2)

    ref = _reference_bits(n, n_alpha, n_beta)
    occ = [p for p in range(m) if ref >> p & 1]
    fock = h + np.einsum("piqi->pq", v[:, occ][:, :, :, occ])
    eps = np.diag(fock).copy()
    return SpinIntegrals(m=m, h=h, v=v, eps=eps, fock=fock,
                         reference_occupation=ref, n_alpha=n_alpha,
                         n_beta=n_beta, e_nuc=store.e_nuc)


def fock_n_minus_1(si: SpinIntegrals, c: int, canonical: bool = False) -> FockNMinus1:
    """Fock operator of the reference with spin-orbital ``c`` emptied.

    ``f_pq = F_pq - <pc||qc>`` with ``F`` the N-electron Fock matrix.  For
    canonical Hartree-Fock orbitals ``F = diag(eps)``; ``canonical=True``
    imposes that form regardless of the integrals.
    """
    if not 0 <= c < si.m:
        raise IndexError(f"spin-orbital {c} outside 0..{si.m - 1}")
    if not si.reference_occupation >> c & 1:
        raise ValueError(f"spin-orbital {c} is empty in the reference; no core hole to make")
    base = np.diag(si.eps) if canonical else np.array(si.fock)
    f = base - si.v[:, c, :, c]
    return FockNMinus1(f=f, core_index=c)
