"""The reduced bar complex of the Steinberg monoid in degree n over F_q.

Chain group s has one basis element per ordered decomposition
F_q^n = W_1 + ... + W_s (nonzero parts) and per choice of a PBW apartment in
each part.  Face map d_i multiplies factors i and i+1; the differential is
sum_{i=1}^{s-1} (-1)^i d_i.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache, partial
from math import prod
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from ._parallel import chunk_ranges, pmap
from .errors import DomainError, MalformedInputError
from .exactla import (
    IntMatrix,
    Subspace,
    Vector,
    _canonical_basis,
    check_modulus,
    enumerate_subspaces,
    homology_at,
    is_direct_sum,
    pivot,
    rank_mod,
    read_matrix_cache,
    read_matrix_header,
    write_matrix_cache,
)
from .steinberg import ApartmentKey, PBWApartment, _building, _express, encode_vectors

Factors = tuple[ApartmentKey, ...]


@dataclass(frozen=True)
class Decomposition:
    """Ordered tuple of nonzero subspaces whose direct sum is F_q^n."""

    parts: tuple[Subspace, ...]

    def __post_init__(self):
        if not self.parts:
            raise MalformedInputError("a decomposition needs at least one part")
        if any(w.dim == 0 for w in self.parts):
            raise MalformedInputError("decomposition parts must be nonzero")
        if not is_direct_sum(self.parts, self.parts[0].n):
            raise MalformedInputError("parts do not form a direct sum decomposition")

    @property
    def n(self) -> int:
        return self.parts[0].n

    @property
    def q(self) -> int:
        return self.parts[0].q

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(w.dim for w in self.parts)

    def __len__(self):
        return len(self.parts)


class BasisElement(NamedTuple):
    """Tensor a_1 x ... x a_p of PBW apartments, one per part of a decomposition."""

    q: int
    factors: Factors

    @property
    def n(self) -> int:
        return len(self.factors[0][0])

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.factors)

    @property
    def decomposition(self) -> Decomposition:
        n = self.n
        return Decomposition(tuple(Subspace(self.q, n, _canonical_basis(self.q, a)) for a in self.factors))

    @property
    def sequence(self) -> tuple[int, ...]:
        """Concatenated pivot sequences S_D of the parts."""
        return tuple(pivot(v) for a in self.factors for v in a)

    def apartments(self) -> list[PBWApartment]:
        return [PBWApartment(self.q, a) for a in self.factors]

    def encode(self) -> str:
        return f"{self.q};{self.n};" + " x ".join(encode_vectors(a) for a in self.factors)


class ChainVector:
    """Sparse integer combination of basis elements of one degree."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs: Mapping[BasisElement, int] | None = None):
        self.degree = degree
        self.coeffs: dict[BasisElement, int] = {}
        for b, c in (coeffs or {}).items():
            if c:
                self.coeffs[b] = self.coeffs.get(b, 0) + c
        self.coeffs = {b: c for b, c in self.coeffs.items() if c}

    def __add__(self, other: ChainVector) -> ChainVector:
        if other.degree != self.degree:
            raise MalformedInputError("cannot add chains of different degrees")
        acc = dict(self.coeffs)
        for b, c in other.coeffs.items():
            acc[b] = acc.get(b, 0) + c
        return ChainVector(self.degree, acc)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c: int) -> ChainVector:
        return ChainVector(self.degree, {b: c * v for b, v in self.coeffs.items()})

    def is_zero(self) -> bool:
        return not self.coeffs

    def items(self):
        return sorted(self.coeffs.items())

    def __eq__(self, other):
        if not isinstance(other, ChainVector):
            return NotImplemented
        return self.degree == other.degree and self.coeffs == other.coeffs

    def __repr__(self):
        body = " ".join(f"{c:+d}*{b.encode()}" for b, c in self.items()) or "0"
        return f"ChainVector(deg={self.degree}, {body})"


@dataclass(frozen=True)
class ChainGroup:
    n: int
    q: int
    s: int
    basis: tuple[BasisElement, ...]
    index: dict[BasisElement, int] = field(repr=False, compare=False)

    @property
    def rank(self) -> int:
        return len(self.basis)


@lru_cache(maxsize=None)
def _nonzero_subspaces(n: int, q: int) -> tuple[Subspace, ...]:
    return tuple(w for d in range(1, n + 1) for w in enumerate_subspaces(n, q, d))


@lru_cache(maxsize=None)
def _decompositions(n: int, q: int, p: int) -> tuple[tuple[Subspace, ...], ...]:
    subs = _nonzero_subspaces(n, q)
    out: list[tuple[Subspace, ...]] = []

    def extend(prefix, rows, dim):
        left = p - len(prefix)
        if left == 0:
            if dim == n:
                out.append(tuple(prefix))
            return
        budget = n - dim - (left - 1)
        for w in subs:
            if w.dim > budget or (left == 1 and w.dim != budget):
                continue
            new_rows = rows + w.basis
            if rank_mod(new_rows, q) == dim + w.dim:
                prefix.append(w)
                extend(prefix, new_rows, dim + w.dim)
                prefix.pop()

    extend([], (), 0)
    return tuple(out)


def enumerate_decompositions(n: int, q: int, p: int) -> list[Decomposition]:
    """Ordered decompositions of F_q^n into p nonzero parts, lexicographic in the parts."""
    check_modulus(q)
    if p < 1:
        raise DomainError(f"need p >= 1, got {p}")
    if p > n:
        return []
    return [Decomposition(parts) for parts in _decompositions(n, q, p)]


@lru_cache(maxsize=None)
def _chain_group(n: int, q: int, s: int) -> ChainGroup:
    basis: list[BasisElement] = []
    if 1 <= s <= n:
        for parts in _decompositions(n, q, s):
            pbws = [_building(q, w.basis).pbw for w in parts]
            stack: list[Factors] = [()]
            for options in pbws:
                stack = [f + (a,) for f in stack for a in options]
            basis.extend(BasisElement(q, f) for f in stack)
    return ChainGroup(n, q, s, tuple(basis), {b: i for i, b in enumerate(basis)})


def chain_basis(n: int, q: int, s: int) -> ChainGroup:
    """Deterministically ordered basis of chain group s (empty outside 1..n)."""
    check_modulus(q)
    return _chain_group(n, q, s)


def _face_terms(q: int, factors: Factors, i: int) -> list[tuple[Factors, int]]:
    merged = factors[i - 1] + factors[i]
    head, tail = factors[: i - 1], factors[i + 1 :]
    return [(head + (k,) + tail, c) for k, c in _express(q, merged)]


def face_map(i: int, b: BasisElement) -> ChainVector:
    """d_i: multiply factors i and i+1 (1-based) and expand in the PBW tensor basis."""
    p = b.degree
    if not 1 <= i <= p - 1:
        raise DomainError(f"face index {i} out of range for degree {p}")
    return ChainVector(p - 1, {BasisElement(b.q, f): c for f, c in _face_terms(b.q, b.factors, i)})


def face_map_chain(i: int, x: ChainVector) -> ChainVector:
    acc: dict[BasisElement, int] = {}
    for b, c in x.coeffs.items():
        for f, v in _face_terms(b.q, b.factors, i):
            key = BasisElement(b.q, f)
            acc[key] = acc.get(key, 0) + c * v
    return ChainVector(x.degree - 1, acc)


def boundary(b: BasisElement) -> ChainVector:
    """sum_{i=1}^{p-1} (-1)^i d_i(b)."""
    acc: dict[BasisElement, int] = {}
    for i in range(1, b.degree):
        sign = -1 if i % 2 else 1
        for f, c in _face_terms(b.q, b.factors, i):
            key = BasisElement(b.q, f)
            acc[key] = acc.get(key, 0) + sign * c
    return ChainVector(b.degree - 1, acc)


def boundary_chain(x: ChainVector) -> ChainVector:
    acc: dict[BasisElement, int] = {}
    for b, c in x.coeffs.items():
        for key, v in boundary(b).coeffs.items():
            acc[key] = acc.get(key, 0) + c * v
    return ChainVector(x.degree - 1, acc)


def _columns(n: int, q: int, s: int, span: tuple[int, int]) -> list[dict[int, int]]:
    src = _chain_group(n, q, s).basis
    dst = _chain_group(n, q, s - 1).index
    cols = []
    for j in range(*span):
        factors = src[j].factors
        col: dict[int, int] = {}
        for i in range(1, s):
            sign = -1 if i % 2 else 1
            for f, c in _face_terms(q, factors, i):
                r = dst[BasisElement(q, f)]
                col[r] = col.get(r, 0) + sign * c
        cols.append(col)
    return cols


def cache_path(cache_dir: str | Path, n: int, q: int, s: int) -> Path:
    return Path(cache_dir) / f"differential_n{n}_q{q}_s{s}.txt"


def closed_form_rank(n: int, q: int, s: int) -> int:
    """Chain rank s from decomposition types: |GL_n| / prod |GL_{d_i}| * prod q^{C(d_i, 2)}."""

    def gl(d):
        return prod(q**d - q**i for i in range(d))

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(1, total - parts + 2):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    if not 1 <= s <= n:
        return 0
    return sum(
        gl(n) // prod(gl(d) for d in dims) * prod(q ** (d * (d - 1) // 2) for d in dims)
        for dims in compositions(n, s)
    )


def differential_matrix(
    n: int, q: int, s: int, jobs: int = 1, cache_dir: str | Path | None = None
) -> IntMatrix:
    """Matrix of the differential from degree s to degree s-1 in the chosen bases.

    Defined for 1 <= s <= n+1; s = 1 gives the 0-row map out of degree 1 and
    s = n+1 the 0-column map into degree n.
    """
    check_modulus(q)
    if not 1 <= s <= n + 1:
        raise DomainError(f"differential degree {s} outside 1..{n + 1}")
    rows, cols = closed_form_rank(n, q, s - 1), closed_form_rank(n, q, s)
    if s == 1 or s == n + 1:
        return IntMatrix.zeros(rows, cols)
    path = cache_path(cache_dir, n, q, s) if cache_dir is not None else None
    if path is not None and path.exists():
        try:
            if read_matrix_header(path) == (n, q, s, rows, cols):
                return read_matrix_cache(path)[1]
        except (MalformedInputError, ValueError):
            pass
    spans = chunk_ranges(cols, jobs)
    pieces = pmap(partial(_columns, n, q, s), spans, jobs)
    m = IntMatrix.from_columns(rows, [c for piece in pieces for c in piece])
    if path is not None:
        write_matrix_cache(path, (n, q, s), m)
    return m


class HomologyRecord(NamedTuple):
    n: int
    q: int
    s: int
    betti: int
    torsion: tuple[int, ...]
    chain_rank: int

    @property
    def trivial(self) -> bool:
        return self.betti == 0 and not self.torsion

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "s": self.s,
            "betti": self.betti,
            "torsion": list(self.torsion),
            "chain_rank": self.chain_rank,
        }


def complex_homology(
    n: int, q: int, jobs: int = 1, cache_dir: str | Path | None = None
) -> list[HomologyRecord]:
    """Integral homology of the bar complex in degrees 1..n."""
    if n < 1:
        raise DomainError("n must be at least 1")
    mats = {s: differential_matrix(n, q, s, jobs, cache_dir) for s in range(1, n + 2)}
    records = []
    for s in range(1, n + 1):
        betti, torsion = homology_at(mats[s + 1], mats[s])
        records.append(HomologyRecord(n, q, s, betti, torsion, mats[s].cols))
    return records


def format_homology_table(records: Sequence[HomologyRecord]) -> str:
    header = ("n", "q", "s", "chain_rank", "betti", "torsion", "H_s")
    lines = [header]
    for r in records:
        group = "0" if r.trivial else " + ".join(
            ([f"Z^{r.betti}"] if r.betti else []) + [f"Z/{t}" for t in r.torsion]
        )
        torsion = ",".join(map(str, r.torsion)) or "-"
        lines.append((str(r.n), str(r.q), str(r.s), str(r.chain_rank), str(r.betti), torsion, group))
    widths = [max(len(row[k]) for row in lines) for k in range(len(header))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() for row in lines)


def _simplicial_violations(q: int, factors: Factors) -> list[str]:
    b = BasisElement(q, factors)
    p = b.degree
    bad = []
    for j in range(2, p):
        for i in range(1, j):
            lhs = face_map_chain(i, face_map(j, b))
            rhs = face_map_chain(j - 1, face_map(i, b))
            if lhs != rhs:
                bad.append(f"d_{i} d_{j} != d_{j - 1} d_{i}")
    return bad


def _simplicial_chunk(n: int, q: int, s: int, span: tuple[int, int]) -> list[tuple[int, list[str]]]:
    basis = _chain_group(n, q, s).basis
    out = []
    for j in range(*span):
        bad = _simplicial_violations(q, basis[j].factors)
        out.append((j, bad))
    return out


def verify_dsquared(n: int, q: int, jobs: int = 1, cache_dir: str | Path | None = None) -> dict:
    """Check the chain complex axiom and the simplicial face identities exhaustively."""
    start = time.perf_counter()
    violations = []
    instances = 0
    mats = {s: differential_matrix(n, q, s, jobs, cache_dir) for s in range(2, n + 1)}
    for s in range(3, n + 1):
        instances += 1
        comp = mats[s - 1] @ mats[s]
        if not comp.is_zero():
            violations.append({"decomposition": f"degree {s}", "detail": f"d@d has {comp.nnz()} nonzero entries"})
    identities = 0
    for s in range(3, n + 1):
        group = _chain_group(n, q, s)
        results = pmap(partial(_simplicial_chunk, n, q, s), chunk_ranges(group.rank, jobs), jobs)
        for piece in results:
            for j, bad in piece:
                identities += (s - 1) * (s - 2) // 2
                for msg in bad:
                    violations.append({"decomposition": group.basis[j].encode(), "detail": msg})
    return {
        "check": "dsquared",
        "n": n,
        "q": q,
        "instances": instances + identities,
        "composites_checked": instances,
        "face_identities_checked": identities,
        "violations": violations,
        "elapsed": time.perf_counter() - start,
    }
