"""Exact linear algebra over prime fields and over the integers.

Vectors over F_q are plain tuples of residues in ``range(q)``; the modulus is
carried alongside rather than inside every entry.  :class:`FieldElement` exists
for callers that want self-describing scalars, and :func:`rref` accepts either
representation.

Positions (pivots) are reported 1-based throughout the package, matching the
convention used for pivot sequences.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from functools import lru_cache
from heapq import heapify, heappop, heappush
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InconsistentComplexError, MalformedInputError

SUPPORTED_PRIMES = (2, 3, 5, 7)

Vector = tuple[int, ...]


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % f for f in range(2, int(q**0.5) + 1))


def check_modulus(q: int) -> int:
    if not isinstance(q, int) or not is_prime(q):
        raise MalformedInputError(f"modulus must be a prime, got {q!r}")
    return q


@dataclass(frozen=True)
class FieldElement:
    """An element of the prime field F_modulus."""

    value: int
    modulus: int

    def __post_init__(self):
        check_modulus(self.modulus)
        object.__setattr__(self, "value", self.value % self.modulus)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.modulus != self.modulus:
                raise MalformedInputError("mixed moduli in field arithmetic")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return FieldElement(self.value + o, self.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.value - o, self.modulus)

    def __rsub__(self, other):
        o = self._coerce(other)
        return FieldElement(o - self.value, self.modulus)

    def __mul__(self, other):
        o = self._coerce(other)
        return FieldElement(self.value * o, self.modulus)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value, self.modulus)

    def inverse(self) -> FieldElement:
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse")
        return FieldElement(pow(self.value, -1, self.modulus), self.modulus)

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * FieldElement(o, self.modulus).inverse()

    def __bool__(self):
        return self.value != 0

    def __int__(self):
        return self.value


def pivot(v: Sequence[int]) -> int | None:
    """1-based index of the first nonzero entry of ``v``, or None for zero."""
    for i, x in enumerate(v):
        if x:
            return i + 1
    return None


def normalize_vector(v: Sequence[int], q: int) -> Vector:
    """Scale a nonzero vector so that its first nonzero entry is 1."""
    p = pivot(v)
    if p is None:
        raise MalformedInputError("cannot normalize the zero vector")
    inv = pow(v[p - 1], -1, q)
    return tuple(x * inv % q for x in v)


def _as_residue_rows(m, q: int | None) -> tuple[list[list[int]], int]:
    rows = [list(r) for r in m]
    moduli = {x.modulus for r in rows for x in r if isinstance(x, FieldElement)}
    if len(moduli) > 1:
        raise MalformedInputError(f"mixed moduli {sorted(moduli)} in one matrix")
    if moduli:
        (mod,) = moduli
        if q is not None and q != mod:
            raise MalformedInputError(f"entries are mod {mod} but q={q} was given")
        q = mod
    if q is None:
        raise MalformedInputError("plain integer entries need an explicit modulus")
    check_modulus(q)
    width = {len(r) for r in rows}
    if len(width) > 1:
        raise MalformedInputError("ragged matrix")
    return [[int(x) % q for x in r] for r in rows], q


def _rref_in_place(rows: list[list[int]], q: int) -> list[int]:
    """Reduce ``rows`` mod q in place; return the 0-based pivot columns."""
    ncols = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(ncols):
        if r == len(rows):
            break
        src = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if src is None:
            continue
        rows[r], rows[src] = rows[src], rows[r]
        inv = pow(rows[r][c], -1, q)
        prow = [x * inv % q for x in rows[r]]
        rows[r] = prow
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [(x - f * y) % q for x, y in zip(rows[i], prow)]
        pivots.append(c)
        r += 1
    return pivots


def rref(m, q: int | None = None) -> tuple[tuple[Vector, ...], int, tuple[int, ...]]:
    """Reduced row echelon form over F_q.

    ``m`` is a matrix of :class:`FieldElement` or of plain integers (then
    ``q`` is required).  Returns the reduced matrix (same shape, residues as
    ints, zero rows last), the rank and the 1-based pivot columns.
    """
    rows, q = _as_residue_rows(m, q)
    pivots = _rref_in_place(rows, q)
    return tuple(tuple(r) for r in rows), len(pivots), tuple(c + 1 for c in pivots)


def rank_mod(rows: Iterable[Sequence[int]], q: int) -> int:
    work = [list(r) for r in rows]
    if not work:
        return 0
    return len(_rref_in_place(work, q))


@lru_cache(maxsize=None)
def _canonical_basis(q: int, vectors: tuple[Vector, ...]) -> tuple[Vector, ...]:
    work = [list(v) for v in vectors]
    k = len(_rref_in_place(work, q))
    return tuple(tuple(r) for r in work[:k])


@dataclass(frozen=True)
class Subspace:
    """A subspace of F_q^n stored by its reduced echelon basis.

    Equality is equality of the canonical bases.  Build instances with
    :func:`subspace_from_vectors`; the constructor trusts its input.
    """

    q: int
    n: int
    basis: tuple[Vector, ...]
    _pivots: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_pivots", tuple(pivot(v) for v in self.basis))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def pivots(self) -> tuple[int, ...]:
        """1-based pivot columns of the canonical basis."""
        return self._pivots

    def sort_key(self):
        return (self.dim, self.basis)

    def contains(self, v: Sequence[int]) -> bool:
        return rank_mod(list(self.basis) + [list(v)], self.q) == self.dim

    def contains_subspace(self, other: Subspace) -> bool:
        return rank_mod(self.basis + other.basis, self.q) == self.dim

    def __repr__(self):
        rows = "|".join(",".join(map(str, v)) for v in self.basis)
        return f"Subspace(q={self.q}, n={self.n}, [{rows}])"


def subspace_from_vectors(vs: Iterable[Sequence[int]], n: int, q: int | None = None) -> Subspace:
    """Canonical span of ``vs`` inside F_q^n.

    Vectors may be tuples of ints (``q`` required) or of FieldElement.
    """
    rows, q = _as_residue_rows(vs, q)
    for r in rows:
        if len(r) != n:
            raise MalformedInputError(f"vector {r} does not live in dimension {n}")
    return Subspace(q, n, _canonical_basis(q, tuple(tuple(r) for r in rows)))


def zero_subspace(n: int, q: int) -> Subspace:
    return Subspace(q, n, ())


def full_space(n: int, q: int) -> Subspace:
    return Subspace(q, n, tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))


def is_direct_sum(ws: Sequence[Subspace], n: int) -> bool:
    """True iff the subspaces ``ws`` of F_q^n form an internal direct sum equal to F_q^n."""
    if not ws:
        return n == 0
    if any(w.n != n for w in ws):
        return False
    if sum(w.dim for w in ws) != n:
        return False
    rows = [v for w in ws for v in w.basis]
    return rank_mod(rows, ws[0].q) == n


def gaussian_binomial(n: int, d: int, q: int) -> int:
    """Number of d-dimensional subspaces of F_q^n."""
    if d < 0 or d > n:
        return 0
    num = den = 1
    for i in range(d):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


@lru_cache(maxsize=None)
def _enumerate_subspaces(n: int, q: int, d: int) -> tuple[Subspace, ...]:
    out = []
    for pivs in itertools.combinations(range(n), d):
        pivset = set(pivs)
        # free slots: row i, non-pivot column right of its pivot
        slots = [(i, c) for i, p in enumerate(pivs) for c in range(p + 1, n) if c not in pivset]
        for values in itertools.product(range(q), repeat=len(slots)):
            rows = [[0] * n for _ in range(d)]
            for i, p in enumerate(pivs):
                rows[i][p] = 1
            for (i, c), x in zip(slots, values):
                rows[i][c] = x
            out.append(Subspace(q, n, tuple(tuple(r) for r in rows)))
    out.sort(key=Subspace.sort_key)
    return tuple(out)


def enumerate_subspaces(n: int, q: int, d: int) -> list[Subspace]:
    """All d-dimensional subspaces of F_q^n, sorted by canonical basis."""
    check_modulus(q)
    if d < 0 or d > n:
        raise MalformedInputError(f"need 0 <= d <= n, got d={d}, n={n}")
    return list(_enumerate_subspaces(n, q, d))


# --------------------------------------------------------------------------
# integer matrices


class IntMatrix:
    """Sparse matrix of exact integers, stored as a dict of nonzero rows."""

    __slots__ = ("rows", "cols", "_data")

    def __init__(self, rows: int, cols: int, data: dict[int, dict[int, int]] | None = None):
        self.rows = rows
        self.cols = cols
        self._data: dict[int, dict[int, int]] = {}
        if data:
            for i, row in data.items():
                clean = {j: v for j, v in row.items() if v}
                if clean:
                    self._data[i] = clean

    @classmethod
    def from_dense(cls, entries: Sequence[Sequence[int]], cols: int | None = None) -> IntMatrix:
        entries = [list(r) for r in entries]
        if cols is None:
            cols = len(entries[0]) if entries else 0
        if any(len(r) != cols for r in entries):
            raise MalformedInputError("ragged matrix")
        return cls(len(entries), cols, {i: dict(enumerate(r)) for i, r in enumerate(entries)})

    @classmethod
    def from_columns(cls, rows: int, columns: Sequence[dict[int, int]]) -> IntMatrix:
        data: dict[int, dict[int, int]] = {}
        for j, col in enumerate(columns):
            for i, v in col.items():
                if v:
                    data.setdefault(i, {})[j] = v
        return cls(rows, len(columns), data)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> IntMatrix:
        return cls(rows, cols)

    @classmethod
    def identity(cls, size: int) -> IntMatrix:
        return cls(size, size, {i: {i: 1} for i in range(size)})

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self._data.get(i, {}).get(j, 0)

    def row_items(self):
        """Nonzero rows as (index, {col: value}) pairs in index order."""
        for i in sorted(self._data):
            yield i, self._data[i]

    def nnz(self) -> int:
        return sum(len(r) for r in self._data.values())

    def is_zero(self) -> bool:
        return not self._data

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.cols for _ in range(self.rows)]
        for i, row in self._data.items():
            for j, v in row.items():
                out[i][j] = v
        return out

    def transpose(self) -> IntMatrix:
        data: dict[int, dict[int, int]] = {}
        for i, row in self._data.items():
            for j, v in row.items():
                data.setdefault(j, {})[i] = v
        return IntMatrix(self.cols, self.rows, data)

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> IntMatrix:
        rmap = {r: k for k, r in enumerate(row_idx)}
        cmap = {c: k for k, c in enumerate(col_idx)}
        data: dict[int, dict[int, int]] = {}
        for i, row in self._data.items():
            if i not in rmap:
                continue
            new = {cmap[j]: v for j, v in row.items() if j in cmap}
            if new:
                data[rmap[i]] = new
        return IntMatrix(len(row_idx), len(col_idx), data)

    def __matmul__(self, other: IntMatrix) -> IntMatrix:
        if self.cols != other.rows:
            raise MalformedInputError(f"shape mismatch {self.shape} @ {other.shape}")
        data: dict[int, dict[int, int]] = {}
        for i, row in self._data.items():
            acc: dict[int, int] = {}
            for k, a in row.items():
                orow = other._data.get(k)
                if orow is None:
                    continue
                for j, b in orow.items():
                    acc[j] = acc.get(j, 0) + a * b
            data[i] = acc
        return IntMatrix(self.rows, other.cols, data)

    def __eq__(self, other):
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return self.shape == other.shape and self._data == other._data

    def __repr__(self):
        return f"IntMatrix({self.rows}x{self.cols}, nnz={self.nnz()})"


@dataclass(frozen=True)
class SNFResult:
    """Invariant factors of an integer matrix.

    ``diagonal`` has length min(rows, cols), positive factors first in
    divisibility order, then zeros.  ``left``/``right`` are the unimodular
    transforms with ``left @ m @ right == diag``; only filled when requested.
    """

    diagonal: tuple[int, ...]
    rank: int
    left: IntMatrix | None = None
    right: IntMatrix | None = None

    @property
    def torsion(self) -> tuple[int, ...]:
        return tuple(d for d in self.diagonal if d > 1)

    def diagonal_matrix(self, rows: int, cols: int) -> IntMatrix:
        return IntMatrix(rows, cols, {i: {i: d} for i, d in enumerate(self.diagonal) if d})


def _dense_snf(a: list[list[int]], nrows: int, ncols: int, track: bool):
    """Smith form of a dense matrix by min-|pivot| elimination.

    Returns (diagonal, U, V) with U·a·V diagonal; U, V are None unless tracked.
    """
    A = [row[:] for row in a]
    U = [[int(i == j) for j in range(nrows)] for i in range(nrows)] if track else None
    V = [[int(i == j) for j in range(ncols)] for i in range(ncols)] if track else None

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        if track:
            U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        if track:
            for row in V:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, f):
        # row_dst += f * row_src
        A[dst] = [x + f * y for x, y in zip(A[dst], A[src])]
        if track:
            U[dst] = [x + f * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, f):
        for row in A:
            if row[src]:
                row[dst] += f * row[src]
        if track:
            for row in V:
                if row[src]:
                    row[dst] += f * row[src]

    diag = []
    for t in range(min(nrows, ncols)):
        best = None
        for i in range(t, nrows):
            row = A[i]
            for j in range(t, ncols):
                x = row[j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            p = A[t][t]
            dirty = False
            for i in range(t + 1, nrows):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // p))
                    dirty = dirty or A[i][t] != 0
            for j in range(t + 1, ncols):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // p))
                    dirty = dirty or A[t][j] != 0
            if dirty:
                cand = [(abs(A[i][t]), i, t) for i in range(t + 1, nrows) if A[i][t]]
                cand += [(abs(A[t][j]), t, j) for j in range(t + 1, ncols) if A[t][j]]
                _, i, j = min(cand)
                if i != t:
                    swap_rows(t, i)
                else:
                    swap_cols(t, j)
                continue
            bad = next(
                (i for i in range(t + 1, nrows) if any(A[i][j] % p for j in range(t + 1, ncols))),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            if track:
                U[t] = [-x for x in U[t]]
        diag.append(A[t][t])
    return diag, U, V


def _sparse_unit_elimination(m: IntMatrix) -> tuple[int, list[list[int]]]:
    """Eliminate ±1 pivots from a sparse matrix.

    Each unit pivot contributes an invariant factor 1 and is removed together
    with its row and column (the Schur complement keeps the remaining
    factors).  Returns the unit count and the dense leftover block.
    """
    rows = {i: dict(r) for i, r in m._data.items()}
    colrows: dict[int, set[int]] = {}
    for i, r in rows.items():
        for j in r:
            colrows.setdefault(j, set()).add(i)
    heap = [(len(r), i) for i, r in rows.items()]
    heapify(heap)
    units = 0
    while heap:
        ln, i = heappop(heap)
        row = rows.get(i)
        if row is None or len(row) != ln:
            continue
        best = None
        for j, v in row.items():
            if v == 1 or v == -1:
                cc = len(colrows[j])
                if best is None or cc < best[0]:
                    best = (cc, j)
                    if cc == 1:
                        break
        if best is None:
            continue
        j = best[1]
        pv = row[j]
        for k in list(colrows[j]):
            if k == i:
                continue
            other = rows[k]
            f = other[j] * pv
            for jj, v in row.items():
                nv = other.get(jj, 0) - f * v
                if nv:
                    if jj not in other:
                        colrows[jj].add(k)
                    other[jj] = nv
                else:
                    del other[jj]
                    colrows[jj].discard(k)
            if other:
                heappush(heap, (len(other), k))
            else:
                del rows[k]
        for jj in row:
            colrows[jj].discard(i)
        del rows[i]
        units += 1
    if not rows:
        return units, []
    used_cols = sorted({j for r in rows.values() for j in r})
    cpos = {j: k for k, j in enumerate(used_cols)}
    dense = []
    for i in sorted(rows):
        line = [0] * len(used_cols)
        for j, v in rows[i].items():
            line[cpos[j]] = v
        dense.append(line)
    return units, dense


def smith_normal_form(m: IntMatrix, transforms: bool = False) -> SNFResult:
    """Smith normal form of an exact integer matrix.

    Without ``transforms`` large sparse inputs are handled by eliminating unit
    pivots first and running the dense algorithm on what remains.  With
    ``transforms`` the dense algorithm runs on the full matrix and records
    unimodular ``left``/``right`` such that ``left @ m @ right`` is diagonal.
    """
    size = min(m.rows, m.cols)
    if transforms:
        diag, U, V = _dense_snf(m.to_dense(), m.rows, m.cols, track=True)
        diag = diag + [0] * (size - len(diag))
        return SNFResult(
            tuple(diag),
            sum(1 for d in diag if d),
            IntMatrix.from_dense(U, m.rows),
            IntMatrix.from_dense(V, m.cols),
        )
    units, rest = _sparse_unit_elimination(m)
    tail: list[int] = []
    if rest:
        tail, _, _ = _dense_snf(rest, len(rest), len(rest[0]), track=False)
    nonzero = [1] * units + [d for d in tail if d]
    diag = nonzero + [0] * (size - len(nonzero))
    return SNFResult(tuple(diag), len(nonzero))


def homology_at(boundary_in: IntMatrix, boundary_out: IntMatrix) -> tuple[int, tuple[int, ...]]:
    """Homology of C_{s+1} -> C_s -> C_{s-1} at C_s as (betti, torsion).

    ``boundary_in`` maps into C_s (rows = rank C_s); ``boundary_out`` maps out
    of it (cols = rank C_s).
    """
    if boundary_in.rows != boundary_out.cols:
        raise MalformedInputError(
            f"boundaries not composable: in {boundary_in.shape}, out {boundary_out.shape}"
        )
    if not (boundary_out @ boundary_in).is_zero():
        raise InconsistentComplexError("boundary_out @ boundary_in != 0")
    snf_in = smith_normal_form(boundary_in)
    rank_out = smith_normal_form(boundary_out).rank
    betti = boundary_out.cols - rank_out - snf_in.rank
    return betti, snf_in.torsion


# --------------------------------------------------------------------------
# matrix cache files


def write_matrix_cache(path: str | os.PathLike, header: tuple[int, int, int], m: IntMatrix) -> None:
    """Write ``m`` in the text format ``n q s rows cols`` + one line per row."""
    n, q, s = header
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{n} {q} {s} {m.rows} {m.cols}\n")
        empty = [0] * m.cols
        for i in range(m.rows):
            row = m._data.get(i)
            if row is None:
                line = empty
            else:
                line = list(empty)
                for j, v in row.items():
                    line[j] = v
            fh.write(" ".join(map(str, line)))
            fh.write("\n")
    os.replace(tmp, path)


def read_matrix_header(path: str | os.PathLike) -> tuple[int, int, int, int, int]:
    with open(path, encoding="ascii") as fh:
        parts = fh.readline().split()
    if len(parts) != 5:
        raise MalformedInputError(f"{path}: bad cache header")
    return tuple(int(x) for x in parts)  # type: ignore[return-value]


def read_matrix_cache(path: str | os.PathLike) -> tuple[tuple[int, int, int], IntMatrix]:
    """Inverse of :func:`write_matrix_cache`; returns ((n, q, s), matrix)."""
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        if len(head) != 5:
            raise MalformedInputError(f"{path}: bad cache header")
        n, q, s, rows, cols = map(int, head)
        data: dict[int, dict[int, int]] = {}
        for i in range(rows):
            line = fh.readline()
            if not line.endswith("\n"):
                raise MalformedInputError(f"{path}: truncated at row {i}")
            vals = line.split()
            if len(vals) != cols:
                raise MalformedInputError(f"{path}: row {i} has {len(vals)} entries, expected {cols}")
            row = {j: int(x) for j, x in enumerate(vals) if x != "0"}
            if row:
                data[i] = row
    return (n, q, s), IntMatrix(rows, cols, data)
