"""Filtration by the statistic I(S) and the contracting homotopy on its quotients.

For a decomposition D with concatenated pivot sequence S_D, the statistic is
(c_1, ..., c_n, k): value multiplicities followed by the inversion count.
Basis elements with I_D <= I (lexicographically) span a subcomplex, and the
split-off-first-vector operator ``phi`` satisfies d phi + phi d = id on each
graded piece below the top degree.  Everything here is checked exhaustively.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache, partial
from typing import NamedTuple, Sequence

from ._parallel import chunk_ranges, pmap
from .barcomplex import (
    BasisElement,
    ChainVector,
    Decomposition,
    Factors,
    _chain_group,
    _decompositions,
    _face_terms,
    boundary,
    complex_homology,
    differential_matrix,
)
from .errors import DomainError
from .exactla import IntMatrix, Subspace, _canonical_basis, homology_at
from .steinberg import encode_vectors, pivot_sequence


@dataclass(frozen=True, order=True)
class Statistic:
    """I(S) = (counts, inversions); dataclass ordering is the lexicographic order."""

    counts: tuple[int, ...]
    inversions: int

    @property
    def n(self) -> int:
        return len(self.counts)

    def as_tuple(self) -> tuple[int, ...]:
        return self.counts + (self.inversions,)

    def __str__(self):
        return "(" + ",".join(map(str, self.as_tuple())) + ")"


class HomotopyData(NamedTuple):
    k_S: int
    j_S: int
    i0: int | None = None


def sequence_of_decomposition(d: Decomposition) -> tuple[int, ...]:
    return tuple(s for w in d.parts for s in pivot_sequence(w))


def statistic(s: Sequence[int], n: int | None = None) -> Statistic:
    n = len(s) if n is None else n
    if len(s) != n:
        raise DomainError(f"sequence of length {len(s)} for n={n}")
    if any(not 1 <= x <= n for x in s):
        raise DomainError(f"entries of {tuple(s)} must lie in 1..{n}")
    counts = [0] * n
    for x in s:
        counts[x - 1] += 1
    inv = sum(1 for i in range(n) for j in range(i + 1, n) if s[i] > s[j])
    return Statistic(tuple(counts), inv)


def lex_compare(a: Statistic, b: Statistic) -> int:
    """-1, 0 or 1 as a <, = or > b lexicographically on (c_1, ..., c_n, k)."""
    if a.n != b.n:
        raise DomainError("statistics for different n are not comparable")
    return (a > b) - (a < b)


@lru_cache(maxsize=None)
def _stat_of_factors(factors: Factors) -> Statistic:
    seq = tuple(next(i + 1 for i, x in enumerate(v) if x) for a in factors for v in a)
    return statistic(seq)


def statistic_of(b: BasisElement) -> Statistic:
    return _stat_of_factors(b.factors)


def homotopy_data(s: Sequence[int], dims: Sequence[int] | None = None) -> HomotopyData | None:
    """Minimal ascent value k_S and its first position j_S (1-based), or None.

    With ``dims`` (the part dimensions of the decomposition) also locate the
    part i0 containing position j_S.
    """
    ascents = [(s[i], i + 1) for i in range(len(s) - 1) if s[i] < s[i + 1]]
    if not ascents:
        return None
    k = min(v for v, _ in ascents)
    j = min(i for v, i in ascents if v == k)
    i0 = None
    if dims is not None:
        start = 1
        for idx, d in enumerate(dims, start=1):
            if start <= j < start + d:
                i0 = idx
                break
            start += d
    return HomotopyData(k, j, i0)


def _phi_terms(factors: Factors) -> list[tuple[Factors, int]]:
    seq = tuple(next(i + 1 for i, x in enumerate(v) if x) for a in factors for v in a)
    data = homotopy_data(seq, [len(a) for a in factors])
    if data is None:
        raise DomainError(f"sequence {seq} has no ascent")
    i0 = data.i0
    a = factors[i0 - 1]
    if len(a) == 1:
        return []
    split = factors[: i0 - 1] + ((a[0],), a[1:]) + factors[i0:]
    return [(split, -1 if i0 % 2 else 1)]


def phi(b: BasisElement) -> ChainVector:
    """Split the first vector off the part holding the first minimal ascent.

    Zero when that part is a line; otherwise (-1)^{i0} a_1 x .. x a' x a'' x .. x a_p.
    """
    p, n = b.degree, b.n
    if p >= n:
        raise DomainError(f"phi is only defined below the top degree (p={p}, n={n})")
    return ChainVector(p + 1, {BasisElement(b.q, f): c for f, c in _phi_terms(b.factors)})


def phi_chain(x: ChainVector) -> ChainVector:
    acc: dict[BasisElement, int] = {}
    for b, c in x.coeffs.items():
        for f, v in _phi_terms(b.factors):
            key = BasisElement(b.q, f)
            acc[key] = acc.get(key, 0) + c * v
    return ChainVector(x.degree + 1, acc)


def project_to_level(x: ChainVector, level: Statistic) -> ChainVector:
    """Drop every term whose statistic is strictly below ``level``."""
    return ChainVector(x.degree, {b: c for b, c in x.coeffs.items() if not statistic_of(b) < level})


def _report(check, n, q, instances, violations, start, **extra):
    out = {"check": check, "n": n, "q": q, "instances": instances}
    out.update(extra)
    out["violations"] = violations
    out["elapsed"] = time.perf_counter() - start
    return out


def classify_merge(d: Decomposition, i: int) -> dict:
    """Statistic change for merging parts i and i+1 (1-based) of ``d``.

    Returns the two statistics, the Case (1: pivot sequences of the merged
    parts are disjoint, 2: they share a value) and whether the case-specific
    claim holds.
    """
    n = d.n
    parts = d.parts
    if not 1 <= i < len(parts):
        raise DomainError(f"merge index {i} out of range for {len(parts)} parts")
    seq = sequence_of_decomposition(d)
    merged = Subspace(d.q, n, _canonical_basis(d.q, parts[i - 1].basis + parts[i].basis))
    seq_i = sequence_of_decomposition(Decomposition(parts[: i - 1] + (merged,) + parts[i + 1 :]))
    before, after = statistic(seq, n), statistic(seq_i, n)
    s1, s2 = pivot_sequence(parts[i - 1]), pivot_sequence(parts[i])
    common = sorted(set(s1) & set(s2))
    if not common:
        case = 1
        holds = after.counts == before.counts and after.inversions <= before.inversions
        dropped = None
    else:
        case = 2
        k = common[0]
        holds = after.counts[: k - 1] == before.counts[: k - 1] and after.counts[k - 1] < before.counts[k - 1]
        dropped = k
    return {
        "case": case,
        "before": before,
        "after": after,
        "monotone": after <= before,
        "case_claim": holds,
        "first_common": dropped,
    }


def _filtration_chunk(n: int, q: int, p: int, span: tuple[int, int]) -> list[tuple[int, int, dict]]:
    decomps = _decompositions(n, q, p)
    out = []
    for idx in range(*span):
        d = Decomposition(decomps[idx])
        for i in range(1, p):
            out.append((idx, i, classify_merge(d, i)))
    return out


def _decomp_encoding(d: Decomposition) -> str:
    return f"{d.q};{d.n};" + " + ".join(encode_vectors(w.basis) for w in d.parts)


def verify_filtration_lemma(n: int, q: int, jobs: int = 1) -> dict:
    """Check I(S_{D_i}) <= I(S_D) for every decomposition D and merge index i."""
    start = time.perf_counter()
    violations = []
    tallies = {"case1": 0, "case2": 0, "strict_drops": 0}
    instances = 0
    for p in range(2, n + 1):
        decomps = _decompositions(n, q, p)
        pieces = pmap(partial(_filtration_chunk, n, q, p), chunk_ranges(len(decomps), jobs), jobs)
        for piece in pieces:
            for idx, i, info in piece:
                instances += 1
                tallies[f"case{info['case']}"] += 1
                tallies["strict_drops"] += info["after"] < info["before"]
                if not (info["monotone"] and info["case_claim"]):
                    violations.append(
                        {
                            "decomposition": _decomp_encoding(Decomposition(decomps[idx])),
                            "detail": f"merge {i}: case {info['case']}, I {info['before']} -> {info['after']}",
                        }
                    )
    return _report("filtration", n, q, instances, violations, start, **tallies)


def _homotopy_chunk(n: int, q: int, p: int, span: tuple[int, int]) -> list[tuple[int, list[str], int]]:
    basis = _chain_group(n, q, p).basis
    out = []
    for j in range(*span):
        bad, killed = homotopy_defects(basis[j])
        out.append((j, bad, killed))
    return out


def homotopy_defects(b: BasisElement) -> tuple[list[str], int]:
    """Problems with d phi + phi d = id at ``b`` on its graded piece.

    Also checks that phi keeps S_D and that the two summands the argument
    discards (merging a_{i0-1} with a'_{i0} in d phi(b), and with a_{i0} in
    d(b)) really fall to a lower level.  Returns (messages, summands checked).
    """
    level = statistic_of(b)
    seq = b.sequence
    bad = []
    killed = 0
    phib = phi(b)
    for t in phib.coeffs:
        if t.sequence != seq:
            bad.append(f"phi changes S to {t.sequence}")
    data = homotopy_data(seq, b.dims)
    i0 = data.i0
    if i0 > 1:
        killed += 1
        if any(not statistic_of(BasisElement(b.q, f)) < level for f, _ in _face_terms(b.q, b.factors, i0 - 1)):
            bad.append(f"merging parts {i0 - 1},{i0} does not drop the level")
        for split in phib.coeffs:
            killed += 1
            if any(not statistic_of(BasisElement(b.q, f)) < level for f, _ in _face_terms(b.q, split.factors, i0 - 1)):
                bad.append(f"merging a_{i0 - 1} with the split vector does not drop the level")
    d_phi = ChainVector(b.degree, {})
    for t, c in phib.coeffs.items():
        d_phi = d_phi + boundary(t).scale(c)
    d_phi = project_to_level(d_phi, level)
    # terms below the level vanish in the quotient before phi is applied
    phi_d = phi_chain(project_to_level(boundary(b), level)) if b.degree > 1 else ChainVector(b.degree, {})
    residue = project_to_level(d_phi + phi_d - ChainVector(b.degree, {b: 1}), level)
    if not residue.is_zero():
        bad.append(f"(d phi + phi d - id)(b) = {residue!r}")
    above = [t for t in (d_phi + phi_d).coeffs if statistic_of(t) > level]
    if above:
        bad.append(f"{len(above)} terms above the filtration level")
    return bad, killed


def verify_homotopy_identity(n: int, q: int, jobs: int = 1) -> dict:
    """Check d phi + phi d = id modulo lower filtration for every basis element of degree < n."""
    start = time.perf_counter()
    violations = []
    instances = 0
    killed = 0
    for p in range(1, n):
        group = _chain_group(n, q, p)
        pieces = pmap(partial(_homotopy_chunk, n, q, p), chunk_ranges(group.rank, jobs), jobs)
        for piece in pieces:
            for j, bad, k in piece:
                instances += 1
                killed += k
                for msg in bad:
                    violations.append({"decomposition": group.basis[j].encode(), "detail": msg})
    return _report("homotopy", n, q, instances, violations, start, discarded_summands_checked=killed)


class GradedRecord(NamedTuple):
    level: Statistic
    s: int
    betti: int
    torsion: tuple[int, ...]
    chain_rank: int

    def as_dict(self) -> dict:
        return {
            "level": list(self.level.as_tuple()),
            "s": self.s,
            "betti": self.betti,
            "torsion": list(self.torsion),
            "chain_rank": self.chain_rank,
        }


def graded_quotient_homology(n: int, q: int, jobs: int = 1, cache_dir=None) -> list[GradedRecord]:
    """Homology of every nonzero graded piece F_I / F_{I'} in degrees 1..n.

    Only statistics realized by some basis element are visited; I' is the
    previous realized level, which gives the same quotient.
    """
    groups = {s: _chain_group(n, q, s) for s in range(1, n + 1)}
    by_level: dict[Statistic, dict[int, list[int]]] = {}
    for s, g in groups.items():
        for j, b in enumerate(g.basis):
            by_level.setdefault(statistic_of(b), {}).setdefault(s, []).append(j)
    mats = {s: differential_matrix(n, q, s, jobs, cache_dir) for s in range(2, n + 1)}
    records = []
    for level in sorted(by_level):
        idx = by_level[level]

        def piece(s):
            if s == 1 or s == n + 1:
                return None
            return mats[s].submatrix(idx.get(s - 1, []), idx.get(s, []))

        for s in range(1, n + 1):
            rank_s = len(idx.get(s, []))
            out_m = piece(s) if s > 1 else IntMatrix.zeros(0, rank_s)
            in_m = piece(s + 1) if s < n else IntMatrix.zeros(rank_s, 0)
            betti, torsion = homology_at(in_m, out_m)
            records.append(GradedRecord(level, s, betti, torsion, rank_s))
    return records


def verify_graded(n: int, q: int, jobs: int = 1, cache_dir=None) -> dict:
    """Graded pieces are acyclic below n and their top ranks add up to rank H_n."""
    start = time.perf_counter()
    records = graded_quotient_homology(n, q, jobs, cache_dir)
    violations = []
    for r in records:
        if r.s < n and (r.betti or r.torsion):
            violations.append(
                {"decomposition": f"level {r.level}", "detail": f"H_{r.s} = Z^{r.betti} torsion {list(r.torsion)}"}
            )
    graded_top = sum(r.betti for r in records if r.s == n)
    total_top = next(r.betti for r in complex_homology(n, q, jobs, cache_dir) if r.s == n)
    if graded_top != total_top:
        violations.append(
            {"decomposition": "total", "detail": f"sum of graded H_{n} ranks {graded_top} != rank H_{n} {total_top}"}
        )
    levels = len({r.level for r in records})
    return _report(
        "graded",
        n,
        q,
        len(records),
        violations,
        start,
        levels=levels,
        graded_top_rank=graded_top,
        total_top_rank=total_top,
    )
