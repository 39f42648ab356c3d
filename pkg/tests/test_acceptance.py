"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import random

import pytest

from steinberg_bar.barcomplex import Decomposition, complex_homology, verify_dsquared
from steinberg_bar.exactla import IntMatrix, full_space, smith_normal_form, subspace_from_vectors
from steinberg_bar.koszulcheck import (
    classify_merge,
    graded_quotient_homology,
    sequence_of_decomposition,
    verify_filtration_lemma,
    verify_graded,
    verify_homotopy_identity,
)
from steinberg_bar.steinberg import verify_relations, verify_solomon_tits

GRID = [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2), (3, 3)]


def _strip(report):
    return {k: v for k, v in report.items() if k != "elapsed"}


def _vanishing(n, q):
    bad = []
    for r in complex_homology(n, q, jobs=1):
        if r.s != n and not r.trivial:
            bad.append(f"({n},{q}) H_{r.s}: Z^{r.betti} {r.torsion}")
    return bad


def test_criterion_1_vanishing_below_top(record_criterion):
    bad = [msg for n, q in GRID for msg in _vanishing(n, q)]
    assert record_criterion(1, not bad, f"H_s = 0 for s != n on {len(GRID)} grid points {bad or ''}")


@pytest.mark.long
def test_criterion_1_vanishing_4_2(record_criterion):
    bad = _vanishing(4, 2)
    assert record_criterion("1 (4,2)", not bad, f"H_1..H_3 trivial {bad or ''}")


def _solomon_tits(cases):
    bad = []
    for q, d in cases:
        rep = verify_solomon_tits(full_space(d, q))
        expected = q ** (d * (d - 1) // 2)
        if not (rep["kernel_rank"] == rep["pbw_count"] == expected and rep["cycles"] and rep["lattice_basis"]):
            bad.append(f"q={q} d={d}: {rep}")
    return bad


def test_criterion_2_solomon_tits(record_criterion):
    cases = [(q, d) for q in (2, 3) for d in (1, 2, 3)]
    bad = _solomon_tits(cases)
    assert record_criterion(2, not bad, f"kernel rank = q^C(d,2) = #PBW, unimodular lattice basis, {len(cases)} cases {bad or ''}")


@pytest.mark.long
def test_criterion_2_solomon_tits_d4(record_criterion):
    bad = _solomon_tits([(2, 4)])
    assert record_criterion("2 (d=4,q=2)", not bad, f"kernel rank 64 {bad or ''}")


def test_criterion_3_relations(record_criterion):
    bad, detail = [], []
    for q in (2, 3):
        r2 = verify_relations(2, q)
        r3 = verify_relations(3, q, random_instances=500)
        if r2["violations"] or r3["violations"] or r3["counts"]["relation3"] < 500:
            bad.append(q)
        if r2["counts"]["relation1"] == 0 or (q > 2 and r2["counts"]["relation2"] == 0):
            bad.append(q)
        detail.append(f"q={q}: n=2 {r2['counts']}, n=3 relation3={r3['counts']['relation3']}")
    assert record_criterion(3, not bad, "; ".join(detail))


def _k3_example():
    w1 = subspace_from_vectors([(1, 2, 3), (0, 1, 4)], 3, 7)
    w2 = subspace_from_vectors([(0, 1, 6)], 3, 7)
    d = Decomposition((w1, w2))
    info = classify_merge(d, 1)
    return (
        sequence_of_decomposition(d) == (1, 2, 2)
        and info["after"].counts == (1, 1, 1)
        and info["case"] == 2
        and info["first_common"] == 2
        and info["after"].counts[1] < info["before"].counts[1]
        and info["after"] < info["before"]
    )


def test_criterion_4_filtration_lemma(record_criterion):
    reports = [verify_filtration_lemma(n, q, jobs=1) for n, q in GRID]
    total = sum(r["instances"] for r in reports)
    bad = [(r["n"], r["q"]) for r in reports if r["violations"]]
    example = _k3_example()
    detail = f"{total} merges, violations at {bad or 'none'}; K^3 over F_7 example {'ok' if example else 'FAILED'}"
    assert record_criterion(4, not bad and example, detail)


@pytest.mark.long
def test_criterion_4_filtration_4_2(record_criterion):
    rep = verify_filtration_lemma(4, 2, jobs=2)
    assert record_criterion("4 (4,2)", not rep["violations"], f"{rep['instances']} merges")


def test_criterion_5_homotopy_identity(record_criterion):
    reports = [verify_homotopy_identity(n, q, jobs=1) for n, q in GRID]
    total = sum(r["instances"] for r in reports)
    bad = [(r["n"], r["q"], len(r["violations"])) for r in reports if r["violations"]]
    assert record_criterion(5, not bad, f"{total} basis elements of degree < n {bad or ''}")


@pytest.mark.long
def test_criterion_5_homotopy_4_2(record_criterion):
    rep = verify_homotopy_identity(4, 2, jobs=2)
    assert record_criterion("5 (4,2)", not rep["violations"], f"{rep['instances']} basis elements")


def test_criterion_6_graded_vanishing(record_criterion):
    bad, levels = [], 0
    for n, q in GRID:
        rep = verify_graded(n, q, jobs=1)
        levels += rep["levels"]
        if rep["violations"] or rep["graded_top_rank"] != rep["total_top_rank"]:
            bad.append((n, q))
        records = graded_quotient_homology(n, q)
        if any(r.s < n and (r.betti or r.torsion) for r in records):
            bad.append((n, q))
    assert record_criterion(6, not bad, f"{levels} graded pieces acyclic below n, top ranks add up {bad or ''}")


@pytest.mark.long
def test_criterion_6_graded_4_2(record_criterion):
    rep = verify_graded(4, 2, jobs=2)
    assert record_criterion("6 (4,2)", not rep["violations"], f"{rep['levels']} levels, top rank {rep['total_top_rank']}")


def _random_snf_failures(count=100, seed=2024):
    rng = random.Random(seed)
    bad = []
    for k in range(count):
        r, c = rng.randint(1, 30), rng.randint(1, 30)
        m = IntMatrix.from_dense([[rng.randint(-9, 9) for _ in range(c)] for _ in range(r)])
        res = smith_normal_form(m, transforms=True)
        diag = [x for x in res.diagonal if x]
        if res.left @ m @ res.right != res.diagonal_matrix(r, c) or any(b % a for a, b in zip(diag, diag[1:])):
            bad.append(k)
    return bad


def test_criterion_7_infrastructure(record_criterion):
    bad = []
    checks = 0
    for n, q in GRID:
        rep = verify_dsquared(n, q, jobs=1)
        checks += rep["composites_checked"] + rep["face_identities_checked"]
        if rep["violations"]:
            bad.append(f"dsquared ({n},{q})")
    suites = [verify_filtration_lemma, verify_homotopy_identity, verify_dsquared, verify_graded]
    for n, q in GRID:
        for suite in suites:
            if _strip(suite(n, q, 1)) != _strip(suite(n, q, 3)):
                bad.append(f"{suite.__name__} ({n},{q}) serial != parallel")
        if _strip(verify_relations(n, q)) != _strip(verify_relations(n, q)):
            bad.append(f"relations ({n},{q}) not reproducible")
        if complex_homology(n, q, jobs=1) != complex_homology(n, q, jobs=3):
            bad.append(f"homology ({n},{q}) serial != parallel")
    snf_bad = _random_snf_failures()
    if snf_bad:
        bad.append(f"SNF reconstruction failed for samples {snf_bad}")
    assert record_criterion(7, not bad, f"{checks} d^2 / face identity checks, serial = parallel, 100 SNF reconstructions {bad or ''}")


@pytest.mark.long
def test_criterion_7_dsquared_4_2(record_criterion):
    rep = verify_dsquared(4, 2, jobs=2)
    assert record_criterion("7 (4,2)", not rep["violations"], f"{rep['composites_checked'] + rep['face_identities_checked']} checks")
