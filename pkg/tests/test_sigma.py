import pytest

from rcl.sigma import (CombinatorialPoint, MalformedPoint, NoSuchRelation, children, common_family,
                       enumerate_families, enumerate_generation, enumerate_sigma, family_lookup,
                       generation, parents, sibling, spouse)

C = CombinatorialPoint.parse
X = C("0p0ii1")


@pytest.mark.parametrize("text, j", [("0p0ii1", 4), ("1", 1), ("0", 2), ("iiii", 1), ("pp0p", 5)])
def test_generation(text, j):
    assert generation(C(text)) == j


def test_generation_rejects_misordered():
    with pytest.raises(MalformedPoint):
        generation(C("10"))
    with pytest.raises(MalformedPoint):
        C("0x")


def test_relations_of_worked_point():
    assert spouse(X) == C("0p01i1")
    assert children(X) == (C("0p00i1"), C("0p0pi1"))
    assert sibling(X) == C("0ppii1")
    assert parents(X) == (C("0p1ii1"), C("0piii1"))
    rel = family_lookup(X)
    assert rel.spouse == spouse(X) and rel.children == children(X)


def test_first_generation_has_no_parents():
    x = C("1")
    with pytest.raises(NoSuchRelation):
        sibling(x)
    with pytest.raises(NoSuchRelation):
        parents(x)


def test_family_counts():
    fams = enumerate_families(2, 1)
    assert len(fams) == 1
    assert set(fams[0].members()) == {C("0"), C("1"), C("p"), C("i")}
    assert len(enumerate_families(7, 3)) == 32


@pytest.mark.parametrize("N", range(2, 11))
def test_counting(N):
    for j in range(1, N + 1):
        assert len(enumerate_generation(N, j)) == 2 ** (N - 1)
    assert sum(1 for _ in enumerate_sigma(N)) == N * 2 ** (N - 1)
    for j in range(1, N):
        assert len(enumerate_families(N, j)) == 2 ** (N - 2)


@pytest.mark.parametrize("N", range(2, 9))
def test_partition(N):
    for j in range(1, N):
        fams = enumerate_families(N, j)
        par = [p for F in fams for p in F.parents()]
        chi = [c for F in fams for c in F.children()]
        assert sorted(par) == sorted(enumerate_generation(N, j))
        assert sorted(chi) == sorted(enumerate_generation(N, j + 1))


@pytest.mark.parametrize("N", range(2, 7))
def test_lookup_consistency(N):
    for j in range(1, N):
        for F in enumerate_families(N, j):
            for p in F.parents():
                assert set(children(p)) == set(F.children())
                assert spouse(p) in F.parents() and spouse(p) != p
            for c in F.children():
                assert set(parents(c)) == set(F.parents())
                assert sibling(c) in F.children() and sibling(c) != c
            assert common_family(F.members()) == F


@pytest.mark.parametrize("N", range(3, 8))
def test_sibling_is_not_spouse(N):
    for j in range(2, N):
        for x in enumerate_generation(N, j):
            assert sibling(x) != spouse(x)
