"""Combinatorial model of the frequency set: generations and nuclear families.

A point of Sigma is an (N-1)-tuple over the unit square S = {0, 1, 1+i, i}.
Coordinates are stored as one-character symbols ``'0'``, ``'1'``, ``'p'``
(for 1+i) and ``'i'``; the complex values only matter to the placement code.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator

SYMBOLS = ("0", "1", "p", "i")
S1 = ("1", "i")   # parents' pivot values
S2 = ("0", "p")   # children's pivot values


class MalformedPoint(ValueError):
    pass


class NoSuchRelation(LookupError):
    pass


@dataclass(frozen=True, slots=True, order=True)
class CombinatorialPoint:
    coords: tuple[str, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise MalformedPoint("a point needs N - 1 >= 1 coordinates")
        bad = [c for c in self.coords if c not in SYMBOLS]
        if bad:
            raise MalformedPoint(f"unknown symbols {bad!r}")

    @classmethod
    def parse(cls, text: str) -> CombinatorialPoint:
        return cls(tuple(text))

    @property
    def N(self) -> int:
        return len(self.coords) + 1

    def __str__(self) -> str:
        return "".join(self.coords)

    def replace(self, position: int, symbol: str) -> CombinatorialPoint:
        """Copy with the 1-indexed coordinate ``position`` set to ``symbol``."""
        c = list(self.coords)
        c[position - 1] = symbol
        return CombinatorialPoint(tuple(c))


def generation(x: CombinatorialPoint) -> int:
    """Index j such that x lies in S2^(j-1) x S1^(N-j)."""
    k = 0
    while k < len(x.coords) and x.coords[k] in S2:
        k += 1
    if any(c not in S1 for c in x.coords[k:]):
        raise MalformedPoint(f"{x}: an S1 value precedes an S2 value")
    return k + 1


@dataclass(frozen=True, slots=True, order=True)
class NuclearFamily:
    """Four points agreeing everywhere except at the pivot coordinate j.

    ``prefix`` (in S2) and ``suffix`` (in S1) are the shared coordinates.
    Parents F_1, F_i lie in generation j; children F_0, F_{1+i} in j+1.
    """

    j: int
    prefix: tuple[str, ...]
    suffix: tuple[str, ...]

    def member(self, symbol: str) -> CombinatorialPoint:
        return CombinatorialPoint(self.prefix + (symbol,) + self.suffix)

    @property
    def N(self) -> int:
        return len(self.prefix) + len(self.suffix) + 2

    @property
    def F0(self) -> CombinatorialPoint:
        return self.member("0")

    @property
    def F1(self) -> CombinatorialPoint:
        return self.member("1")

    @property
    def Fp(self) -> CombinatorialPoint:
        return self.member("p")

    @property
    def Fi(self) -> CombinatorialPoint:
        return self.member("i")

    def members(self) -> tuple[CombinatorialPoint, ...]:
        """(F_0, F_1, F_{1+i}, F_i): the rectangle's corners in cyclic order."""
        return (self.F0, self.F1, self.Fp, self.Fi)

    def parents(self) -> tuple[CombinatorialPoint, CombinatorialPoint]:
        return (self.F1, self.Fi)

    def children(self) -> tuple[CombinatorialPoint, CombinatorialPoint]:
        return (self.F0, self.Fp)

    @property
    def template(self) -> str:
        return "".join(self.prefix) + "*" + "".join(self.suffix)

    @classmethod
    def from_template(cls, template: str) -> NuclearFamily:
        k = template.index("*")
        return cls(k + 1, tuple(template[:k]), tuple(template[k + 1:]))


def parent_family(x: CombinatorialPoint) -> NuclearFamily:
    """The family in which x is a parent (links generations j and j+1)."""
    j = generation(x)
    if j == x.N:
        raise NoSuchRelation(f"{x} is in the last generation: no spouse or children")
    return NuclearFamily(j, x.coords[:j - 1], x.coords[j:])


def child_family(x: CombinatorialPoint) -> NuclearFamily:
    """The family in which x is a child (links generations j-1 and j)."""
    j = generation(x)
    if j == 1:
        raise NoSuchRelation(f"{x} is in the first generation: no sibling or parents")
    return NuclearFamily(j - 1, x.coords[:j - 2], x.coords[j - 1:])


_SWAP = {"1": "i", "i": "1", "0": "p", "p": "0"}


def spouse(x: CombinatorialPoint) -> CombinatorialPoint:
    j = generation(x)
    parent_family(x)
    return x.replace(j, _SWAP[x.coords[j - 1]])


def children(x: CombinatorialPoint) -> tuple[CombinatorialPoint, CombinatorialPoint]:
    return parent_family(x).children()


def sibling(x: CombinatorialPoint) -> CombinatorialPoint:
    j = generation(x)
    child_family(x)
    return x.replace(j - 1, _SWAP[x.coords[j - 2]])


def parents(x: CombinatorialPoint) -> tuple[CombinatorialPoint, CombinatorialPoint]:
    return child_family(x).parents()


@dataclass(frozen=True)
class Relations:
    spouse: CombinatorialPoint | None
    children: tuple[CombinatorialPoint, CombinatorialPoint] | None
    sibling: CombinatorialPoint | None
    parents: tuple[CombinatorialPoint, CombinatorialPoint] | None


def family_lookup(x: CombinatorialPoint) -> Relations:
    """All defined relations of x; undefined ones are None.

    Use :func:`spouse`, :func:`children`, :func:`sibling`, :func:`parents`
    to get a :class:`NoSuchRelation` error instead of None.
    """
    j = generation(x)
    up = j < x.N
    down = j > 1
    return Relations(
        spouse=spouse(x) if up else None,
        children=children(x) if up else None,
        sibling=sibling(x) if down else None,
        parents=parents(x) if down else None,
    )


def enumerate_generation(N: int, j: int) -> list[CombinatorialPoint]:
    """Sigma_j in canonical order (0 before 1+i, 1 before i)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if not 1 <= j <= N:
        raise ValueError(f"generation {j} outside [1, {N}]")
    return [CombinatorialPoint(p + s)
            for p in product(S2, repeat=j - 1)
            for s in product(S1, repeat=N - j)]


def enumerate_sigma(N: int) -> Iterator[CombinatorialPoint]:
    for j in range(1, N + 1):
        yield from enumerate_generation(N, j)


def enumerate_families(N: int, j: int) -> list[NuclearFamily]:
    """The 2^(N-2) families connecting Sigma_j to Sigma_{j+1}."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if not 1 <= j <= N - 1:
        raise ValueError(f"families connect generations j in [1, {N - 1}], got {j}")
    return [NuclearFamily(j, p, s)
            for p in product(S2, repeat=j - 1)
            for s in product(S1, repeat=N - 1 - j)]


def all_families(N: int) -> list[NuclearFamily]:
    return [F for j in range(1, N) for F in enumerate_families(N, j)]


def common_family(points: Iterable[CombinatorialPoint]) -> NuclearFamily | None:
    """The nuclear family containing every given point, if there is one."""
    pts = list(dict.fromkeys(points))
    if len(pts) < 2:
        return None
    x0 = pts[0]
    diff = {k for x in pts[1:] for k, (a, b) in enumerate(zip(x0.coords, x.coords)) if a != b}
    if len(diff) != 1:
        return None
    k = diff.pop()
    prefix, suffix = x0.coords[:k], x0.coords[k + 1:]
    if any(c not in S2 for c in prefix) or any(c not in S1 for c in suffix):
        return None
    return NuclearFamily(k + 1, prefix, suffix)
