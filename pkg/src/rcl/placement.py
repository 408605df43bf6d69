"""Placement of the combinatorial model Sigma into the Gaussian integers.

The complete placement function is determined by its values on the first
generation and one Pythagorean phase e^{i theta(F)} per nuclear family.
Everything is carried in exact Q[i] arithmetic; the integer frequency set is
obtained at the end by clearing denominators.

The good placement is found by a seeded randomized search around the model
example, and every candidate is certified exactly by :func:`certify_values`.
"""
from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Mapping, Sequence

from .lattice import FreqPoint, RationalComplex, lcd, primitive_direction
from .sigma import (
    CombinatorialPoint,
    NuclearFamily,
    all_families,
    common_family,
    enumerate_families,
    enumerate_generation,
    enumerate_sigma,
)

ONE = RationalComplex(1)
HALF = RationalComplex(1, 0, 2)
SYMBOL_VALUE = {
    "0": RationalComplex(0),
    "1": RationalComplex(1),
    "p": RationalComplex(1, 1),
    "i": RationalComplex(0, 1),
}


class PlacementError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    """Raised when no candidate passed certification within the budget."""

    def __init__(self, message: str, best: PlacementFunction | None, violations: list[str]):
        super().__init__(message)
        self.best = best
        self.violations = violations


@dataclass
class PlacementFunction:
    N: int
    initial: dict[CombinatorialPoint, RationalComplex]
    angles: dict[NuclearFamily, RationalComplex]
    values: dict[CombinatorialPoint, RationalComplex]

    def generation_values(self, j: int) -> list[RationalComplex]:
        return [self.values[x] for x in enumerate_generation(self.N, j)]

    def dilate(self, k: RationalComplex | int) -> PlacementFunction:
        """Multiply every value (and the initial placement) by k."""
        k = k if isinstance(k, RationalComplex) else RationalComplex(k)
        return PlacementFunction(
            self.N,
            {x: v * k for x, v in self.initial.items()},
            dict(self.angles),
            {x: v * k for x, v in self.values.items()},
        )


def place_recursive(f1: Mapping[CombinatorialPoint, RationalComplex],
                    angles: Mapping[NuclearFamily, RationalComplex],
                    N: int | None = None) -> PlacementFunction:
    """Extend a first-generation placement through every nuclear family.

    f(F_{1+i}) = (1+e)/2 f(F_1) + (1-e)/2 f(F_i) and
    f(F_0)     = (1-e)/2 f(F_1) + (1+e)/2 f(F_i),  e = e^{i theta(F)},
    so the four values form a rectangle whose diagonals meet at angle theta.
    """
    if N is None:
        if not f1:
            raise PlacementError("empty initial placement and no N given")
        N = next(iter(f1)).N
    values: dict[CombinatorialPoint, RationalComplex] = {}
    for x in enumerate_generation(N, 1):
        if x not in f1:
            raise PlacementError(f"initial placement missing {x}")
        values[x] = f1[x]
    for j in range(1, N):
        for F in enumerate_families(N, j):
            if F not in angles:
                raise PlacementError(f"no angle for family {F.template} (j={j})")
            e = angles[F]
            # children sit at centre +- e * half-diagonal of the parents' segment
            centre = (values[F.F1] + values[F.Fi]) * HALF
            turned = e * (values[F.F1] - values[F.Fi]) * HALF
            values[F.Fp] = centre + turned
            values[F.F0] = centre - turned
    return PlacementFunction(N, dict(f1), dict(angles), values)


def symbol_product(x: CombinatorialPoint) -> RationalComplex:
    out = ONE
    for c in x.coords:
        out = out * SYMBOL_VALUE[c]
    return out


def model_example(N: int, R: int) -> PlacementFunction:
    """f_1(z) = R z_1 ... z_{N-1} with every family at angle pi/2."""
    if N < 2 or R < 1:
        raise ValueError("model example needs N >= 2 and R >= 1")
    f1 = {x: symbol_product(x) * R for x in enumerate_generation(N, 1)}
    angles = {F: RationalComplex(0, 1) for F in all_families(N)}
    return place_recursive(f1, angles, N)


def pythagorean_angles(max_hypotenuse: int) -> list[RationalComplex]:
    """Unit complex rationals (a + b i)/c with c <= max_hypotenuse.

    Generated from primitive triples a^2 + b^2 = c^2 by all sign changes and
    the swap a <-> b, together with the axis phases 1, i, -1, -i.
    """
    out = {RationalComplex(1), RationalComplex(0, 1), RationalComplex(-1), RationalComplex(0, -1)}
    # Euclid's parametrization: c = m^2 + n^2 with m > n > 0, coprime, opposite parity.
    m = 2
    while m * m + 1 <= max_hypotenuse:
        for n in range(1, m):
            c = m * m + n * n
            if c > max_hypotenuse or (m - n) % 2 == 0 or gcd(m, n) != 1:
                continue
            a, b = m * m - n * n, 2 * m * n
            for p, q in ((a, b), (b, a)):
                for sp in (1, -1):
                    for sq in (1, -1):
                        out.add(RationalComplex(sp * p, sq * q, c))
        m += 1
    return sorted(out, key=lambda q: (q.den, q.re, q.im))


# ---------------------------------------------------------------------------
# certification


@dataclass
class Certificate:
    N: int
    s: Fraction
    passed: bool = False
    nonzero: bool = False
    zero_witnesses: list[str] = field(default_factory=list)
    injective: bool = False
    injectivity_witnesses: list[list[str]] = field(default_factory=list)
    integral: bool = False
    lcd: int = 1
    content: int = 1
    min_norm2: int = 0
    max_norm2: int = 0
    magnitude_constant: float = math.inf
    magnitude_bound: float = math.inf
    magnitude_ok: bool = False
    scanned: bool = False
    right_triangles: int = 0
    right_triangles_oriented: int = 0
    expected_right_triangles: int = 0
    faithful: bool = False
    faithfulness_witnesses: list[list[str]] = field(default_factory=list)
    closed: bool = False
    closure_witnesses: list[list[str]] = field(default_factory=list)
    moments_constant: bool = False
    norm_sums: list = field(default_factory=list)
    explosion_ratio: float | None = None
    explosion_threshold: float | None = None
    explosion_ok: bool = False

    def violations(self) -> list[str]:
        out = []
        for name in ("nonzero", "injective", "integral", "magnitude_ok",
                     "faithful", "closed", "moments_constant", "explosion_ok"):
            if not getattr(self, name):
                out.append(name)
        return out

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["s"] = str(self.s)
        for k in ("magnitude_constant", "magnitude_bound"):
            if math.isinf(d[k]):
                d[k] = None
        return d

    @classmethod
    def from_json(cls, d: dict) -> Certificate:
        d = dict(d)
        d["s"] = Fraction(d["s"])
        for k in ("magnitude_constant", "magnitude_bound"):
            if d.get(k) is None:
                d[k] = math.inf
        return cls(**d)


def explosion_threshold(N: int, s: Fraction) -> float:
    return 0.5 * 2.0 ** (float(s - 1) * (N - 5))


def norm_power_sum(points: Sequence[FreqPoint], s: Fraction):
    """sum |n|^{2s}: exact int when 2s is an even integer, float otherwise."""
    s = Fraction(s)
    if s.denominator == 1 and s >= 0:
        k = int(s)
        return sum(n.norm2() ** k for n in points)
    total = 0.0
    sf = float(s)
    for n in points:
        n2 = n.norm2()
        if n2:
            total += math.exp(sf * math.log(n2))
    return total


def _integerize(values: Mapping[CombinatorialPoint, RationalComplex]):
    """Scale by the LCD, then divide out the common integer content."""
    L = lcd(values.values())
    ints = {x: (v.re * (L // v.den), v.im * (L // v.den)) for x, v in values.items()}
    g = 0
    for re, im in ints.values():
        g = gcd(g, gcd(re, im))
    g = g or 1
    return L, g, {x: FreqPoint(re // g, im // g) for x, (re, im) in ints.items()}


def find_right_triangles(points: Sequence[FreqPoint]) -> list[tuple[int, int, int]]:
    """All right triangles (apex, leg1, leg2) with leg1 < leg2, as indices.

    For each apex the other points are bucketed by the primitive direction of
    the connecting vector, so perpendicular legs meet by hash lookup.
    """
    out = []
    n = len(points)
    for a in range(n):
        pa = points[a]
        buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        for b in range(n):
            if b == a:
                continue
            pb = points[b]
            buckets[primitive_direction(pb.re - pa.re, pb.im - pa.im)].append(b)
        for (dx, dy), legs in buckets.items():
            perp = primitive_direction(-dy, dx)
            if perp <= (dx, dy) or perp not in buckets:
                continue
            for b in legs:
                for c in buckets[perp]:
                    out.append((a, min(b, c), max(b, c)))
    out.sort()
    return out


def brute_force_right_triangles(points: Sequence[FreqPoint]) -> list[tuple[int, int, int]]:
    """O(n^3) oracle for :func:`find_right_triangles` using plain dot products."""
    out = []
    n = len(points)
    xs = [p.re for p in points]
    ys = [p.im for p in points]
    for a in range(n):
        ax, ay = xs[a], ys[a]
        vx = [x - ax for x in xs]
        vy = [y - ay for y in ys]
        for b in range(n):
            if b == a:
                continue
            bx, by = vx[b], vy[b]
            for c in range(b + 1, n):
                if c != a and bx * vx[c] + by * vy[c] == 0:
                    out.append((a, b, c))
    out.sort()
    return out


def certify_values(N: int, values: Mapping[CombinatorialPoint, RationalComplex],
                   s: Fraction, *, magnitude_bound: float | None = None,
                   max_scan_N: int = 9, allow_large: bool = False,
                   max_witnesses: int = 10, fail_fast: bool = False) -> Certificate:
    """Exact certificate for a placement given by its values on Sigma."""
    s = Fraction(s)
    cert = Certificate(N=N, s=s)
    cert.magnitude_bound = float(8 ** N) if magnitude_bound is None else float(magnitude_bound)
    labels = list(enumerate_sigma(N))
    missing = [x for x in labels if x not in values]
    if missing:
        raise PlacementError(f"placement not total on Sigma: missing {missing[0]}")

    zeros = [str(x) for x in labels if values[x].is_zero()]
    cert.nonzero = not zeros
    cert.zero_witnesses = zeros[:max_witnesses]

    by_value: dict[RationalComplex, list[CombinatorialPoint]] = defaultdict(list)
    for x in labels:
        by_value[values[x]].append(x)
    clashes = [[str(x) for x in xs] for xs in by_value.values() if len(xs) > 1]
    cert.injective = not clashes
    cert.injectivity_witnesses = clashes[:max_witnesses]

    cert.lcd, cert.content, pts = _integerize(values)
    cert.integral = all(isinstance(p.re, int) and isinstance(p.im, int) for p in pts.values())
    norms = [pts[x].norm2() for x in labels]
    cert.min_norm2, cert.max_norm2 = min(norms), max(norms)
    if cert.min_norm2 > 0:
        cert.magnitude_constant = math.sqrt(cert.max_norm2 / cert.min_norm2)
    cert.magnitude_ok = cert.nonzero and cert.magnitude_constant <= cert.magnitude_bound

    gens = [[pts[x] for x in enumerate_generation(N, j)] for j in range(1, N + 1)]
    sums_n = [(sum(p.re for p in g), sum(p.im for p in g)) for g in gens]
    sums_n2 = [sum(p.norm2() for p in g) for g in gens]
    cert.moments_constant = len(set(sums_n)) == 1 and len(set(sums_n2)) == 1

    cert.norm_sums = [norm_power_sum(g, s) for g in gens]
    if N >= 5:
        S3, Sn2 = cert.norm_sums[2], cert.norm_sums[N - 3]
        cert.explosion_threshold = explosion_threshold(N, s)
        if S3:
            cert.explosion_ratio = float(Fraction(Sn2, S3)) if isinstance(S3, int) and isinstance(Sn2, int) \
                else float(Sn2) / float(S3)
            cert.explosion_ok = cert.explosion_ratio > cert.explosion_threshold
    else:
        cert.explosion_ok = True

    families = all_families(N)
    cert.expected_right_triangles = 4 * len(families)
    if fail_fast and not (cert.nonzero and cert.injective and cert.explosion_ok):
        return cert
    if not (cert.nonzero and cert.injective):
        return cert
    if N > max_scan_N and not allow_large:
        raise PlacementError(f"faithfulness scan capped at N <= {max_scan_N}; pass allow_large=True")

    point_list = [pts[x] for x in labels]
    where = {p: k for k, p in enumerate(point_list)}
    tris = find_right_triangles(point_list)
    cert.scanned = True
    cert.right_triangles = len(tris)
    cert.right_triangles_oriented = 2 * len(tris)
    bad_faith, bad_close = [], []
    for a, b, c in tris:
        F = common_family((labels[a], labels[b], labels[c]))
        if F is None:
            bad_faith.append([str(labels[a]), str(labels[b]), str(labels[c])])
        pd = point_list[b] + point_list[c] - point_list[a]
        d = where.get(pd)
        if d is None or F is None or common_family((labels[a], labels[b], labels[c], labels[d])) != F:
            bad_close.append([str(labels[a]), str(labels[b]), str(labels[c])])
        if fail_fast and (bad_faith or bad_close):
            break
    cert.faithful = not bad_faith
    cert.closed = not bad_close
    cert.faithfulness_witnesses = bad_faith[:max_witnesses]
    cert.closure_witnesses = bad_close[:max_witnesses]
    # every family rectangle contributes exactly four right triangles
    if cert.faithful and cert.right_triangles != cert.expected_right_triangles:
        cert.faithful = False
    cert.passed = not cert.violations()
    return cert


def verify_lambda(f: PlacementFunction, s: Fraction, **kwargs) -> Certificate:
    return certify_values(f.N, f.values, Fraction(s), **kwargs)


# ---------------------------------------------------------------------------
# the certified frequency set


@dataclass
class LambdaSet:
    N: int
    s: Fraction
    labels: list[list[CombinatorialPoint]]
    generations: list[list[FreqPoint]]
    certificate: Certificate
    seed: int | None = None
    config: dict = field(default_factory=dict)

    @property
    def index(self) -> dict[CombinatorialPoint, FreqPoint]:
        return {x: n for lab, gen in zip(self.labels, self.generations) for x, n in zip(lab, gen)}

    def points(self) -> list[FreqPoint]:
        return [n for g in self.generations for n in g]

    def generation_of(self) -> dict[FreqPoint, int]:
        return {n: j for j, g in enumerate(self.generations, start=1) for n in g}

    def families(self) -> list[tuple[NuclearFamily, tuple[FreqPoint, ...]]]:
        idx = self.index
        if not self.labels or len(self.labels[0]) != 2 ** (self.N - 1):
            return []
        return [(F, tuple(idx[x] for x in F.members())) for F in all_families(self.N)]

    def __len__(self) -> int:
        return sum(len(g) for g in self.generations)

    def dilate(self, k: int) -> LambdaSet:
        gens = [[n * k for n in g] for g in self.generations]
        return LambdaSet(self.N, self.s, self.labels, gens, self.certificate, self.seed, dict(self.config))

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "s": str(self.s),
            "seed": self.seed,
            "config": self.config,
            "labels": [[str(x) for x in lab] for lab in self.labels],
            "generations": [[n.to_json() for n in g] for g in self.generations],
            "families": [{"j": F.j, "template": F.template, "points": [n.to_json() for n in pts]}
                         for F, pts in self.families()],
            "certificate": self.certificate.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> LambdaSet:
        labels = [[CombinatorialPoint.parse(t) for t in lab] for lab in d["labels"]]
        gens = [[FreqPoint.from_json(p) for p in g] for g in d["generations"]]
        return cls(int(d["N"]), Fraction(d["s"]), labels, gens,
                   Certificate.from_json(d["certificate"]), d.get("seed"), d.get("config", {}))

    @classmethod
    def from_generations(cls, generations: Sequence[Sequence[FreqPoint]], s=Fraction(1)) -> LambdaSet:
        """Uncertified frequency set with anonymous labels (for small hand-built examples)."""
        N = len(generations)
        labels = []
        for j, g in enumerate(generations, start=1):
            if N >= 2 and len(g) == 2 ** (N - 1):
                labels.append(enumerate_generation(N, j))
            else:
                labels.append([])
        return cls(N, Fraction(s), labels, [list(g) for g in generations], Certificate(N=N, s=Fraction(s)))


def unit_square_lambda() -> LambdaSet:
    """The N = 2 model {1, i} -> {0, 1+i}: Sigma itself placed at f_1 = identity."""
    return LambdaSet.from_generations([[FreqPoint(1, 0), FreqPoint(0, 1)],
                                       [FreqPoint(0, 0), FreqPoint(1, 1)]])


def verify_lambda_set(ls: LambdaSet, s: Fraction | None = None, **kwargs) -> Certificate:
    """Re-certify a frequency set read back from disk."""
    values = {x: RationalComplex.from_point(n) for x, n in ls.index.items()}
    return certify_values(ls.N, values, ls.s if s is None else Fraction(s), **kwargs)


def norm_sums(ls: LambdaSet | Sequence[Sequence[FreqPoint]] | PlacementFunction, s) -> list:
    """S_j = sum over generation j of |n|^{2s} (a multiset sum).

    Exact integers when 2s is an even integer, floats otherwise.
    """
    s = Fraction(s)
    if isinstance(ls, PlacementFunction):
        gens = []
        for j in range(1, ls.N + 1):
            vals = ls.generation_values(j)
            if s.denominator == 1:
                gens.append(sum(v.abs2() ** int(s) for v in vals))
            else:
                gens.append(sum(float(v.abs2()) ** float(s) for v in vals))
        return [int(g) if isinstance(g, Fraction) and g.denominator == 1 else g for g in gens]
    gens = ls.generations if isinstance(ls, LambdaSet) else ls
    return [norm_power_sum(g, s) for g in gens]


def _random_f1(N: int, rng: random.Random, R_model: int, D: int, jitter: float):
    J = max(1, int(round(jitter * R_model * D)))
    f1 = {}
    for x in enumerate_generation(N, 1):
        base = symbol_product(x) * R_model
        f1[x] = base + RationalComplex(rng.randint(-J, J), rng.randint(-J, J), D)
    return f1


def construct_good_lambda(N: int, s, R_target: int, seed: int, budget: int = 200, *,
                          D: int = 7, R_model: int = 1000, jitter: float = 0.3,
                          max_hypotenuse: int = 65, angle_window: float | None = None,
                          magnitude_bound: float | None = None,
                          max_scan_N: int = 9, allow_large: bool = False) -> LambdaSet:
    """Randomized search for a certified placement, then integer scaling.

    Each attempt perturbs the model example's first generation on the grid
    (Z + Zi)/D and draws every family phase from the Pythagorean pool
    (the two phases +-1, which make a child coincide with a parent, are
    excluded). Attempts are seeded from ``seed`` so the result is reproducible.

    With ``angle_window`` set, phases are restricted to within that many
    radians of pi/2. Together with a small ``jitter`` this stays close to
    the model example and keeps its norm explosion for larger N and s.
    """
    s = Fraction(s)
    if N < 6:
        raise ValueError("construct_good_lambda needs N >= 6")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if N > max_scan_N and not allow_large:
        raise PlacementError(f"N = {N} exceeds the scan cap {max_scan_N}; pass allow_large=True")
    pool = [q for q in pythagorean_angles(max_hypotenuse) if q.im != 0]
    if angle_window is not None:
        pool = [q for q in pool
                if abs(math.atan2(q.im, q.re) - math.pi / 2) <= angle_window]
        if not pool:
            raise ValueError("angle_window leaves no Pythagorean phases; raise max_hypotenuse")
    families = all_families(N)
    master = random.Random(seed)
    best, best_violations = None, None
    for attempt in range(budget):
        rng = random.Random(master.getrandbits(64))
        f1 = _random_f1(N, rng, R_model, D, jitter)
        angles = {F: pool[rng.randrange(len(pool))] for F in families}
        f = place_recursive(f1, angles, N)
        cert = verify_lambda(f, s, magnitude_bound=magnitude_bound, max_scan_N=max_scan_N,
                             allow_large=allow_large, fail_fast=True)
        if cert.passed:
            cert = verify_lambda(f, s, magnitude_bound=magnitude_bound,
                                 max_scan_N=max_scan_N, allow_large=allow_large)
            return _finalize(f, cert, s, R_target, seed, attempt, dict(
                D=D, R_model=R_model, jitter=jitter, max_hypotenuse=max_hypotenuse,
                angle_window=angle_window, budget=budget, R_target=R_target))
        v = cert.violations()
        if best is None or len(v) < len(best_violations):
            best, best_violations = f, v
    raise BudgetExhausted(f"no certified placement in {budget} attempts", best, best_violations or [])


def _finalize(f: PlacementFunction, cert: Certificate, s: Fraction, R_target: int,
              seed: int, attempt: int, config: dict) -> LambdaSet:
    _, _, pts = _integerize(f.values)
    k = _least_scale(min(p.norm2() for p in pts.values()), R_target)
    labels = [enumerate_generation(f.N, j) for j in range(1, f.N + 1)]
    gens = [[pts[x] * k for x in lab] for lab in labels]
    config = dict(config, attempt=attempt, scale=k)
    final = LambdaSet(f.N, s, labels, gens, cert, seed, config)
    if k > 1:
        final.certificate = verify_lambda_set(final)
    return final


def _least_scale(min_norm2: int, R: int) -> int:
    """Smallest integer k with k^2 * min_norm2 >= R^2."""
    k = max(1, math.isqrt(R * R // max(min_norm2, 1)))
    while k * k * min_norm2 < R * R:
        k += 1
    while k > 1 and (k - 1) ** 2 * min_norm2 >= R * R:
        k -= 1
    return k
