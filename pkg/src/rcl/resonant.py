"""Resonant truncation on a frequency set Lambda.

    d/dt r_n = i ( -r_n |r_n|^2 + sum_{(n1,n2,n3) in Gamma_res(n), all in Lambda} r_{n1} conj(r_{n2}) r_{n3} )

With n2 = n1 + n3 - n one has omega4 = -2 (n1 - n).(n3 - n), so the resonant
triples at n are exactly the right angles at n whose fourth corner lies in
Lambda; they are enumerated by direction hashing in O(|Lambda|^2).
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .integrator import Trajectory, integrate
from .lattice import FreqPoint, is_resonant, primitive_direction
from .placement import LambdaSet
from .toy import ToyState, integrate_toy


@dataclass(frozen=True, slots=True, order=True)
class ResonantQuadruple:
    n: FreqPoint
    n1: FreqPoint
    n2: FreqPoint
    n3: FreqPoint

    def __post_init__(self):
        if not is_resonant(self.n1, self.n2, self.n3, self.n):
            raise ValueError(f"{self} is not a resonant quadruple")


@dataclass
class BoxState:
    """Amplitudes on an ordered list of modes; ``amp[k]`` belongs to ``modes[k]``."""

    modes: list[FreqPoint]
    amp: np.ndarray
    t: float = 0.0
    lambda_ref: LambdaSet | None = field(default=None, repr=False)

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.amp.shape != (len(self.modes),):
            raise ValueError("one amplitude per mode is required")
        if self.lambda_ref is not None:
            allowed = set(self.lambda_ref.points())
            stray = [m for m, a in zip(self.modes, self.amp) if a != 0 and m not in allowed]
            if stray:
                raise ValueError(f"support leaves Lambda at {stray[:3]}")

    def as_dict(self) -> dict[FreqPoint, complex]:
        return {m: complex(a) for m, a in zip(self.modes, self.amp)}

    def l1(self) -> float:
        return float(np.abs(self.amp).sum())

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amp) ** 2)))

    def to_json(self) -> dict:
        return {"t": self.t,
                "modes": [[m.re, m.im, float(a.real), float(a.imag)]
                          for m, a in zip(self.modes, self.amp)]}

    @classmethod
    def from_json(cls, d: dict) -> BoxState:
        modes = [FreqPoint(int(r[0]), int(r[1])) for r in d["modes"]]
        amp = np.array([complex(r[2], r[3]) for r in d["modes"]])
        return cls(modes, amp, float(d["t"]))

    @classmethod
    def from_mapping(cls, amps: Mapping[FreqPoint, complex], t: float = 0.0) -> BoxState:
        modes = sorted(amps)
        return cls(modes, np.array([amps[m] for m in modes], dtype=complex), t)


# --- quadruple enumeration ---------------------------------------------------

_CACHE: dict[tuple[FreqPoint, ...], list[ResonantQuadruple]] = {}


def _points_of(lam) -> tuple[FreqPoint, ...]:
    if isinstance(lam, LambdaSet):
        return tuple(lam.points())
    return tuple(lam)


def resonant_quadruples(lam: LambdaSet | Sequence[FreqPoint]) -> list[ResonantQuadruple]:
    """All (n1, n2, n3) in Gamma_res(n) with n, n1, n2, n3 in Lambda.

    Sorted by (n, n1, n2, n3); cached per point tuple.
    """
    pts = _points_of(lam)
    hit = _CACHE.get(pts)
    if hit is not None:
        return hit
    present = set(pts)
    uniq = sorted(present)
    out = []
    for n in uniq:
        by_dir: dict[tuple[int, int], list[FreqPoint]] = defaultdict(list)
        for m in uniq:
            if m != n:
                d = m - n
                by_dir[primitive_direction(d.re, d.im)].append(m)
        for (dx, dy), ms in by_dir.items():
            perp = primitive_direction(-dy, dx)
            for m3 in by_dir.get(perp, ()):
                for m1 in ms:
                    n2 = m1 + m3 - n
                    if n2 in present:
                        out.append(ResonantQuadruple(n, m1, n2, m3))
    out.sort()
    _CACHE[pts] = out
    return out


def brute_force_quadruples(lam: LambdaSet | Sequence[FreqPoint]) -> list[ResonantQuadruple]:
    """O(|Lambda|^3) oracle straight from the definition."""
    pts = sorted(set(_points_of(lam)))
    present = set(pts)
    out = []
    for n in pts:
        for n1 in pts:
            for n3 in pts:
                n2 = n1 + n3 - n
                if n2 in present and is_resonant(n1, n2, n3, n):
                    out.append(ResonantQuadruple(n, n1, n2, n3))
    out.sort()
    return out


# --- right-hand side ------------------------------------------------------------

@dataclass
class ResonantSystem:
    """Index tables for fast evaluation on a fixed mode ordering."""

    modes: list[FreqPoint]
    quads: list[ResonantQuadruple]
    i: np.ndarray
    i1: np.ndarray
    i2: np.ndarray
    i3: np.ndarray

    @classmethod
    def build(cls, modes: Sequence[FreqPoint], lam: LambdaSet | Sequence[FreqPoint] | None = None):
        modes = list(modes)
        pos = {m: k for k, m in enumerate(modes)}
        quads = resonant_quadruples(modes if lam is None else lam)
        quads = [q for q in quads if all(p in pos for p in (q.n, q.n1, q.n2, q.n3))]
        idx = np.array([[pos[q.n], pos[q.n1], pos[q.n2], pos[q.n3]] for q in quads],
                       dtype=np.intp).reshape(-1, 4)
        return cls(modes, quads, idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3])

    def interaction(self, r: np.ndarray) -> np.ndarray:
        """sum over Gamma_res(n) of r1 conj(r2) r3, accumulated in the fixed quadruple order."""
        terms = r[self.i1] * np.conj(r[self.i2]) * r[self.i3]
        size = r.size
        return (np.bincount(self.i, weights=terms.real, minlength=size)
                + 1j * np.bincount(self.i, weights=terms.imag, minlength=size))

    def rhs(self, t: float, r: np.ndarray) -> np.ndarray:
        return 1j * (-np.abs(r) ** 2 * r + self.interaction(r))

    @property
    def momentum_scale(self) -> float:
        """max |n| over the modes; momentum is logged in these units."""
        return max((abs(complex(m.re, m.im)) for m in self.modes), default=0.0) or 1.0

    def invariants(self, r: np.ndarray) -> dict[str, float]:
        w = np.abs(r) ** 2
        scale = self.momentum_scale
        re = np.array([m.re / scale for m in self.modes], dtype=float)
        im = np.array([m.im / scale for m in self.modes], dtype=float)
        quad = r[self.i1] * np.conj(r[self.i2]) * r[self.i3] * np.conj(r[self.i])
        return {
            "mass": float(w.sum()),
            "momentum_re": float(w @ re),
            "momentum_im": float(w @ im),
            "energy": float(0.5 * quad.real.sum() - 0.5 * np.sum(w * w)),
        }


def rfnls_rhs(state: BoxState) -> np.ndarray:
    sys = ResonantSystem.build(state.modes, state.lambda_ref)
    return sys.rhs(state.t, state.amp)


def integrate_resonant(state: BoxState, t_end: float, tol: float = 1e-10, *,
                       t_eval: np.ndarray | None = None,
                       system: ResonantSystem | None = None) -> Trajectory:
    """Integrate the resonant system, logging mass, momentum and energy.

    Momentum is divided by max |n| so that its drift is comparable with the
    mass drift whatever the size of the frequencies.
    """
    sys = system or ResonantSystem.build(state.modes, state.lambda_ref)
    return integrate(sys.rhs, state.amp, state.t, t_end, tol, t_eval=t_eval,
                     monitor=sys.invariants)


def generation_constant_state(lam: LambdaSet, b: np.ndarray, t: float = 0.0) -> BoxState:
    """r_n = b_{gen(n)} for every n in Lambda."""
    b = np.asarray(b, dtype=complex)
    if b.size != lam.N:
        raise ValueError(f"b has {b.size} entries but Lambda has {lam.N} generations")
    modes, amp = [], []
    for j, g in enumerate(lam.generations):
        for n in g:
            modes.append(n)
            amp.append(b[j])
    return BoxState(modes, np.array(amp), t, lam)


@dataclass
class CollapseReport:
    discrepancy: float
    spread: float
    drift: dict[str, float]
    n_quadruples: int
    t: np.ndarray = field(repr=False)
    discrepancy_series: np.ndarray = field(repr=False)

    def passed(self, discrepancy_tol: float = 1e-8, spread_tol: float = 1e-9) -> bool:
        return self.discrepancy < discrepancy_tol and self.spread < spread_tol


def collapse_check(lam: LambdaSet, b0: ToyState | np.ndarray, t_end: float = 10.0,
                   tol: float = 1e-11, samples: int = 201) -> CollapseReport:
    """Integrate generation-constant data on Lambda and the toy model side by side."""
    b = b0.b if isinstance(b0, ToyState) else np.asarray(b0, dtype=complex)
    t0 = b0.t if isinstance(b0, ToyState) else 0.0
    state = generation_constant_state(lam, b, t0)
    sys = ResonantSystem.build(state.modes, lam)
    t_eval = np.linspace(t0, t_end, samples)
    tr = integrate_resonant(state, t_end, tol, t_eval=t_eval, system=sys)
    tb = integrate_toy(ToyState(b, t0), t_end, tol, t_eval=t_eval)
    gen = np.array([j for j, g in enumerate(lam.generations) for _ in g], dtype=np.intp)
    series = np.abs(tr.y - tb.y[:, gen]).max(axis=1)
    spread = 0.0
    for j in range(lam.N):
        block = tr.y[:, gen == j]
        if block.shape[1] > 1:
            spread = max(spread, float(np.abs(block - block[:, :1]).max()))
    return CollapseReport(
        discrepancy=float(series.max()),
        spread=spread,
        drift=tr.max_drift(),
        n_quadruples=len(sys.quads),
        t=tr.t,
        discrepancy_series=series,
    )


def generation_moments(lam: LambdaSet) -> list[tuple[FreqPoint, int]]:
    """(sum of n, sum of |n|^2) per generation; constant in j on certified sets."""
    out = []
    for g in lam.generations:
        s = FreqPoint(0, 0)
        for n in g:
            s = s + n
        out.append((s, sum(n.norm2() for n in g)))
    return out


def energy_surrogate(lam: LambdaSet, b: np.ndarray) -> float:
    """sum_j |b_j|^2 S_j^(2) + 1/2 sum |b_j|^4 + sum |b_j|^2 |b_{j+1}|^2 with S_j^(2) = sum |n|^2."""
    w = np.abs(np.asarray(b)) ** 2
    s2 = np.array([float(m2) for _, m2 in generation_moments(lam)])
    return float(w @ s2 + 0.5 * np.sum(w * w) + np.sum(w[1:] * w[:-1]))
