"""Galerkin-truncated Fourier NLS in the gauged frame, and the comparison
with the resonant system on a frequency set.

    -i d/dt a_n = -a_n |a_n|^2 + sum_{Gamma(n)} a_{n1} conj(a_{n2}) a_{n3} e^{i omega4 t}

Only triples with n1, n2, n3 and n inside the box contribute. The cubic sum is
evaluated through the rotated amplitudes w_n = a_n e^{i|n|^2 t}: the
unrestricted sum over n1 - n2 + n3 = n is the Fourier series of |W|^2 W with
W(x) = sum w_n e^{inx}, computed by a zero-padded FFT (no aliasing once the
grid has at least 4R + 1 points), and the excluded diagonal terms are
removed with two inner products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.integrate import cumulative_trapezoid

from .integrator import Trajectory, integrate
from .lattice import FreqPoint, omega4
from .placement import LambdaSet
from .resonant import BoxState, ResonantSystem
from .toy import ToyState


class BoxTooSmall(RuntimeError):
    pass


@dataclass
class GalerkinBox:
    """Modes {n : |n|_inf <= radius} in sorted (re, im) order."""

    radius: int
    grid: int = 0
    modes: list[FreqPoint] = field(init=False, repr=False)

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        R = self.radius
        need = 4 * R + 1
        self.grid = max(self.grid, sfft.next_fast_len(need))
        if self.grid < need:
            raise ValueError(f"grid {self.grid} would alias; need >= {need}")
        self.modes = [FreqPoint(x, y) for x in range(-R, R + 1) for y in range(-R, R + 1)]
        self._pos = {m: k for k, m in enumerate(self.modes)}
        re = np.array([m.re for m in self.modes])
        im = np.array([m.im for m in self.modes])
        self.ix = re % self.grid
        self.iy = im % self.grid
        self.norm2 = (re * re + im * im).astype(float)
        self.bracket = np.sqrt(1.0 + self.norm2)
        self.shell = np.maximum(np.abs(re), np.abs(im)) == R

    def __len__(self) -> int:
        return len(self.modes)

    def __contains__(self, n: FreqPoint) -> bool:
        return n in self._pos

    def index(self, n: FreqPoint) -> int:
        return self._pos[n]

    @classmethod
    def around(cls, points: Sequence[FreqPoint], factor: int = 3) -> GalerkinBox:
        """Box of radius factor * max |n|_inf over the points."""
        r = max((max(abs(p.re), abs(p.im)) for p in points), default=0)
        return cls(max(1, factor * r))

    def embed(self, state: BoxState) -> np.ndarray:
        v = np.zeros(len(self), dtype=complex)
        for m, a in zip(state.modes, state.amp):
            if m not in self._pos:
                if a != 0:
                    raise BoxTooSmall(f"mode {m} lies outside the box of radius {self.radius}")
                continue
            v[self._pos[m]] = a
        return v

    def state(self, v: np.ndarray, t: float = 0.0) -> BoxState:
        return BoxState(list(self.modes), np.asarray(v, dtype=complex).copy(), t)

    def to_field(self, v: np.ndarray) -> np.ndarray:
        """Grid values of sum v_n e^{i n.x} on the grid x = 2 pi k / grid."""
        g = np.zeros((self.grid, self.grid), dtype=complex)
        g[self.ix, self.iy] = v
        return sfft.ifft2(g) * self.grid ** 2

    def from_field(self, u: np.ndarray) -> np.ndarray:
        return sfft.fft2(u)[self.ix, self.iy] / self.grid ** 2


def trilinear_N(t: float, a: np.ndarray, b: np.ndarray, c: np.ndarray, box: GalerkinBox) -> np.ndarray:
    """(N(t)(a,b,c))_n = -a_n conj(b_n) c_n + sum_{Gamma(n) in box} a1 conj(b2) c3 e^{i omega4 t}."""
    rot = np.exp(1j * box.norm2 * t)
    A, B, C = box.to_field(a * rot), box.to_field(b * rot), box.to_field(c * rot)
    full = np.conj(rot) * box.from_field(A * np.conj(B) * C)
    return full - a * np.vdot(b, c) - c * np.vdot(b, a)


def trilinear_direct(t: float, a: np.ndarray, b: np.ndarray, c: np.ndarray, box: GalerkinBox) -> np.ndarray:
    """Term-by-term evaluation of the same operator; O(|box|^3), for testing."""
    out = np.zeros(len(box), dtype=complex)
    for k, n in enumerate(box.modes):
        acc = -a[k] * np.conj(b[k]) * c[k]
        for k1, n1 in enumerate(box.modes):
            if n1 == n:
                continue
            for k3, n3 in enumerate(box.modes):
                if n3 == n:
                    continue
                n2 = n1 + n3 - n
                if n2 not in box:
                    continue
                k2 = box.index(n2)
                acc += a[k1] * np.conj(b[k2]) * c[k3] * np.exp(1j * omega4(n1, n2, n3, n) * t)
        out[k] = acc
    return out


def fnls_rhs(t: float, a: np.ndarray, box: GalerkinBox) -> np.ndarray:
    """d/dt a_n = i (N(t)(a, a, a))_n."""
    return 1j * trilinear_N(t, a, a, a, box)


def fnls_rhs_ungauged(t: float, a: np.ndarray, box: GalerkinBox, G: float | None = None) -> np.ndarray:
    """-i d/dt a_n = G a_n + (unrestricted sum over n1 - n2 + n3 = n); G = -2 sum|a|^2 by default."""
    if G is None:
        G = -2.0 * float(np.vdot(a, a).real)
    rot = np.exp(1j * box.norm2 * t)
    W = box.to_field(a * rot)
    full = np.conj(rot) * box.from_field(np.abs(W) ** 2 * W)
    return 1j * (G * a + full)


def fnls_mass(a: np.ndarray) -> dict[str, float]:
    return {"mass": float(np.vdot(a, a).real)}


def integrate_fnls(state: BoxState, t_end: float, tol: float, box: GalerkinBox, *,
                   t_eval: np.ndarray | None = None) -> Trajectory:
    a0 = box.embed(state)
    return integrate(lambda t, a: fnls_rhs(t, a, box), a0, state.t, t_end, tol,
                     t_eval=t_eval, monitor=fnls_mass)


# --- physical space -------------------------------------------------------------

@dataclass
class Reconstruction:
    x: np.ndarray
    u: np.ndarray
    Hs: float
    L2_quadrature: float
    L2_plancherel: float


def hs_norm(a: np.ndarray, box: GalerkinBox, s: float) -> float:
    """(sum <n>^{2s} |a_n|^2)^{1/2} with <n> = (1 + |n|^2)^{1/2}."""
    return float(np.sqrt(np.sum(box.bracket ** (2 * s) * np.abs(a) ** 2)))


def reconstruct_and_hs(state: BoxState, s: float, t: float | None = None,
                       box: GalerkinBox | None = None) -> Reconstruction:
    """u(t, x) = e^{2iMt} sum a_n e^{i(n.x + |n|^2 t)} on a uniform grid over [0, 2 pi)^2."""
    t = state.t if t is None else t
    box = box or GalerkinBox.around(state.modes, 1)
    a = box.embed(state)
    M = float(np.vdot(a, a).real)
    v = box.to_field(a * np.exp(1j * box.norm2 * t))
    u = np.exp(2j * M * t) * v
    L = box.grid
    x = 2 * np.pi * np.arange(L) / L
    l2q = math.sqrt(float(np.sum(np.abs(u) ** 2)) * (2 * np.pi / L) ** 2)
    return Reconstruction(x, u, hs_norm(a, box, s), l2q, 2 * np.pi * math.sqrt(M))


# --- approximation experiment ---------------------------------------------------

@dataclass
class ApproxConfig:
    lam: float
    sigma_exp: float = 0.5
    T0: float = 1.0
    C_N: float | None = None          # measured from the data when None
    eps_leak: float = 1e-6
    tol: float = 1e-12
    samples: int = 801

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.sigma_exp < 1:
            raise ValueError("sigma_exp must lie in (0, 1)")
        if self.T0 <= 0:
            raise ValueError("T0 must be positive")

    @property
    def T(self) -> float:
        return self.lam ** 2 * self.T0


@dataclass
class NonresonantTable:
    """Triples of Lambda^3 with omega4 != 0 and output n inside the box."""

    out: np.ndarray
    i1: np.ndarray
    i2: np.ndarray
    i3: np.ndarray
    omega: np.ndarray

    @classmethod
    def build(cls, lam_modes: Sequence[FreqPoint], box: GalerkinBox) -> NonresonantTable:
        rows = []
        for k1, n1 in enumerate(lam_modes):
            for k2, n2 in enumerate(lam_modes):
                for k3, n3 in enumerate(lam_modes):
                    n = n1 - n2 + n3
                    if n1 == n or n3 == n:
                        continue
                    w = omega4(n1, n2, n3, n)
                    if w == 0:
                        continue
                    if n not in box:
                        raise BoxTooSmall(f"non-resonant output {n} lies outside the box")
                    rows.append((box.index(n), k1, k2, k3, w))
        rows.sort()
        arr = np.array(rows, dtype=np.int64).reshape(-1, 5)
        return cls(arr[:, 0].astype(np.intp), arr[:, 1].astype(np.intp),
                   arr[:, 2].astype(np.intp), arr[:, 3].astype(np.intp), arr[:, 4].astype(float))

    def evaluate(self, t: float, c: np.ndarray, size: int) -> np.ndarray:
        """E(t)_n = -sum c1 conj(c2) c3 e^{i omega4 t}, as a vector on the box."""
        terms = -c[self.i1] * np.conj(c[self.i2]) * c[self.i3] * np.exp(1j * self.omega * t)
        return (np.bincount(self.out, weights=terms.real, minlength=size)
                + 1j * np.bincount(self.out, weights=terms.imag, minlength=size))


def error_integral_measure(lambda_set: LambdaSet | Sequence[FreqPoint], c_traj: Trajectory,
                           box: GalerkinBox) -> np.ndarray:
    """||int_0^t E(s) ds||_1 at the trajectory's sample times (trapezoid rule).

    The samples must resolve e^{i omega4 t}; the experiment itself integrates
    E alongside c instead.
    """
    pts = lambda_set.points() if isinstance(lambda_set, LambdaSet) else list(lambda_set)
    table = NonresonantTable.build(pts, box)
    E = np.array([table.evaluate(t, c, len(box)) for t, c in zip(c_traj.t, c_traj.y)])
    if E.shape[0] < 2:
        return np.zeros(E.shape[0])
    integ = cumulative_trapezoid(E, c_traj.t, axis=0, initial=0.0)
    return np.abs(integ).sum(axis=1)


@dataclass
class ApproxResult:
    lam: float
    T: float
    t: np.ndarray = field(repr=False)
    l1_error: np.ndarray = field(repr=False)
    E_integral_l1: np.ndarray = field(repr=False)
    c0_l1: float = 0.0
    sup_error: float = 0.0
    rel_error: float = 0.0
    sup_E_integral: float = 0.0
    B: float = 0.0
    C_N: float = 0.0
    horizon_ratio: float = 0.0      # T / (B^2 log B); should be << 1
    leak: float = 0.0
    mass_drift: float = 0.0
    box_radius: int = 0

    def rows(self):
        c0 = self.c0_l1 or 1.0
        for t, e, ei in zip(self.t, self.l1_error, self.E_integral_l1):
            yield {"t": float(t), "l1_error": float(e), "rel_error": float(e / c0),
                   "E_integral_l1": float(ei)}


def approximation_experiment(lambda_set: LambdaSet, b0: ToyState | np.ndarray, cfg: ApproxConfig,
                             box: GalerkinBox | None = None) -> ApproxResult:
    """Compare full FNLS against the resonant system from identical data on Lambda.

    a(0) = c(0) with c_n(0) = b_{gen(n)}(0) / lambda on Lambda. The resonant
    system carries an extra block accumulating int_0^t E(s) ds on the box.
    """
    b = b0.b if isinstance(b0, ToyState) else np.asarray(b0, dtype=complex)
    if b.size != lambda_set.N:
        raise ValueError("b0 must have one entry per generation")
    pts = lambda_set.points()
    box = box or GalerkinBox.around(pts, 3)
    gen = np.array([j for j, g in enumerate(lambda_set.generations) for _ in g], dtype=np.intp)
    c0 = b[gen] / cfg.lam
    m = len(pts)
    size = len(box)
    rsys = ResonantSystem.build(pts, lambda_set)
    table = NonresonantTable.build(pts, box)

    def aug_rhs(t, y):
        c = y[:m]
        return np.concatenate([rsys.rhs(t, c), table.evaluate(t, c, size)])

    T = cfg.T
    t_eval = np.linspace(0.0, T, cfg.samples)
    y0 = np.concatenate([c0, np.zeros(size, dtype=complex)])
    tr_c = integrate(aug_rhs, y0, 0.0, T, cfg.tol, t_eval=t_eval)
    a_state = BoxState(list(pts), c0, 0.0)
    tr_a = integrate_fnls(a_state, T, cfg.tol, box, t_eval=t_eval)

    lam_idx = np.array([box.index(n) for n in pts], dtype=np.intp)
    c_on_box = np.zeros((t_eval.size, size), dtype=complex)
    c_on_box[:, lam_idx] = tr_c.y[:, :m]
    err = np.abs(tr_a.y - c_on_box).sum(axis=1)
    E_int = np.abs(tr_c.y[:, m:]).sum(axis=1)

    mass_a = np.sum(np.abs(tr_a.y) ** 2, axis=1)
    leak = float((np.sum(np.abs(tr_a.y[:, box.shell]) ** 2, axis=1) / mass_a).max())
    if leak > cfg.eps_leak:
        raise BoxTooSmall(f"mass fraction {leak:.3g} reached the box boundary "
                          f"(threshold {cfg.eps_leak:g}); enlarge the box")
    c0_l1 = float(np.abs(c0).sum())
    C_N = cfg.C_N if cfg.C_N is not None else c0_l1 * cfg.lam
    B = C_N * cfg.lam
    ratio = T / (B * B * math.log(B)) if B > 1 else math.inf
    return ApproxResult(
        lam=cfg.lam, T=T, t=t_eval, l1_error=err, E_integral_l1=E_int, c0_l1=c0_l1,
        sup_error=float(err.max()), rel_error=float(err.max() / c0_l1),
        sup_E_integral=float(E_int.max()), B=B, C_N=C_N, horizon_ratio=ratio, leak=leak,
        mass_drift=tr_a.max_drift()["mass"], box_radius=box.radius,
    )


@dataclass
class LadderReport:
    results: list[ApproxResult]
    decrease_factors: list[float]       # rel_error(lam_k) / rel_error(lam_{k+1})
    error_slope: float                  # d log(rel_error) / d log(lam)
    E_constant: float                   # fitted C in C (lam^-3 + lam^-5 T)
    E_fit_factor: float                 # worst measured/model mismatch (>= 1)

    def passed(self, min_decrease: float = 2.0, max_fit_factor: float = 4.0) -> bool:
        return (all(f >= min_decrease for f in self.decrease_factors)
                and self.E_fit_factor <= max_fit_factor)


def approximation_ladder(lambda_set: LambdaSet, b0, lams: Sequence[float], T0: float = 1.0,
                         box: GalerkinBox | None = None, **cfg_kw) -> LadderReport:
    res = [approximation_experiment(lambda_set, b0, ApproxConfig(lam=l, T0=T0, **cfg_kw), box)
           for l in lams]
    rel = np.array([r.rel_error for r in res])
    L = np.array([r.lam for r in res], dtype=float)
    dec = [float(rel[k] / rel[k + 1]) for k in range(len(res) - 1)]
    slope = float(np.polyfit(np.log(L), np.log(rel), 1)[0]) if len(res) > 1 else float("nan")
    model = L ** -3 + L ** -5 * np.array([r.T for r in res])
    meas = np.array([r.sup_E_integral for r in res])
    C = float(np.exp(np.mean(np.log(meas / model))))
    fit = float(np.max(np.maximum(meas / (C * model), C * model / meas)))
    return LadderReport(res, dec, slope, C, fit)
