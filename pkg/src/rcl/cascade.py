"""Energy transfer along the toy-model chain: seeded data near T_start,
peak detection, shooting over the seed modes, the Sobolev-proxy ratio and
the rate structure of the flow through a single circle T_j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .integrator import Trajectory
from .placement import LambdaSet, norm_sums
from .toy import (SQRT3, ToyState, fit_rate, ghat_t0, integrate_toy, join_pair,
                  slider, to_local_coords)

PEAK_FLOOR = 1e-4
PEAK_NEAR = 0.99
SAMPLE_DT = 0.02


class BudgetExhausted(RuntimeError):
    def __init__(self, message: str, best: ShootResult):
        super().__init__(message)
        self.best = best


@dataclass
class CascadeConfig:
    """Parameters of a cascade run.

    The chain runs from ``start_mode`` to ``target_mode``; by default these
    are 3 and N - 2 (for N < 5 they fall back to 1 and N).
    """

    N: int
    epsilon: float = 0.1
    sigma_toy: float = 0.05
    seed: int = 0
    horizon: float = 40.0
    shoot_budget: int = 200
    tol: float = 1e-10
    decay: float = 0.1              # ratio between successive seed amplitudes
    start_mode: int | None = None
    target_mode: int | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.sigma_toy <= 0.1:
            raise ValueError("sigma_toy must lie in (0, 0.1]")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.shoot_budget < 1:
            raise ValueError("shoot_budget must be >= 1")
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        s, t = self.start, self.target
        if not 1 <= s <= t <= self.N:
            raise ValueError(f"need 1 <= start ({s}) <= target ({t}) <= N ({self.N})")

    @property
    def start(self) -> int:
        if self.start_mode is not None:
            return self.start_mode
        return 3 if self.N >= 5 else 1

    @property
    def target(self) -> int:
        if self.target_mode is not None:
            return self.target_mode
        return self.N - 2 if self.N >= 5 else self.N

    @property
    def seed_modes(self) -> list[int]:
        """Modes beyond start+1 up to the target, whose seeds are shot over."""
        return list(range(self.start + 2, self.target + 1))

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Peak:
    j: int
    t_peak: float
    peak_mass: float


@dataclass
class PeakSchedule:
    peaks: list[Peak]
    final_concentration: float      # max_t |b_target(t)|^2
    target: int
    local_maxima: dict[int, list[tuple[float, float]]] = field(default_factory=dict)

    def times(self, modes: Sequence[int]) -> list[float]:
        by = {p.j: p.t_peak for p in self.peaks}
        return [by[j] for j in modes if j in by]

    def strictly_increasing(self, start: int, target: int) -> bool:
        by = {p.j: p.t_peak for p in self.peaks}
        modes = range(start, target + 1)
        if any(j not in by for j in modes):
            return False
        ts = [by[j] for j in modes]
        return all(a < b for a, b in zip(ts, ts[1:]))

    def to_json(self) -> dict:
        return {"target": self.target,
                "final_concentration": self.final_concentration,
                "peaks": [asdict(p) for p in self.peaks],
                "local_maxima": {str(j): v for j, v in self.local_maxima.items()}}


# --- data ------------------------------------------------------------------------

def _normalize(b: np.ndarray, center: int) -> np.ndarray:
    b = b.copy()
    rest = float(np.sum(np.abs(b) ** 2)) - abs(b[center - 1]) ** 2
    if rest >= 1:
        raise ValueError("seed modes carry all the mass")
    b[center - 1] = math.sqrt(1 - rest)
    return b


def build_cascade_data(cfg: CascadeConfig, scheme: str = "slider-seed",
                       params: np.ndarray | None = None) -> ToyState:
    """Unit-mass data concentrated at the start mode.

    slider-seed: the next mode lies on the unstable direction (c^+ = sigma_toy
    in the start mode's coordinates); modes start+2..target get amplitudes
    sigma_toy * decay^k with phases. ``params`` = (phase, log-amplitude
    offset) per seed mode overrides those defaults. random-phase: every other
    mode gets a random phase and amplitude up to epsilon/2.
    """
    N, s = cfg.N, cfg.start
    b = np.zeros(N, dtype=complex)
    if scheme == "slider-seed":
        if N == 2 and s == 1 and cfg.target == 2:
            return ToyState(slider(-ghat_t0(cfg.sigma_toy))[0])
        if s + 1 <= N:
            b[s] = join_pair(0.0, cfg.sigma_toy)
        modes = cfg.seed_modes
        p = np.zeros(2 * len(modes)) if params is None else np.asarray(params, dtype=float)
        if p.size != 2 * len(modes):
            raise ValueError(f"expected {2 * len(modes)} shooting parameters")
        for k, j in enumerate(modes):
            amp = cfg.sigma_toy * cfg.decay ** (k + 1) * math.exp(p[2 * k + 1])
            b[j - 1] = min(amp, cfg.epsilon) * np.exp(1j * p[2 * k])
    elif scheme == "random-phase":
        rng = np.random.default_rng(cfg.seed)
        amps = rng.uniform(0, cfg.epsilon / 2, size=N)
        phases = rng.uniform(0, 2 * np.pi, size=N)
        b = amps * np.exp(1j * phases)
        b[s - 1] = 0
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return ToyState(_normalize(b, s))


# --- peaks ---------------------------------------------------------------------------

def detect_peaks(traj: Trajectory, target: int, floor: float = PEAK_FLOOR,
                 near: float = PEAK_NEAR) -> PeakSchedule:
    """Per-mode peak: the first sample where |b_j|^2 comes within a factor
    ``near`` of its maximum over the run (end points included), for modes
    whose maximum clears ``floor``. Interior local maxima are listed as well.
    """
    w = np.abs(traj.y) ** 2
    peaks, local = [], {}
    for j in range(1, w.shape[1] + 1):
        col = w[:, j - 1]
        top = float(col.max())
        if top >= floor:
            k = int(np.argmax(col >= near * top))
            peaks.append(Peak(j, float(traj.t[k]), float(col[k])))
        inner = np.flatnonzero((col[1:-1] > col[:-2]) & (col[1:-1] >= col[2:]) & (col[1:-1] >= floor)) + 1
        if inner.size:
            local[j] = [(float(traj.t[i]), float(col[i])) for i in inner]
    return PeakSchedule(peaks, float(w[:, target - 1].max()), target, local)


def run_cascade(b0: ToyState, horizon: float, tol: float = 1e-10, target: int | None = None,
                dt: float = SAMPLE_DT) -> tuple[PeakSchedule, Trajectory]:
    N = b0.N
    target = target or (N - 2 if N >= 5 else N)
    n = max(2, int(math.ceil(horizon / dt)) + 1)
    t_eval = np.linspace(b0.t, b0.t + horizon, n)
    traj = integrate_toy(b0, b0.t + horizon, tol, t_eval=t_eval)
    return detect_peaks(traj, target), traj


def transit_time(b0: ToyState, target: int, epsilon: float, horizon: float,
                 tol: float = 1e-10, dt: float = SAMPLE_DT) -> float:
    """First sampled time at which |b_target|^2 >= 1 - epsilon (inf if never within horizon)."""
    _, traj = run_cascade(b0, horizon, tol, target, dt)
    hit = np.flatnonzero(np.abs(traj.y[:, target - 1]) ** 2 >= 1 - epsilon)
    return float(traj.t[hit[0]] - b0.t) if hit.size else math.inf


# --- shooting ------------------------------------------------------------------------------

@dataclass
class ShootResult:
    b0: ToyState
    schedule: PeakSchedule
    objective: float
    evaluations: int
    params: np.ndarray
    success: bool


def shoot(cfg: CascadeConfig, *, restarts: int | None = None, raise_on_failure: bool = False) -> ShootResult:
    """Maximize max_t |b_target(t)|^2 over the seed modes' phases and log-amplitudes.

    Nelder-Mead from Sobol-distributed starting points; stops as soon as the
    objective reaches 1 - epsilon with strictly increasing peak times, and
    never spends more than ``shoot_budget`` integrations.
    """
    goal = 1 - cfg.epsilon
    dim = 2 * len(cfg.seed_modes)
    evals = 0
    best: ShootResult | None = None

    class _Done(Exception):
        pass

    def evaluate(p):
        nonlocal evals, best
        if evals >= cfg.shoot_budget:
            raise _Done
        evals += 1
        b0 = build_cascade_data(cfg, "slider-seed", p)
        sched, _ = run_cascade(b0, cfg.horizon, cfg.tol, cfg.target)
        ok = sched.final_concentration >= goal and (
            cfg.start == cfg.target or sched.strictly_increasing(cfg.start, cfg.target))
        score = sched.final_concentration
        cand = ShootResult(b0, sched, score, evals, np.array(p, dtype=float), ok)
        # successful candidates first, then by objective; ties keep the earlier one
        if best is None or (ok, score) > (best.success, best.objective):
            best = cand
        if ok:
            raise _Done
        return -score

    try:
        evaluate(np.zeros(dim))
        if dim:
            sob = qmc.Sobol(d=dim, scramble=True, seed=cfg.seed)
            lo = np.tile([0.0, -2.0], len(cfg.seed_modes))
            hi = np.tile([2 * np.pi, 2.0], len(cfg.seed_modes))
            n_starts = restarts if restarts is not None else cfg.shoot_budget
            m = min(14, max(0, math.ceil(math.log2(max(1, n_starts)))))
            for x0 in qmc.scale(sob.random_base2(m), lo, hi):
                evaluate(x0)
                optimize.minimize(evaluate, x0, method="Nelder-Mead",
                                  options={"maxfev": 60, "xatol": 1e-3, "fatol": 1e-5,
                                           "initial_simplex": x0 + 0.5 * np.vstack(
                                               [np.zeros(dim), np.eye(dim)])})
    except _Done:
        pass
    best.evaluations = evals
    if raise_on_failure and not best.success:
        raise BudgetExhausted(f"no cascade reached {goal:.3g} in {evals} integrations", best)
    return best


# --- Sobolev proxy ---------------------------------------------------------------------

@dataclass
class SobolevReport:
    Q: float
    Q_max: float
    ideal: float                  # S_target / S_start
    lower_bound: float            # (1 - eps) S_target / sum_j |b_j(0)|^2 S_j
    eps_bound: float              # (1 - eps) / ((1 - eps) S_start/S_target + eps sum_{j != start} S_j/S_target)
    epsilon: float
    t: np.ndarray = field(repr=False)
    Hs: np.ndarray = field(repr=False)
    S: list[float] = field(repr=False, default_factory=list)


def sobolev_growth_report(lambda_set: LambdaSet, traj: Trajectory, s, lam: float = 1.0,
                          start: int = 3, target: int | None = None) -> SobolevReport:
    """Q = sum_j |b_j(T)|^2 S_j / sum_j |b_j(0)|^2 S_j and the H^s proxy series.

    Norm sums are divided by S_start before use so that huge frequencies do
    not overflow; Q is unaffected, and the proxy is reported in units of
    sqrt(S_start)/lambda.
    """
    N = lambda_set.N
    if traj.y.shape[1] != N:
        raise ValueError("trajectory and frequency set disagree on N")
    target = target or N - 2
    raw = norm_sums(lambda_set, s)
    ref = raw[start - 1]
    S = np.array([float(x / ref) if isinstance(x, int) else float(x) / float(ref) for x in raw])
    w = np.abs(traj.y) ** 2
    num = w @ S
    Hs = np.sqrt(num) / lam
    Q_series = num / num[0]
    eps = 1 - float(w[:, target - 1].max())
    others = S.sum() - S[start - 1]
    return SobolevReport(
        Q=float(Q_series[-1]),
        Q_max=float(Q_series.max()),
        ideal=float(S[target - 1] / S[start - 1]),
        lower_bound=float((1 - eps) * S[target - 1] / num[0]),
        eps_bound=float((1 - eps) / ((1 - eps) * S[start - 1] / S[target - 1] + eps * others / S[target - 1])),
        epsilon=eps,
        t=traj.t,
        Hs=Hs,
        S=S.tolist(),
    )


# --- rates along the flow through T_j -----------------------------------------------

@dataclass
class TargetRates:
    j: int
    T: float
    rate_minus: float        # fitted exponent of c_{j-1}^-
    rate_plus: float         # fitted exponent of c_{j+1}^+
    rate_peripheral: float   # fitted exponent of a peripheral modulus
    expected: dict[str, float]

    def within(self, rel: float = 0.05, abs_peripheral: float = 0.05) -> bool:
        return (abs(self.rate_minus + SQRT3) <= rel * SQRT3
                and abs(self.rate_plus - SQRT3) <= rel * SQRT3
                and abs(self.rate_peripheral) <= abs_peripheral)


def target_flow_check(j: int, T: float = 8.0, sigma_toy: float = 0.05, tol: float = 1e-13,
                      N: int | None = None) -> TargetRates:
    """Flow data shaped like an incoming target at T_j for time T and fit each mode class.

    Incoming stable component c_{j-1}^- = sigma; outgoing c_{j+1}^+ starts at
    sigma e^{-sqrt3 T} so it reaches about sigma at the end; the two peripheral
    neighbours j +- 2 (where present) carry sigma^2.

    c_{j-1}^- is fitted on [0, T/2] only: cubic terms excite c_{j-1}^+ at the
    sigma^3 level, which then grows at +sqrt3 and swamps the decaying
    component late in the window. The other classes use all of [0, T].
    """
    N = N or j + 2
    if not 3 <= j <= N - 2:
        raise ValueError("need 3 <= j <= N - 2")
    if T > 12:
        raise ValueError("T must be <= 12 to stay above the floating-point floor")
    b = np.zeros(N, dtype=complex)
    b[j - 2] = join_pair(sigma_toy, 0.0)
    b[j] = join_pair(0.0, sigma_toy * math.exp(-SQRT3 * T))
    for k in (j - 2, j + 2):
        if 1 <= k <= N:
            b[k - 1] = sigma_toy ** 2
    b = _normalize(b, j)
    t = np.linspace(0.0, T, 201)
    tr = integrate_toy(ToyState(b), T, tol, t_eval=t)
    lcs = [to_local_coords(y, j) for y in tr.y]
    cm = np.array([lc.pairs[j - 1][0] for lc in lcs])
    cp = np.array([lc.pairs[j + 1][1] for lc in lcs])
    kp = j + 2
    per = np.array([lc.c[kp - 1] for lc in lcs])
    half = t <= T / 2
    fm = fit_rate(t[half], np.log(np.abs(cm[half])), max_residual=0.5)
    fp = fit_rate(t, np.log(np.abs(cp)), max_residual=0.5)
    fq = fit_rate(t, np.log(np.abs(per)), max_residual=0.5)
    return TargetRates(j, T, fm.rate, fp.rate, fq.rate,
                       {"rate_minus": -SQRT3, "rate_plus": SQRT3, "rate_peripheral": 0.0})
