"""The N-mode toy model

    d/dt b_j = -i |b_j|^2 b_j + 2i conj(b_j) (b_{j-1}^2 + b_{j+1}^2),  b_0 = b_{N+1} = 0,

its conserved quantities, closed-form solutions and local coordinates
near the invariant circles T_j = {|b_j| = 1, b_k = 0 for k != j}.
Modes are 1-indexed in the public API and stored 0-indexed in arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .integrator import Trajectory, integrate

OMEGA = complex(-0.5, math.sqrt(3) / 2)   # e^{2 pi i / 3}
OMEGA2 = OMEGA.conjugate()
SQRT3 = math.sqrt(3)


class SingularCoordinates(ValueError):
    pass


class FitFailure(RuntimeError):
    pass


@dataclass
class ToyState:
    b: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        if self.b.ndim != 1 or self.b.size < 1:
            raise ValueError("b must be a non-empty vector")

    @property
    def N(self) -> int:
        return self.b.size


def toy_rhs(t: float, b: np.ndarray) -> np.ndarray:
    p = np.zeros(b.size + 2, dtype=complex)
    p[1:-1] = b * b
    return -1j * np.abs(b) ** 2 * b + 2j * np.conj(b) * (p[:-2] + p[2:])


def mass(b: np.ndarray) -> float:
    return float(np.sum(np.abs(b) ** 2))


def hamiltonian(b: np.ndarray) -> float:
    b2 = b * b
    cross = np.conj(b2[1:]) * b2[:-1]
    return float(0.25 * np.sum(np.abs(b) ** 4) - np.sum(cross.real))


def quartic(b: np.ndarray) -> float:
    a = np.abs(b) ** 2
    return float(0.5 * np.sum(a * a) + np.sum(a[1:] * a[:-1]))


def conserved_quantities(b: np.ndarray | ToyState) -> dict[str, float]:
    if isinstance(b, ToyState):
        b = b.b
    b = np.asarray(b, dtype=complex)
    return {"mass": mass(b), "hamiltonian": hamiltonian(b), "quartic": quartic(b)}


def integrate_toy(state: ToyState, t_end: float, tol: float = 1e-10, *,
                  t_eval: np.ndarray | None = None, max_step: float = np.inf) -> Trajectory:
    """Integrate from state.t to t_end, logging the three invariants per step."""
    return integrate(toy_rhs, state.b, state.t, t_end, tol, t_eval=t_eval,
                     monitor=conserved_quantities, max_step=max_step)


def support_leak(traj: Trajectory, b0: np.ndarray) -> float:
    """Largest modulus reached by modes that were zero initially."""
    off = np.asarray(b0) == 0
    if not off.any():
        return 0.0
    return float(np.abs(traj.y[:, off]).max())


# --- closed forms -----------------------------------------------------------

def oscillator(t: float | np.ndarray, N: int, j: int, amplitude: float = 1.0,
               theta: float = 0.0) -> np.ndarray:
    """b_j = A e^{-i(A^2 t + theta)}, all other modes zero. Rows index time."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((t.size, N), dtype=complex)
    out[:, j - 1] = amplitude * np.exp(-1j * (amplitude ** 2 * t + theta))
    return out


def oscillator_derivative(t, N: int, j: int, amplitude: float = 1.0, theta: float = 0.0):
    return -1j * amplitude ** 2 * oscillator(t, N, j, amplitude, theta)


def _sig(x):
    # (1 + e^{x})^{-1/2}, evaluated without overflow
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    return np.where(x > 0, np.exp(-xp / 2) / np.sqrt(1 + np.exp(-np.abs(x))),
                    1 / np.sqrt(1 + np.exp(np.minimum(x, 0.0))))


def slider(t: float | np.ndarray, N: int = 2, j: int = 1) -> np.ndarray:
    """Heteroclinic solution from T_j to T_{j+1}, embedded in N modes.

    b_j = e^{-it} w^2 / sqrt(1 + e^{2 sqrt3 t}),  b_{j+1} = e^{-it} w / sqrt(1 + e^{-2 sqrt3 t})
    with w = e^{2 pi i/3}. Rows index time.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not 1 <= j < N:
        raise ValueError("slider needs modes j and j+1 inside 1..N")
    rot = np.exp(-1j * t)
    out = np.zeros((t.size, N), dtype=complex)
    out[:, j - 1] = rot * OMEGA2 * _sig(2 * SQRT3 * t)
    out[:, j] = rot * OMEGA * _sig(-2 * SQRT3 * t)
    return out


def slider_derivative(t, N: int = 2, j: int = 1) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b = slider(t, N, j)
    d = -1j * b
    # d/dt (1+e^{kt})^{-1/2} = -(k/2) e^{kt} (1+e^{kt})^{-3/2} = -(k/2)(1 - g^2) g
    g1 = _sig(2 * SQRT3 * t)
    g2 = _sig(-2 * SQRT3 * t)
    d[:, j - 1] += b[:, j - 1] * (-SQRT3) * (1 - g1 ** 2)
    d[:, j] += b[:, j] * SQRT3 * (1 - g2 ** 2)
    return d


def ghat_t0(sigma: float) -> float:
    """The shift t0 with 1/sqrt(1 + e^{2 sqrt3 t0}) = sigma."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    return math.log(1 / sigma ** 2 - 1) / (2 * SQRT3)


def ghat(t, sigma: float):
    """Logistic profile 1/sqrt(1 + e^{-2 sqrt3 (t - t0)}) flowing from sigma to sqrt(1 - sigma^2)."""
    t0 = ghat_t0(sigma)
    return _sig(-2 * SQRT3 * (np.asarray(t, dtype=float) - t0))


def ghat_derivative(t, sigma: float):
    g = ghat(t, sigma)
    return SQRT3 * (1 - g ** 2) * g


def closed_form_residual(b: np.ndarray, db: np.ndarray) -> float:
    """max over rows of |db - toy_rhs(b)|."""
    b = np.atleast_2d(b)
    db = np.atleast_2d(db)
    return float(max(np.abs(db[k] - toy_rhs(0.0, b[k])).max() for k in range(b.shape[0])))


# --- local coordinates --------------------------------------------------------

@dataclass
class LocalCoords:
    """Coordinates near T_j of the mass-normalized state.

    ``c`` has N entries with ``c[j-1] = 0`` as a placeholder; the neighbours
    j-1, j+1 are also given as real pairs ``pairs[k] = (c_minus, c_plus)``
    with c_k = w c_minus + w^2 c_plus. ``scale`` is sqrt(mass).
    """

    j: int
    r: float
    theta: float
    c: np.ndarray
    pairs: dict[int, tuple[float, float]]
    scale: float = 1.0

    def r_from_c(self) -> float:
        return math.sqrt(max(0.0, 1.0 - float(np.sum(np.abs(self.c) ** 2))))


def split_pair(c: complex) -> tuple[float, float]:
    """Real (c_minus, c_plus) with c = w c_minus + w^2 c_plus."""
    s = -2.0 * c.real            # c_minus + c_plus
    d = 2.0 * c.imag / SQRT3     # c_minus - c_plus
    return (s + d) / 2, (s - d) / 2


def join_pair(c_minus: float, c_plus: float) -> complex:
    return OMEGA * c_minus + OMEGA2 * c_plus


def to_local_coords(b: np.ndarray | ToyState, j: int, floor: float = 1e-12) -> LocalCoords:
    if isinstance(b, ToyState):
        b = b.b
    b = np.asarray(b, dtype=complex)
    N = b.size
    if not 1 <= j <= N:
        raise ValueError(f"j={j} outside 1..{N}")
    scale = math.sqrt(mass(b))
    if abs(b[j - 1]) < floor or scale == 0:
        raise SingularCoordinates(f"|b_{j}| = {abs(b[j - 1]):.3g} is below the floor {floor:g}")
    bn = b / scale
    r = abs(bn[j - 1])
    theta = math.atan2(bn[j - 1].imag, bn[j - 1].real)
    c = bn * np.exp(-1j * theta)
    c[j - 1] = 0
    pairs = {k: split_pair(complex(c[k - 1])) for k in (j - 1, j + 1) if 1 <= k <= N}
    return LocalCoords(j, r, theta, c, pairs, scale)


def from_local_coords(lc: LocalCoords) -> np.ndarray:
    c = np.array(lc.c, dtype=complex)
    for k, (cm, cp) in lc.pairs.items():
        c[k - 1] = join_pair(cm, cp)
    c[lc.j - 1] = lc.r
    return lc.scale * c * np.exp(1j * lc.theta)


# --- linear rates near T_j ----------------------------------------------------

@dataclass
class RateFit:
    rate: float
    stderr: float
    ci95: tuple[float, float]
    max_residual: float


@dataclass
class LinearRates:
    rate_minus: RateFit
    rate_plus: RateFit
    rate_peripheral: RateFit
    phase_peripheral: RateFit


def fit_rate(t: np.ndarray, y: np.ndarray, max_residual: float = 1e-2) -> RateFit:
    """Least-squares slope of y(t) with a 95% interval; FitFailure on a poor fit."""
    res = stats.linregress(t, y)
    resid = float(np.abs(y - (res.intercept + res.slope * t)).max())
    if not np.isfinite(res.slope) or resid > max_residual:
        raise FitFailure(f"linear fit residual {resid:.3g} exceeds {max_residual:g}")
    q = stats.t.ppf(0.975, t.size - 2) * res.stderr
    return RateFit(float(res.slope), float(res.stderr),
                   (float(res.slope - q), float(res.slope + q)), resid)


RATE_WINDOW = 2.0
RATE_SAMPLES = 81


def _seeded_near(N: int, j: int, k: int, c: complex, amplitude: float) -> np.ndarray:
    b = np.zeros(N, dtype=complex)
    b[k - 1] = c
    b[j - 1] = math.sqrt(1 - amplitude ** 2)
    return b


def measure_linear_rates(j: int = 3, amplitude: float = 1e-4, *, N: int | None = None,
                         window: float = RATE_WINDOW, tol: float = 1e-13) -> LinearRates:
    """Seed one small mode near T_j and fit the exponent of its local coordinate.

    c_{j+1}^+ and c_{j-1}^- are fitted on log-modulus; a peripheral mode
    (|k - j| >= 2) gives both the modulus drift rate and the phase rate.
    The window keeps growth/decay within e^{sqrt3 * window}.
    """
    if amplitude > 1e-3:
        raise ValueError("amplitude must be <= 1e-3 for the linear regime")
    N = N or j + 2
    if j - 1 < 1 or j + 1 > N:
        raise ValueError("need both neighbours j-1 and j+1")
    kp = j + 2 if j + 2 <= N else j - 2
    if not 1 <= kp <= N:
        raise ValueError("need a peripheral mode |k - j| >= 2; raise N")
    t = np.linspace(0.0, window, RATE_SAMPLES)

    def run(k, c, extract):
        b0 = _seeded_near(N, j, k, c, amplitude)
        tr = integrate_toy(ToyState(b0), window, tol, t_eval=t)
        return np.array([extract(to_local_coords(y, j)) for y in tr.y])

    plus = run(j + 1, join_pair(0.0, amplitude), lambda lc: lc.pairs[j + 1][1])
    minus = run(j - 1, join_pair(amplitude, 0.0), lambda lc: lc.pairs[j - 1][0])
    per = run(kp, complex(amplitude), lambda lc: lc.c[kp - 1])
    return LinearRates(
        rate_minus=fit_rate(t, np.log(np.abs(minus))),
        rate_plus=fit_rate(t, np.log(np.abs(plus))),
        rate_peripheral=fit_rate(t, np.log(np.abs(per))),
        phase_peripheral=fit_rate(t, np.unwrap(np.angle(per))),
    )


def rescale_toy(traj: Trajectory, lam: float) -> Trajectory:
    """b^(lam)(t) = b(t/lam^2)/lam, applied to samples and time grid."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    y = traj.y / lam
    return Trajectory(
        t=traj.t * lam ** 2,
        y=y,
        step_t=traj.t * lam ** 2,
        invariants={"mass": np.array([mass(r) for r in y]),
                    "hamiltonian": np.array([hamiltonian(r) for r in y]),
                    "quartic": np.array([quartic(r) for r in y])},
        n_steps=traj.n_steps,
        n_rhs=traj.n_rhs,
        tol=traj.tol,
    )
