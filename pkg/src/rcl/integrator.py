"""Adaptive integration of complex ODE systems with an invariant log.

Wraps scipy's DOP853 (8th order, embedded 5/3 error estimate) in manual
stepping mode so that every accepted step can be inspected. Invariants are
monitored, never projected: a drifting invariant is a diagnostic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import DOP853

Rhs = Callable[[float, np.ndarray], np.ndarray]
Monitor = Callable[[np.ndarray], Mapping[str, float]]


class StepFailure(RuntimeError):
    """The error controller could not meet the tolerance."""

    def __init__(self, message: str, t: float, y: np.ndarray):
        super().__init__(message)
        self.t = t
        self.y = y


@dataclass
class Trajectory:
    """Sampled solution plus per-step invariant history.

    ``t``/``y`` hold the requested samples (one row of ``y`` per time).
    ``step_t`` and ``invariants`` hold values at every accepted step,
    including the initial point.
    """

    t: np.ndarray
    y: np.ndarray
    step_t: np.ndarray
    invariants: dict[str, np.ndarray] = field(default_factory=dict)
    n_steps: int = 0
    n_rhs: int = 0
    tol: float = 0.0

    def drift(self, name: str) -> np.ndarray:
        v = self.invariants[name]
        return np.abs(v - v[0])

    def max_drift(self) -> dict[str, float]:
        return {k: float(self.drift(k).max()) for k in self.invariants}

    def drift_within(self, factor: float = 100.0, names=None) -> bool:
        """True iff the named invariants (default: all) stay within factor*tol*(1+|t - t0|)."""
        bound = factor * self.tol * (1.0 + np.abs(self.step_t - self.step_t[0]))
        names = self.invariants if names is None else names
        return all(bool(np.all(self.drift(k) <= bound)) for k in names)

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


def integrate(rhs: Rhs, y0: np.ndarray, t0: float, t_end: float, tol: float, *,
              t_eval: np.ndarray | None = None, monitor: Monitor | None = None,
              max_step: float = np.inf, first_step: float | None = None,
              on_step: Callable[[float, np.ndarray], None] | None = None) -> Trajectory:
    """Integrate dy/dt = rhs(t, y) from t0 to t_end (either direction).

    Samples are taken at ``t_eval`` via the step's dense output; without
    ``t_eval`` every accepted step is returned. ``on_step`` sees each
    accepted (t, y) and may be used for running statistics.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y0 = np.asarray(y0, dtype=complex).copy()
    direction = 1.0 if t_end >= t0 else -1.0
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        lo, hi = min(t0, t_end), max(t0, t_end)
        if t_eval.size and (t_eval.min() < lo - 1e-12 or t_eval.max() > hi + 1e-12):
            raise ValueError("t_eval outside the integration interval")
        if np.any(np.diff(t_eval) * direction < 0):
            raise ValueError("t_eval must be ordered along the integration direction")

    inv_log: dict[str, list[float]] = {}

    def log(y):
        if monitor is None:
            return
        for k, v in monitor(y).items():
            inv_log.setdefault(k, []).append(float(v))

    step_t = [t0]
    log(y0)
    if on_step is not None:
        on_step(t0, y0)

    samples_t: list[float] = []
    samples_y: list[np.ndarray] = []
    k_eval = 0

    if t_eval is None:
        samples_t.append(t0)
        samples_y.append(y0.copy())
    else:
        while k_eval < t_eval.size and t_eval[k_eval] == t0:
            samples_t.append(t0)
            samples_y.append(y0.copy())
            k_eval += 1

    if t_end == t0 or not np.any(y0):
        # nothing to do; a zero state is a fixed point of every cubic system here
        if t_eval is not None:
            rest = t_eval[k_eval:]
            samples_t.extend(rest.tolist())
            samples_y.extend(y0.copy() for _ in rest)
        elif t_end != t0:
            samples_t.append(t_end)
            samples_y.append(y0.copy())
            step_t.append(t_end)
            log(y0)
        return _pack(samples_t, samples_y, y0.size, step_t, inv_log, 0, 0, tol)

    kw = {} if first_step is None else {"first_step": first_step}
    solver = DOP853(rhs, t0, y0, t_end, rtol=tol, atol=tol, max_step=max_step, **kw)
    n_steps = 0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StepFailure(f"step failed at t={solver.t_old}: {msg}",
                              float(solver.t_old if solver.t_old is not None else t0),
                              solver.y.copy())
        n_steps += 1
        t = solver.t
        y = solver.y
        step_t.append(t)
        log(y)
        if on_step is not None:
            on_step(t, y)
        if t_eval is None:
            samples_t.append(t)
            samples_y.append(y.copy())
        else:
            dense = None
            while k_eval < t_eval.size and (t_eval[k_eval] - t) * direction <= 0:
                te = t_eval[k_eval]
                if te == t:
                    samples_y.append(y.copy())
                else:
                    if dense is None:
                        dense = solver.dense_output()
                    samples_y.append(np.asarray(dense(te), dtype=complex))
                samples_t.append(te)
                k_eval += 1
    return _pack(samples_t, samples_y, y0.size, step_t, inv_log, n_steps, solver.nfev, tol)


def _pack(samples_t, samples_y, dim, step_t, inv_log, n_steps, n_rhs, tol) -> Trajectory:
    y = np.array(samples_y, dtype=complex).reshape(len(samples_t), dim)
    return Trajectory(
        t=np.array(samples_t, dtype=float),
        y=y,
        step_t=np.array(step_t, dtype=float),
        invariants={k: np.array(v) for k, v in inv_log.items()},
        n_steps=n_steps,
        n_rhs=n_rhs,
        tol=tol,
    )
