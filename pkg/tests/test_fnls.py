import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcl.fnls import (ApproxConfig, BoxTooSmall, GalerkinBox, NonresonantTable,
                      approximation_experiment, error_integral_measure, fnls_mass, fnls_rhs,
                      fnls_rhs_ungauged, hs_norm, integrate_fnls, reconstruct_and_hs,
                      trilinear_N, trilinear_direct)
from rcl.integrator import Trajectory
from rcl.lattice import FreqPoint
from rcl.resonant import BoxState, generation_constant_state, rfnls_rhs
from rcl.toy import slider

P = FreqPoint


def rand(box, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return scale * (rng.normal(size=len(box)) + 1j * rng.normal(size=len(box)))


def test_box_grid_avoids_aliasing():
    for R in range(0, 6):
        assert GalerkinBox(R).grid >= 4 * R + 1
    with pytest.raises(ValueError):
        GalerkinBox(-1)


@pytest.mark.parametrize("t", [0.0, 0.37, 2.5])
def test_fft_trilinear_matches_direct(t):
    box = GalerkinBox(2)
    a, b, c = rand(box, 1), rand(box, 2), rand(box, 3)
    assert np.abs(trilinear_N(t, a, b, c, box) - trilinear_direct(t, a, b, c, box)).max() < 1e-11


def test_single_mode_operator():
    box = GalerkinBox(2)
    a = np.zeros(len(box), dtype=complex)
    k = box.index(P(1, -1))
    a[k] = 0.7 - 0.2j
    out = trilinear_N(0.9, a, a, a, box)
    expect = np.zeros_like(a)
    expect[k] = -a[k] * abs(a[k]) ** 2
    assert np.abs(out - expect).max() < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 10))
def test_trilinear_l1_bound(seed, t):
    box = GalerkinBox(2)
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=len(box)) + 1j * rng.normal(size=len(box)) for _ in range(3))
    lhs = np.abs(trilinear_N(t, a, b, c, box)).sum()
    rhs = np.abs(a).sum() * np.abs(b).sum() * np.abs(c).sum()
    assert lhs <= 2 * rhs


def test_gauge_cancels_diagonal_terms():
    box = GalerkinBox(3)
    a = rand(box, 4, 0.3)
    assert np.abs(fnls_rhs(1.3, a, box) - fnls_rhs_ungauged(1.3, a, box)).max() < 1e-12


def test_resonant_part_is_rfnls(square):
    box = GalerkinBox(3)
    b = slider(-0.5)[0]
    st_ = generation_constant_state(square, b)
    a = box.embed(st_)
    table = NonresonantTable.build(square.points(), box)
    assert not np.any(table.omega == 0)
    full = fnls_rhs(0.0, a, box) + 1j * table.evaluate(0.0, st_.amp, len(box))
    expect = box.embed(BoxState(st_.modes, rfnls_rhs(st_)))
    assert np.abs(full - expect).max() < 1e-13


def test_zero_data():
    box = GalerkinBox(2)
    z = np.zeros(len(box), dtype=complex)
    assert not np.any(fnls_rhs(0.0, z, box))
    tr = integrate_fnls(box.state(z), 5.0, 1e-10, box)
    assert not np.any(tr.y)


def test_single_mode_evolution():
    box = GalerkinBox(2)
    A = 0.6 + 0.3j
    st_ = BoxState([P(1, 2)], np.array([A]))
    t = np.linspace(0, 5, 6)
    tr = integrate_fnls(st_, 5.0, 1e-12, box, t_eval=t)
    k = box.index(P(1, 2))
    assert np.abs(tr.y[:, k] - A * np.exp(-1j * abs(A) ** 2 * t)).max() < 1e-10
    assert np.abs(np.delete(tr.y, k, axis=1)).max() < 1e-14


def test_mass_conserved_under_truncation():
    box = GalerkinBox(2)
    a = rand(box, 5, 0.15)
    tr = integrate_fnls(box.state(a), 5.0, 1e-11, box, t_eval=np.linspace(0, 5, 11))
    assert tr.max_drift()["mass"] < 1e-9
    assert fnls_mass(a)["mass"] == pytest.approx(float(np.sum(np.abs(a) ** 2)))
    assert np.abs(tr.y).sum(axis=1).max() < 10 * np.abs(a).sum()


def test_hs_single_mode():
    box = GalerkinBox(3)
    a = np.zeros(len(box), dtype=complex)
    a[box.index(P(2, -1))] = 0.5
    for s in (0.5, 1.0, 2.0):
        assert hs_norm(a, box, s) == pytest.approx(0.5 * 6 ** (s / 2))


def test_h1_of_lambda_data(lambda6):
    b = np.array([0.9, 0.3, 0.2j, 0.1, 0.05, 0.02])
    st_ = generation_constant_state(lambda6, b)
    modes = st_.modes
    direct = math.sqrt(sum(abs(b[j]) ** 2 * sum(1 + n.norm2() for n in g)
                           for j, g in enumerate(lambda6.generations)))
    val = math.sqrt(sum((1 + n.norm2()) * abs(x) ** 2 for n, x in zip(modes, st_.amp)))
    assert val == pytest.approx(direct, rel=1e-12)


def test_reconstruction_plancherel_and_gauge():
    box = GalerkinBox(2)
    a = rand(box, 6, 0.2)
    st_ = box.state(a, 0.7)
    rec = reconstruct_and_hs(st_, 1.0, box=box)
    assert rec.L2_quadrature == pytest.approx(rec.L2_plancherel, abs=1e-10)
    back = box.from_field(rec.u)
    assert np.abs(np.abs(back) - np.abs(a)).max() < 1e-10
    assert rec.Hs == pytest.approx(hs_norm(a, box, 1.0))


def test_error_integral_closed_form(square):
    box = GalerkinBox(3)
    pts = square.points()
    c = np.array([0.3, 0.2j, 0.1, 0.25 - 0.1j])
    table = NonresonantTable.build(pts, box)
    t = np.linspace(0, 2, 4001)
    traj = Trajectory(t=t, y=np.tile(c, (t.size, 1)), step_t=t)
    got = error_integral_measure(square, traj, box)
    coef = -c[table.i1] * np.conj(c[table.i2]) * c[table.i3]
    exact = np.zeros((t.size, len(box)), dtype=complex)
    for n, k, w in zip(table.out, coef, table.omega):
        exact[:, n] += k * (np.exp(1j * w * t) - 1) / (1j * w)
    assert np.abs(got - np.abs(exact).sum(axis=1)).max() < 1e-5
    bound = sum(2 * abs(k) / abs(w) for k, w in zip(coef, table.omega))
    assert got.max() <= bound


def test_box_too_small(square):
    with pytest.raises(BoxTooSmall):
        NonresonantTable.build(square.points(), GalerkinBox(1))
    with pytest.raises(BoxTooSmall):
        GalerkinBox(1).embed(BoxState([P(5, 5)], np.ones(1)))


def test_approximation_experiment_small(square):
    res = approximation_experiment(square, slider(-1.0)[0], ApproxConfig(lam=4.0, T0=0.5, samples=101))
    assert res.l1_error[0] == 0.0
    assert res.T == 8.0 and res.t[-1] == 8.0
    assert res.rel_error < 0.5
    assert res.leak < 1e-6 and res.mass_drift < 1e-9
    rows = list(res.rows())
    assert set(rows[0]) == {"t", "l1_error", "rel_error", "E_integral_l1"}


def test_leak_detection(square):
    with pytest.raises(BoxTooSmall):
        approximation_experiment(square, slider(-1.0)[0],
                                 ApproxConfig(lam=2.0, T0=1.0, samples=21, eps_leak=1e-30))


def test_approx_config_validation():
    with pytest.raises(ValueError):
        ApproxConfig(lam=0)
    with pytest.raises(ValueError):
        ApproxConfig(lam=2, sigma_exp=1.5)
    assert ApproxConfig(lam=8, T0=2).T == 128
