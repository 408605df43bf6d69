import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcl.lattice import FreqPoint
from rcl.placement import LambdaSet
from rcl.resonant import (BoxState, ResonantQuadruple, ResonantSystem, brute_force_quadruples,
                          collapse_check, energy_surrogate, generation_constant_state,
                          generation_moments, integrate_resonant, resonant_quadruples, rfnls_rhs)
from rcl.toy import ToyState, oscillator, slider, toy_rhs

P = FreqPoint
pts = st.lists(st.builds(P, st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=14, unique=True)


def test_quadruple_validation():
    ResonantQuadruple(P(0, 0), P(1, 0), P(1, 1), P(0, 1))
    with pytest.raises(ValueError):
        ResonantQuadruple(P(0, 0), P(1, 0), P(2, 1), P(0, 1))


def test_unit_square_quadruples(square):
    q = resonant_quadruples(square)
    assert len(q) == 8
    assert {x.n for x in q} == set(square.points())
    assert q == brute_force_quadruples(square)


def test_single_generation_has_no_quadruples():
    ls = LambdaSet.from_generations([[P(1, 0), P(0, 1), P(5, 5)]])
    assert resonant_quadruples(ls) == []


@settings(max_examples=60, deadline=None)
@given(pts)
def test_enumeration_matches_brute_force(points):
    assert resonant_quadruples(points) == brute_force_quadruples(points)


@settings(max_examples=20, deadline=None)
@given(pts, st.integers(-20, 20), st.integers(-20, 20))
def test_translation_invariance(points, dx, dy):
    shift = P(dx, dy)
    moved = resonant_quadruples([p + shift for p in points])
    base = resonant_quadruples(points)
    assert len(moved) == len(base)
    assert sorted(ResonantQuadruple(q.n + shift, q.n1 + shift, q.n2 + shift, q.n3 + shift)
                  for q in base) == moved


def test_certified_set_quadruple_count(lambda6):
    q = resonant_quadruples(lambda6)
    assert len(q) == 8 * 5 * 2 ** 4
    gen = lambda6.generation_of()
    for x in q:
        js = {gen[x.n], gen[x.n1], gen[x.n2], gen[x.n3]}
        assert len(js) == 2 and max(js) - min(js) == 1


@pytest.mark.slow
def test_certified_set_brute_force(lambda6):
    assert resonant_quadruples(lambda6) == brute_force_quadruples(lambda6)


def test_rhs_zero(lambda6):
    st_ = BoxState(lambda6.points(), np.zeros(len(lambda6)), 0.0, lambda6)
    assert not np.any(rfnls_rhs(st_))


def test_rhs_single_mode(lambda6):
    amp = np.zeros(len(lambda6), dtype=complex)
    amp[7] = 0.4 + 0.3j
    d = rfnls_rhs(BoxState(lambda6.points(), amp, 0.0, lambda6))
    expect = np.zeros_like(amp)
    expect[7] = -1j * abs(amp[7]) ** 2 * amp[7]
    assert np.abs(d - expect).max() < 1e-16


def test_rhs_collapses_to_toy(lambda6):
    rng = np.random.default_rng(3)
    b = rng.normal(size=6) + 1j * rng.normal(size=6)
    state = generation_constant_state(lambda6, b)
    d = rfnls_rhs(state)
    db = toy_rhs(0.0, b)
    gen = lambda6.generation_of()
    for m, v in zip(state.modes, d):
        assert abs(v - db[gen[m] - 1]) < 1e-12


def test_generation_constant_state_rejects_wrong_size(lambda6):
    with pytest.raises(ValueError):
        generation_constant_state(lambda6, np.ones(5))


def test_support_must_stay_in_lambda(lambda6):
    with pytest.raises(ValueError):
        BoxState([P(0, 0)], np.ones(1), 0.0, lambda6)


def test_unit_square_matches_toy(square):
    rep = collapse_check(square, ToyState(slider(-1.0)[0], 0.0), 10.0, 1e-11)
    assert rep.discrepancy < 1e-8 and rep.spread < 1e-9
    assert rep.drift["mass"] < 1e-8


def test_single_generation_collapse():
    ls = LambdaSet.from_generations([[P(1, 0), P(0, 1), P(3, 7)]])
    rep = collapse_check(ls, ToyState(np.array([0.8 + 0.1j])), 10.0, 1e-12)
    assert rep.n_quadruples == 0 and rep.discrepancy < 1e-12


def test_conservation_on_certified_set(lambda6):
    rng = np.random.default_rng(11)
    amp = 0.1 * (rng.normal(size=len(lambda6)) + 1j * rng.normal(size=len(lambda6)))
    state = BoxState(lambda6.points(), amp, 0.0, lambda6)
    tr = integrate_resonant(state, 10.0, 1e-10, t_eval=np.linspace(0, 10, 11))
    d = tr.max_drift()
    assert d["mass"] < 1e-8
    assert d["momentum_re"] < 1e-8 and d["momentum_im"] < 1e-8
    assert d["energy"] < 1e-8


def test_support_invariance_on_superset(lambda6):
    extra = [P(1, 2), P(-5, 3), P(17, 0)]
    modes = lambda6.points() + extra
    b = np.array([0.9, 0.3, 0.2j, 0.1, 0.05, 0.02])
    amp = np.concatenate([generation_constant_state(lambda6, b).amp, np.zeros(len(extra))])
    sys = ResonantSystem.build(modes)
    tr = integrate_resonant(BoxState(modes, amp), 2.0, 1e-10, system=sys)
    assert not np.any(tr.y[:, -len(extra):])


def test_energy_surrogate_conserved_when_collapsed(lambda6):
    b0 = np.array([0.9, 0.3, 0.2j, 0.1, 0.05, 0.02])
    state = generation_constant_state(lambda6, b0)
    tr = integrate_resonant(state, 3.0, 1e-11, t_eval=np.linspace(0, 3, 7))
    gen = np.array([j for j, g in enumerate(lambda6.generations) for _ in g])
    first = [np.flatnonzero(gen == j)[0] for j in range(6)]
    E = [energy_surrogate(lambda6, y[first]) for y in tr.y]
    assert max(E) - min(E) < 1e-8 * abs(E[0])


def test_generation_moments(lambda6):
    m = generation_moments(lambda6)
    assert len(set(m)) == 1


def test_oscillator_on_one_generation(lambda6):
    b = oscillator(0.0, 6, 2)[0]
    rep = collapse_check(lambda6, b, 10.0, 1e-11, samples=21)
    assert rep.discrepancy < 1e-8


def test_boxstate_round_trip(lambda6):
    rng = np.random.default_rng(0)
    amp = rng.normal(size=len(lambda6)) + 1j * rng.normal(size=len(lambda6))
    st_ = BoxState(lambda6.points(), amp, 1.25)
    back = BoxState.from_json(st_.to_json())
    assert back.modes == st_.modes and np.array_equal(back.amp, st_.amp) and back.t == 1.25
    m = BoxState.from_mapping(st_.as_dict(), 1.25)
    assert m.as_dict() == st_.as_dict()
    assert st_.l1() >= st_.l2()
