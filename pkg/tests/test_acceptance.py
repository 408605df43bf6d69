"""End-to-end checks of the headline behaviours, one test per claim. Conservation is split
by invariant; the cascade has a literal five-mode run and a seven-mode chain with real transfer."""
import json
import math
import random
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from rcl import io
from rcl.cascade import CascadeConfig, run_cascade, shoot, sobolev_growth_report
from rcl.cli import run_command
from rcl.fnls import approximation_ladder
from rcl.lattice import FreqPoint, in_gamma, is_rectangle, omega4
from rcl.placement import (LambdaSet, construct_good_lambda, explosion_threshold, model_example,
                           norm_sums)
from rcl.resonant import collapse_check, resonant_quadruples
from rcl.toy import (SQRT3, ToyState, closed_form_residual, ghat, ghat_t0, integrate_toy, mass,
                     measure_linear_rates, oscillator, oscillator_derivative, slider,
                     slider_derivative)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_01_model_example_norm_sums():
    with Timer() as tm:
        S = norm_sums(model_example(7, 1), 2)
    assert S[4] == 1024 and S[2] == 256
    assert S[4] == 2 ** (2 * (7 - 3) + 2) and S[2] == 2 ** (2 * 2 + 7 - 3)
    assert Fraction(S[4], S[2]) == 2 ** ((2 - 1) * (7 - 5)) == 4
    assert tm.seconds < 1


def test_02_certified_frequency_set():
    with Timer() as tm:
        ls = construct_good_lambda(6, Fraction(3, 2), 1000, 42)
    c = ls.certificate
    pts = ls.points()
    assert len(set(pts)) == len(pts) == 192
    assert c.injective and c.closed and c.faithful and c.passed
    # 4 unordered right triangles per nuclear rectangle = 320; as (apex, ordered legs) = 640
    assert c.right_triangles == 4 * (6 - 1) * 2 ** (6 - 2) == 320
    assert c.right_triangles_oriented == 640
    assert c.explosion_ratio > explosion_threshold(6, Fraction(3, 2))
    assert tm.seconds < 300


def test_03_resonance_iff_rectangle():
    box = [FreqPoint(x, y) for x, y in product(range(-4, 5), repeat=2)]
    inside = set(box)
    counterexamples, rectangles = 0, 0
    with Timer() as tm:
        for n1, n3, n in product(box, repeat=3):
            n2 = n1 + n3 - n
            if n2 not in inside:
                continue
            res = omega4(n1, n2, n3, n) == 0 and in_gamma(n1, n2, n3, n)
            rect = is_rectangle(n1, n2, n3, n)
            counterexamples += res != rect
            rectangles += rect
        # quadruples violating n1 - n2 + n3 = n are neither; sample them across the box
        rng = random.Random(0)
        for _ in range(200_000):
            n1, n2, n3, n = (rng.choice(box) for _ in range(4))
            if n1 - n2 + n3 != n:
                counterexamples += (omega4(n1, n2, n3, n) == 0 and in_gamma(n1, n2, n3, n)) \
                    or is_rectangle(n1, n2, n3, n)
    assert counterexamples == 0 and rectangles > 0
    assert tm.seconds < 60


def test_04_closed_form_residuals():
    t = np.linspace(-6, 6, 1201)
    assert closed_form_residual(oscillator(t, 4, 2), oscillator_derivative(t, 4, 2)) < 1e-12
    assert closed_form_residual(slider(t), slider_derivative(t)) < 1e-12
    for sigma in (0.01, 0.05, 0.1):
        t0 = ghat_t0(sigma)
        assert abs(ghat(0.0, sigma) - sigma) < 1e-12
        assert abs(ghat(2 * t0, sigma) - math.sqrt(1 - sigma ** 2)) < 1e-12


@pytest.fixture(scope="module")
def random_eight_mode_run():
    rng = np.random.default_rng(2024)
    b = rng.normal(size=8) + 1j * rng.normal(size=8)
    b /= math.sqrt(mass(b))
    return integrate_toy(ToyState(b), 40.0, 1e-10)


@pytest.mark.parametrize("quantity", ["mass", "hamiltonian", "quartic"])
def test_05_conservation_random_eight_modes(random_eight_mode_run, quantity):
    assert random_eight_mode_run.max_drift()[quantity] < 1e-7


def test_06_linearization_rates():
    r = measure_linear_rates(3, 1e-4)
    assert abs(r.rate_plus.rate - SQRT3) <= 0.01 * SQRT3
    assert abs(r.rate_minus.rate + SQRT3) <= 0.01 * SQRT3
    assert abs(r.rate_peripheral.rate) <= 0.01


def test_07_collapse_on_certified_set(lambda6):
    rng = np.random.default_rng(7)
    b0 = rng.normal(size=6) + 1j * rng.normal(size=6)
    b0 /= math.sqrt(mass(b0))
    rep = collapse_check(lambda6, ToyState(b0), t_end=10.0, tol=1e-11)
    assert rep.n_quadruples == len(resonant_quadruples(lambda6)) == 640
    assert rep.discrepancy < 1e-8
    assert rep.spread < 1e-9
    assert rep.drift["mass"] < 1e-8
    # momentum measured in units of max|n| (about 1e6 here)
    assert rep.drift["momentum_re"] < 1e-8 and rep.drift["momentum_im"] < 1e-8


def test_08_approximation_scaling(square):
    with Timer() as tm:
        rep = approximation_ladder(square, slider(-1.0)[0], [8, 16, 32], T0=2.0)
    assert all(f >= 2 for f in rep.decrease_factors)
    assert rep.E_fit_factor <= 4
    assert all(r.leak < 1e-6 for r in rep.results)
    assert tm.seconds < 1800


def test_09_cascade_five_modes():
    # for N = 5 the default chain 3 -> N-2 has a single mode; checked literally
    cfg = CascadeConfig(N=5, sigma_toy=0.05, epsilon=0.1, shoot_budget=10_000)
    with Timer() as tm:
        res = shoot(cfg)
        sched, traj = run_cascade(res.b0, cfg.horizon, cfg.tol, cfg.target)
    assert res.success and sched.final_concentration >= 0.9
    assert sched.strictly_increasing(cfg.start, cfg.target)
    f = model_example(5, 1)
    ls = LambdaSet.from_generations(
        [[FreqPoint(v.re, v.im) for v in f.generation_values(j)] for j in range(1, 6)], 2)
    rep = sobolev_growth_report(ls, traj, 2, start=3, target=3)
    assert rep.ideal == 1.0 and rep.Q >= rep.eps_bound - 1e-12
    assert tm.seconds < 1200


def test_09_cascade_seven_modes_with_transfer():
    cfg = CascadeConfig(N=7, sigma_toy=0.05, epsilon=0.1, seed=0, shoot_budget=10_000)
    with Timer() as tm:
        res = shoot(cfg)
        sched, traj = run_cascade(res.b0, cfg.horizon, cfg.tol, cfg.target)
        ls = construct_good_lambda(7, 2, 1000, 1, angle_window=0.15, jitter=0.02, max_hypotenuse=300)
        rep = sobolev_growth_report(ls, traj, 2, start=3, target=5)
    assert res.success and sched.final_concentration >= 0.9
    assert sched.strictly_increasing(3, 5)
    assert ls.certificate.passed
    assert rep.Q >= rep.eps_bound - 1e-12 and rep.Q <= rep.ideal * (1 + 1e-9)
    assert rep.Q >= 0.9 * rep.ideal
    assert tm.seconds < 1200


RUNS = {
    "lambda_build": ["lambda", "build", "--N", "6", "--s", "3/2", "--radius", "100", "--seed", "7"],
    "toy_slider": ["toy", "simulate", "--preset", "slider", "--t0", "-5", "--t1", "5"],
    "toy_random": ["toy", "simulate", "--preset", "random", "--N", "8", "--t1", "10", "--seed", "3"],
    "resonant": ["resonant", "simulate", "--t1", "5", "--seed", "2"],
    "fnls": ["fnls", "compare", "--lambdas", "4,8", "--T0", "0.5", "--samples", "101"],
    "cascade": ["cascade", "run", "--N", "7", "--seed", "1", "--budget", "100"],
    "rates": ["cascade", "rates", "--j", "4", "--T", "8"],
}


@pytest.mark.parametrize("name", sorted(RUNS) + ["lambda_verify", "report"])
def test_10_replay_is_byte_identical(tmp_path, monkeypatch, capsys, name):
    monkeypatch.setenv("RCL_OUTPUT_DIR", str(tmp_path))
    if name in RUNS:
        argv = RUNS[name] + ["--name", name]
    elif name == "lambda_verify":
        assert run_command(RUNS["lambda_build"] + ["--name", "set"]) == 0
        argv = ["lambda", "verify", str(tmp_path / "set.json"), "--name", name]
    else:
        assert run_command(RUNS["rates"] + ["--name", "rates"]) == 0
        argv = ["report", "--name", name]
    assert run_command(argv) == 0
    m = tmp_path / f"{name}{io.MANIFEST_SUFFIX}"
    outputs = io.read_json(m)["outputs"]
    assert outputs
    capsys.readouterr()
    assert run_command(["replay", str(m)]) == 0
    assert json.loads(capsys.readouterr().out)["identical"] == sorted(outputs)
