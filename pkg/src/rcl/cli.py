"""Command-line entry point.

    rcl lambda build --N 6 --s 1.5 --radius 1000 --seed 42
    rcl lambda verify OUT/lambda_N6_s3-2_seed42.json
    rcl toy simulate --preset slider --t0 -5 --t1 5
    rcl resonant simulate --lambda FILE --seed 1
    rcl fnls compare --lambdas 8,16,32 --T0 2
    rcl cascade run --N 7 --sigma 0.05 --epsilon 0.1 --seed 1 --budget 10000
    rcl cascade rates --j 4 --T 8
    rcl report
    rcl replay OUT/NAME.manifest.json

Outputs go to --out, else $RCL_OUTPUT_DIR, else ./rcl_out. Every command
writes a sealed manifest next to its outputs; ``replay`` reruns it and
demands byte-identical files. Exit codes: 0 ok, 2 usage, 3 validation,
4 numerical failure; failures print a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import io as _stdio
import json
import math
import re
import shutil
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .cascade import (BudgetExhausted as ShootBudgetExhausted, CascadeConfig, run_cascade, shoot,
                      sobolev_growth_report, target_flow_check)
from .fnls import BoxTooSmall, approximation_ladder
from .integrator import StepFailure
from .placement import (BudgetExhausted, LambdaSet, PlacementError, construct_good_lambda,
                        unit_square_lambda, verify_lambda_set)
from .resonant import collapse_check
from .toy import FitFailure, ToyState, conserved_quantities, integrate_toy, mass, oscillator, slider

EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 2, 3, 4


class ValidationFailure(RuntimeError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --- helpers -------------------------------------------------------------------------

def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-.") or "run"


def _frac_slug(s: Fraction) -> str:
    return f"{s.numerator}" if s.denominator == 1 else f"{s.numerator}-{s.denominator}"


def _initial_toy(preset: str, N: int, seed: int, t0: float = 0.0, j: int = 1) -> ToyState:
    if preset == "slider":
        return ToyState(slider(t0, N, j)[0], t0)
    if preset == "oscillator":
        return ToyState(oscillator(t0, N, j)[0], t0)
    if preset == "random":
        rng = np.random.default_rng(seed)
        b = rng.normal(size=N) + 1j * rng.normal(size=N)
        return ToyState(b / math.sqrt(mass(b)), t0)
    raise ValidationFailure(f"unknown preset {preset!r}")


def _trajectory_rows(t, y):
    for tt, b in zip(t, y):
        q = conserved_quantities(b)
        row = [tt]
        for z in b:
            row += [z.real, z.imag]
        yield row + [q["mass"], q["hamiltonian"], q["quartic"]]


def _trajectory_header(N: int) -> list[str]:
    h = ["t"]
    for j in range(1, N + 1):
        h += [f"re_b{j}", f"im_b{j}"]
    return h + ["mass", "hamiltonian", "quartic"]


def _load_lambda(path: str, ctx: "Context") -> LambdaSet:
    p = Path(path)
    ctx.inputs[str(p.resolve())] = io.sha256_file(p)
    return LambdaSet.from_json(io.read_json(p))


class Context:
    """Per-invocation bookkeeping: output directory, produced files, inputs."""

    def __init__(self, out: Path, name: str):
        self.out = out
        self.name = _slug(name)
        self.outputs: list[str] = []
        self.inputs: dict[str, str] = {}
        self.argv_extra: list[str] = []

    def path(self, suffix: str) -> Path:
        p = self.out / f"{self.name}{suffix}"
        if not io.inside(self.out, p):
            raise ValidationFailure(f"refusing to write outside {self.out}")
        self.outputs.append(p.name)
        return p


# --- commands ---------------------------------------------------------------------------

def cmd_lambda_build(a, ctx: Context) -> dict:
    s = Fraction(a.s).limit_denominator(1000)
    ls = construct_good_lambda(a.N, s, a.radius, a.seed, a.budget, jitter=a.jitter,
                               angle_window=a.angle_window, max_hypotenuse=a.max_hypotenuse)
    io.write_json(ctx.path(".json"), ls.to_json())
    c = ls.certificate
    return {"passed": c.passed, "points": len(set(ls.points())), "right_triangles": c.right_triangles,
            "right_triangles_oriented": c.right_triangles_oriented,
            "explosion_ratio": c.explosion_ratio, "explosion_threshold": c.explosion_threshold,
            "magnitude_constant": c.magnitude_constant, "attempt": ls.config.get("attempt")}


def cmd_lambda_verify(a, ctx: Context) -> dict:
    ls = _load_lambda(a.file, ctx)
    cert = verify_lambda_set(ls)
    io.write_json(ctx.path(".certificate.json"), cert.to_json())
    summary = {"passed": cert.passed, "violations": cert.violations(),
               "right_triangles": cert.right_triangles, "explosion_ratio": cert.explosion_ratio}
    if not cert.passed:
        raise ValidationFailure(json.dumps(summary))
    return summary


def cmd_toy_simulate(a, ctx: Context) -> dict:
    N = a.N if a.N is not None else 2
    st = _initial_toy(a.preset, N, a.seed, a.t0, a.j)
    t = np.linspace(a.t0, a.t1, a.samples)
    tr = integrate_toy(st, a.t1, a.tol, t_eval=t)
    io.write_csv(ctx.path(".csv"), _trajectory_header(N), _trajectory_rows(tr.t, tr.y))
    out = {"N": N, "steps": tr.n_steps, "max_drift": tr.max_drift()}
    if a.preset == "slider":
        out["max_error_vs_closed_form"] = float(np.abs(tr.y - slider(tr.t, N, a.j)).max())
    elif a.preset == "oscillator":
        out["max_error_vs_closed_form"] = float(np.abs(tr.y - oscillator(tr.t, N, a.j)).max())
    return out


def cmd_resonant_simulate(a, ctx: Context) -> dict:
    ls = _load_lambda(a.lam, ctx) if a.lam else unit_square_lambda()
    st = _initial_toy(a.preset, ls.N, a.seed)
    rep = collapse_check(ls, st, a.t1, a.tol, a.samples)
    io.write_csv(ctx.path(".csv"), ["t", "discrepancy"], zip(rep.t, rep.discrepancy_series))
    summary = {"N": ls.N, "points": len(set(ls.points())), "quadruples": rep.n_quadruples,
               "discrepancy": rep.discrepancy, "spread": rep.spread, "drift": rep.drift}
    io.write_json(ctx.path(".json"), summary)
    return summary


def cmd_fnls_compare(a, ctx: Context) -> dict:
    ls = _load_lambda(a.lam, ctx) if a.lam else unit_square_lambda()
    lams = [float(x) for x in a.lambdas.split(",")]
    b0 = _initial_toy(a.preset, ls.N, a.seed, a.b_time, 1).b
    rep = approximation_ladder(ls, b0, lams, T0=a.T0, tol=a.tol, samples=a.samples)
    for r in rep.results:
        rows = ([x["t"], x["l1_error"], x["rel_error"], x["E_integral_l1"]] for x in r.rows())
        io.write_csv(ctx.path(f".lam{r.lam:g}.csv"), ["t", "l1_error", "rel_error", "E_integral_l1"], rows)
    summary = {"lambdas": lams, "rel_error": [r.rel_error for r in rep.results],
               "sup_E_integral": [r.sup_E_integral for r in rep.results],
               "decrease_factors": rep.decrease_factors, "error_slope": rep.error_slope,
               "E_constant": rep.E_constant, "E_fit_factor": rep.E_fit_factor,
               "horizon_ratio": [r.horizon_ratio for r in rep.results],
               "leak": [r.leak for r in rep.results], "passed": rep.passed()}
    io.write_json(ctx.path(".json"), summary)
    return summary


def cmd_cascade_run(a, ctx: Context) -> dict:
    cfg = CascadeConfig(N=a.N, epsilon=a.epsilon, sigma_toy=a.sigma, seed=a.seed,
                        horizon=a.horizon, shoot_budget=a.budget, tol=a.tol,
                        start_mode=a.start, target_mode=a.target)
    try:
        res = shoot(cfg, raise_on_failure=a.strict)
    except ShootBudgetExhausted as exc:
        res = exc.best
        io.write_json(ctx.path(".schedule.json"), {"config": cfg.to_json(), "success": False,
                                                   "schedule": res.schedule.to_json()})
        raise
    sched, traj = run_cascade(res.b0, cfg.horizon, cfg.tol, cfg.target)
    doc = {"config": cfg.to_json(), "success": res.success, "evaluations": res.evaluations,
           "params": res.params.tolist(), "schedule": sched.to_json(),
           "b0": [[z.real, z.imag] for z in res.b0.b]}
    if a.lam:
        ls = _load_lambda(a.lam, ctx)
        rep = sobolev_growth_report(ls, traj, Fraction(a.s).limit_denominator(1000),
                                    start=cfg.start, target=cfg.target)
        doc["sobolev"] = {"Q": rep.Q, "Q_max": rep.Q_max, "ideal": rep.ideal,
                          "lower_bound": rep.lower_bound, "eps_bound": rep.eps_bound,
                          "epsilon": rep.epsilon}
    io.write_json(ctx.path(".schedule.json"), doc)
    io.write_csv(ctx.path(".csv"), _trajectory_header(cfg.N), _trajectory_rows(traj.t, traj.y))
    return {"success": res.success, "evaluations": res.evaluations,
            "final_concentration": sched.final_concentration,
            "peaks": [[p.j, p.t_peak, p.peak_mass] for p in sched.peaks],
            **({"sobolev": doc["sobolev"]} if "sobolev" in doc else {})}


def cmd_cascade_rates(a, ctx: Context) -> dict:
    r = target_flow_check(a.j, a.T, a.sigma, N=a.N)
    doc = {"j": r.j, "T": r.T, "rate_minus": r.rate_minus, "rate_plus": r.rate_plus,
           "rate_peripheral": r.rate_peripheral, "expected": r.expected, "within": r.within()}
    io.write_json(ctx.path(".json"), doc)
    return doc


def cmd_report(a, ctx: Context) -> dict:
    source = Path(a.source) if a.source else ctx.out
    if not a.source:
        ctx.argv_extra += ["--source", str(source.resolve())]
    rows = []
    for p in sorted(source.glob(f"*{io.MANIFEST_SUFFIX}")):
        m = io.read_json(p)
        if m.get("command") == "report":
            continue
        ctx.inputs[str(p.resolve())] = io.sha256_file(p)
        rows.append({"manifest": p.name, "command": m.get("command"), "outputs": m.get("outputs"),
                     "summary": m.get("summary")})
    io.write_json(ctx.path(".json"), {"runs": rows})
    return {"runs": len(rows)}


# --- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default $RCL_OUTPUT_DIR or ./rcl_out)")
    common.add_argument("--name", help="file stem for outputs")
    common.add_argument("--config", help="flat key = value file providing option defaults")

    p = argparse.ArgumentParser(prog="rcl", description="resonant cascade laboratory")
    p.add_argument("--version", action="version", version=f"rcl {tool_version()}")
    top = p.add_subparsers(dest="group", required=True)

    g = top.add_parser("lambda", help="frequency sets").add_subparsers(dest="action", required=True)
    b = g.add_parser("build", parents=[common])
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--s", type=str, default="3/2")
    b.add_argument("--radius", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--budget", type=int, default=200)
    b.add_argument("--jitter", type=float, default=0.3)
    b.add_argument("--angle-window", type=float, default=None)
    b.add_argument("--max-hypotenuse", type=int, default=65)
    b.set_defaults(func=cmd_lambda_build, command="lambda build",
                   default_name=lambda a: f"lambda_N{a.N}_s{_frac_slug(Fraction(a.s).limit_denominator(1000))}_seed{a.seed}")
    v = g.add_parser("verify", parents=[common])
    v.add_argument("file")
    v.set_defaults(func=cmd_lambda_verify, command="lambda verify",
                   default_name=lambda a: Path(a.file).stem + "_verify")

    g = top.add_parser("toy", help="toy model").add_subparsers(dest="action", required=True)
    t = g.add_parser("simulate", parents=[common])
    t.add_argument("--preset", choices=["slider", "oscillator", "random"], default="slider")
    t.add_argument("--N", type=int, default=None)
    t.add_argument("--j", type=int, default=1)
    t.add_argument("--t0", type=float, default=0.0)
    t.add_argument("--t1", type=float, default=10.0)
    t.add_argument("--samples", type=int, default=201)
    t.add_argument("--tol", type=float, default=1e-12)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_toy_simulate, command="toy simulate",
                   default_name=lambda a: f"toy_{a.preset}")

    g = top.add_parser("resonant", help="resonant system").add_subparsers(dest="action", required=True)
    r = g.add_parser("simulate", parents=[common])
    r.add_argument("--lambda", dest="lam", default=None, help="LambdaSet JSON (default: unit square)")
    r.add_argument("--preset", choices=["random", "slider", "oscillator"], default="random")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--t1", type=float, default=10.0)
    r.add_argument("--tol", type=float, default=1e-11)
    r.add_argument("--samples", type=int, default=201)
    r.set_defaults(func=cmd_resonant_simulate, command="resonant simulate",
                   default_name=lambda a: "resonant_" + (Path(a.lam).stem if a.lam else "unit_square"))

    g = top.add_parser("fnls", help="full system").add_subparsers(dest="action", required=True)
    f = g.add_parser("compare", parents=[common])
    f.add_argument("--lambda", dest="lam", default=None, help="LambdaSet JSON (default: unit square)")
    f.add_argument("--lambdas", default="8,16,32")
    f.add_argument("--T0", type=float, default=2.0)
    f.add_argument("--preset", choices=["slider", "random"], default="slider")
    f.add_argument("--b-time", type=float, default=-1.0, help="toy time of the slider preset")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--tol", type=float, default=1e-12)
    f.add_argument("--samples", type=int, default=801)
    f.set_defaults(func=cmd_fnls_compare, command="fnls compare", default_name=lambda a: "fnls_compare")

    g = top.add_parser("cascade", help="cascade experiments").add_subparsers(dest="action", required=True)
    c = g.add_parser("run", parents=[common])
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--sigma", type=float, default=0.05)
    c.add_argument("--epsilon", type=float, default=0.1)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--budget", type=int, default=10000)
    c.add_argument("--horizon", type=float, default=40.0)
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--start", type=int, default=None)
    c.add_argument("--target", type=int, default=None)
    c.add_argument("--lambda", dest="lam", default=None, help="LambdaSet JSON for the Sobolev report")
    c.add_argument("--s", type=str, default="3/2")
    c.add_argument("--strict", action="store_true", help="exit 4 when the budget runs out")
    c.set_defaults(func=cmd_cascade_run, command="cascade run",
                   default_name=lambda a: f"cascade_N{a.N}_seed{a.seed}")
    c = g.add_parser("rates", parents=[common])
    c.add_argument("--j", type=int, required=True)
    c.add_argument("--T", type=float, default=8.0)
    c.add_argument("--sigma", type=float, default=0.05)
    c.add_argument("--N", type=int, default=None)
    c.set_defaults(func=cmd_cascade_rates, command="cascade rates",
                   default_name=lambda a: f"rates_j{a.j}_T{a.T:g}")

    rp = top.add_parser("report", parents=[common], help="summarize manifests in the output directory")
    rp.add_argument("--source", default=None, help="directory of manifests (default: the output directory)")
    rp.set_defaults(func=cmd_report, command="report", default_name=lambda a: "report")

    rl = top.add_parser("replay", help="rerun a manifest and compare outputs byte for byte")
    rl.add_argument("manifest")
    rl.add_argument("--keep", action="store_true", help="keep the replay directory")
    rl.set_defaults(func=None, command="replay")
    return p


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{k}: expected key = value")
            key, val = (x.strip() for x in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _strip_out(argv: list[str]) -> list[str]:
    res, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        res.append(tok)
    return res


def _resolved(args) -> dict:
    skip = {"func", "default_name", "out", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        sub = _subparser(parser, args)
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        typed = {}
        for k, v in cfg.items():
            act = known[k]
            typed[k] = act.type(v) if act.type else v
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def _subparser(parser, args):
    for act in parser._subparsers._group_actions:
        sp = act.choices[args.group]
        if args.group in ("report", "replay"):
            return sp
        for a2 in sp._subparsers._group_actions:
            return a2.choices[args.action]
    raise RuntimeError("no subparser")


def _error(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def run_command(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "replay":
            return replay(args.manifest, keep=args.keep)
        return _execute(args, argv)
    except (ValidationFailure, ValueError, PlacementError, io.DigestMismatch, FileNotFoundError,
            KeyError) as exc:
        return _error("validation", exc, EXIT_VALIDATION)
    except (StepFailure, BudgetExhausted, ShootBudgetExhausted, FitFailure, BoxTooSmall,
            FloatingPointError) as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)


def _execute(args, argv: list[str]) -> int:
    out = io.output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(out, args.name or args.default_name(args))
    if args.config:
        ctx.inputs[str(Path(args.config).resolve())] = io.sha256_file(Path(args.config))
    t_start = time.perf_counter()
    status, summary, failure = 0, None, None
    try:
        summary = args.func(args, ctx)
    except Exception as exc:     # still record what was produced, then re-raise
        failure = exc
    wall = time.perf_counter() - t_start
    manifest = {
        "command": args.command,
        "argv": _strip_out(argv) + ctx.argv_extra,
        "config": _resolved(args),
        "seed": getattr(args, "seed", None),
        "tool_version": tool_version(),
        "inputs": ctx.inputs,
        "outputs": {name: io.sha256_file(out / name) for name in ctx.outputs if (out / name).exists()},
        "summary": summary,
        "failed": None if failure is None else type(failure).__name__,
        "timings": {"wall_seconds": wall},
    }
    io.write_json(out / f"{ctx.name}{io.MANIFEST_SUFFIX}", io.seal(manifest))
    if failure is not None:
        raise failure
    sys.stdout.write(io.dumps(summary))
    return status


def replay(manifest_path: str, keep: bool = False) -> int:
    mpath = Path(manifest_path)
    m = io.read_json(mpath)
    io.check_seal(m)
    for path, digest in m.get("inputs", {}).items():
        if io.sha256_file(Path(path)) != digest:
            raise io.DigestMismatch(f"input {path} changed since the manifest was written")
    work = mpath.parent / f".replay-{m['digest'][:12]}"
    if work.exists():
        shutil.rmtree(work)
    try:
        with contextlib.redirect_stdout(_stdio.StringIO()):
            code = run_command(list(m["argv"]) + ["--out", str(work)])
        if code != 0 and not m.get("failed"):
            raise io.DigestMismatch(f"replay exited with status {code}")
        bad = []
        for name, digest in sorted(m["outputs"].items()):
            p = work / name
            if not p.exists() or io.sha256_file(p) != digest:
                bad.append(name)
        if bad:
            raise io.DigestMismatch(f"outputs differ on replay: {', '.join(bad)}")
    finally:
        if not keep and work.exists():
            shutil.rmtree(work)
    sys.stdout.write(io.dumps({"replayed": m["command"], "identical": sorted(m["outputs"])}))
    return 0


def main() -> None:
    sys.exit(run_command())
