"""Command-line front end.

Every command writes its primary outputs atomically plus a
``<output>.manifest.json`` run manifest.  Exit codes: 0 success,
1 invalid input, 2 oracle disagreement, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import io as gio
from .calibration.fitting import FitError, calibrate
from .calibration.records import CorpusError, load_corpus, save_corpus
from .calibration.stripping import RewardConfig
from .calibration.synth import synthesize_corpus
from .moba.model import MobaModel, load_shipped_config
from .moba.solver import (DEFAULT_GRID_STEP, DEFAULT_LOOKAHEAD, DEFAULT_PRUNE_MASS, GridError,
                          mc_solve, solve, sweep_lambda)
from .oracle import dp_solve, mc_surprise
from .quidditch import (QuidditchParams, SpectralError, optimal_x_bruteforce, spectral_constants,
                        surprise_closed_form, taylor_theta1, x_tilde)

OUT_ENV = "GAMECHANGER_OUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_ORACLE, EXIT_IO = 0, 1, 2, 3


class OracleDisagreement(RuntimeError):
    pass


# helpers -----------------------------------------------------------------

def _out_path(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, ".")) / default_name


def _sibling(path: Path, suffix: str, ext: str = ".csv") -> Path:
    return path.with_name(f"{path.stem}{suffix}{ext}")


def _floats(text: str) -> list:
    """``a,b,c`` or ``start:stop:step`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(n, 0))]
    return [float(v) for v in text.split(",") if v.strip()]


def _inputs(args) -> dict:
    skip = {"func", "out"}
    d = {k: v for k, v in vars(args).items() if k not in skip}
    if getattr(args, "config", None):
        d["config_sha256"] = gio.config_hash(Path(args.config).read_text())
    return d


def _finish(args, started, outputs, seed=None, manifest_path=None):
    """Write primary outputs and the manifest (by default next to the first
    output)."""
    items = list(outputs)
    manifest = gio.RunManifest(
        command=args.command, config_hash=gio.config_hash(_inputs(args)), seed=seed,
        tool_version=gio.tool_version(), wall_time=round(time.perf_counter() - started, 3),
        inputs=_inputs(args), outputs=[str(p) for p, _ in items])
    if manifest_path is None:
        first = Path(items[0][0])
        manifest_path = first.with_name(first.name + ".manifest.json")
    items.append((manifest_path, manifest.dumps()))
    gio.atomic_write_many(items)


def _model(args) -> MobaModel:
    if getattr(args, "config", None):
        return MobaModel.load(args.config)
    return load_shipped_config(args.game)


def _params(p, q) -> QuidditchParams:
    return QuidditchParams(p, q)


def _taylor_marker(params: QuidditchParams) -> int | None:
    if params.p == 0.5:
        return 0
    return max(0, int(math.floor(taylor_theta1(params) + 0.5)))


# Quidditch -----------------------------------------------------------------

def cmd_quidditch_curve(args) -> int:
    started = time.perf_counter()
    if args.x_max < 1:
        raise ValueError("--x-max must be >= 1")
    params = _params(args.p, args.q)
    xs = np.arange(args.x_max + 1)
    closed = surprise_closed_form(params, xs)
    dp = [dp_solve(params, int(x)).expected_surprise for x in xs]
    xt = x_tilde(params)
    tm = _taylor_marker(params)
    rows = [(int(x), closed[i], dp[i], int(x) == xt, int(x) == tm) for i, x in enumerate(xs)]
    out = _out_path(args, "quidditch_curve.csv")
    text = gio.csv_text(("x", "surp_closed", "surp_dp", "is_x_tilde", "is_taylor"), rows)
    _finish(args, started, [(out, text)])
    print(f"x_tilde={xt} taylor_marker={tm} argmax_closed={int(np.argmax(closed))}")
    return EXIT_OK


def contour_grid(n: int):
    """``n`` values of p in (0, 1/2) and ``n`` of 1/q in [1.1, 100]."""
    ps = 0.5 * np.arange(1, n + 1) / (n + 1)
    inv_q = np.linspace(1.1, 100.0, n)
    return ps, inv_q


def cmd_quidditch_contour(args) -> int:
    started = time.perf_counter()
    if args.grid < 1:
        raise ValueError("--grid must be >= 1")
    rows = []
    agree = 0
    ps, inv_q = contour_grid(args.grid)
    for p in ps:
        for iq in inv_q:
            params = _params(float(p), 1.0 / float(iq))
            xs, xt = optimal_x_bruteforce(params), x_tilde(params)
            agree += xs == xt
            rows.append((float(p), float(iq), xs, xt, taylor_theta1(params)))
    rate = agree / len(rows)
    out = _out_path(args, "quidditch_contour.csv")
    text = gio.csv_text(("p", "inv_q", "x_star", "x_tilde", "taylor_value"), rows)
    _finish(args, started, [(out, text)])
    print(f"agreement x_tilde == x_star: {agree}/{len(rows)} = {rate:.6f}")
    return EXIT_OK


def _flipped_constants(params):
    c = spectral_constants(params)
    return replace(c, beta=-c.beta)


def cmd_quidditch_verify(args) -> int:
    started = time.perf_counter()
    if args.samples < 1:
        raise ValueError("--samples must be >= 1")
    z_tol = args.z if args.z is not None else float(norm.isf(0.005 / args.samples))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([args.seed, 0])))
    rows, bad = [], []
    max_dp, max_z = 0.0, 0.0
    for i in range(args.samples):
        p = float(rng.uniform(0.05, 0.95))
        q = float(rng.uniform(0.05, 0.95))
        x = int(rng.integers(0, 11))
        params = _params(p, q)
        consts = _flipped_constants(params) if args.inject_beta_sign_flip else None
        dp = dp_solve(params, x).expected_surprise
        mc = mc_surprise(params, x, args.episodes, seed=(args.seed << 20) + i + 1)
        try:
            closed = float(surprise_closed_form(params, x, consts=consts))
        except SpectralError as exc:
            closed = math.nan
            print(f"sample {i}: closed form rejected: {exc}", file=sys.stderr)
        res_dp = abs(closed - dp)
        z = abs(closed - mc.mean) / mc.std_error if mc.std_error > 0 else math.inf
        ok = bool(res_dp < args.dp_tol and z < z_tol)
        if not ok:
            bad.append((p, q, x))
        max_dp = max(max_dp, res_dp) if not math.isnan(res_dp) else math.inf
        max_z = max(max_z, z) if not math.isnan(z) else math.inf
        rows.append((i, p, q, x, closed, dp, mc.mean, mc.std_error, res_dp,
                     abs(dp - mc.mean), z, ok))
    out = _out_path(args, "quidditch_verify.csv")
    text = gio.csv_text(("sample", "p", "q", "x", "surp_closed", "surp_dp", "surp_mc", "mc_se",
                         "abs_closed_dp", "abs_dp_mc", "z_closed_mc", "ok"), rows)
    _finish(args, started, [(out, text)], seed=args.seed)
    print(f"max |closed - dp| = {max_dp:.3e} (tolerance {args.dp_tol:g})")
    print(f"max |closed - mc| / se = {max_z:.3f} (tolerance {z_tol:.3f})")
    print(f"max |dp - mc| = {max(r[9] for r in rows):.3e}")
    if bad:
        for t in bad:
            print(f"disagreement at p={t[0]!r} q={t[1]!r} x={t[2]}", file=sys.stderr)
        raise OracleDisagreement(f"{len(bad)} of {args.samples} samples disagree")
    return EXIT_OK


# MOBA ------------------------------------------------------------------------

def cmd_moba_fit(args) -> int:
    started = time.perf_counter()
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise FileNotFoundError(f"corpus directory {corpus} does not exist")
    matches = load_corpus(corpus)
    reward = RewardConfig(args.game, roshan_item_value=args.roshan_item_value)
    fitted = calibrate(matches, reward, strip=not args.no_strip)
    model = fitted.to_model(horizon=args.horizon)
    out = _out_path(args, f"fitted_{args.game}.json")
    diag = gio.csv_text(("minute", "r_hat", "q_hat", "dF_hat", "dW_hat", "dL_hat", "n_obs"),
                        fitted.diagnostics())
    _finish(args, started, [(out, model.dumps()), (_sibling(out, "_diagnostics"), diag)])
    print(f"theta_hat = {fitted.theta:.6f} from {fitted.n_teamfights} teamfights "
          f"in {fitted.n_matches} matches")
    for k, v in fitted.rms.items():
        print(f"fit rms {k}: {v:.6g}")
    return EXIT_OK


def cmd_moba_synth(args) -> int:
    started = time.perf_counter()
    model = _model(args)
    matches = synthesize_corpus(model, args.matches, args.seed)
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, ".")) / "corpus"
    items = [(out / f"{m.match_id}.json", m.dumps()) for m in matches]
    # the manifest sits beside the corpus so the directory holds matches only
    _finish(args, started, items, seed=args.seed,
            manifest_path=out.with_name(out.name + ".manifest.json"))
    print(f"wrote {len(matches)} matches to {out}")
    return EXIT_OK


def cmd_moba_sweep(args) -> int:
    started = time.perf_counter()
    model = _model(args)
    lambdas = _floats(args.lambda_)
    grid = _floats(args.gc_grid)
    table = sweep_lambda(model, lambdas, grid, args.grid_step, args.lookahead,
                         workers=args.workers, prune_mass=args.prune_mass)
    rows = [(o.lam, pt.delta_gc, pt.surprise, pt.winp) for o in table for pt in o.curve]
    summary = [(o.lam, o.delta_gc_star, o.max_surprise) for o in table]
    out = _out_path(args, "moba_sweep.csv")
    _finish(args, started, [
        (out, gio.csv_text(("lambda", "delta_gc", "surprise", "winp"), rows)),
        (_sibling(out, "_summary"), gio.csv_text(("lambda", "delta_gc_star", "max_surprise"),
                                                 summary))])
    for o in table:
        print(f"lambda={o.lam:g} delta_gc_star={o.delta_gc_star:g} surprise={o.max_surprise:.6f}")
    return EXIT_OK


def cmd_moba_verify(args) -> int:
    started = time.perf_counter()
    model = _model(args)
    levels = [args.grid_step / 2 ** k for k in range(args.refine + 1)]
    results = [solve(model, s, args.lookahead, args.prune_mass) for s in levels]
    refine = [(r.grid_step, r.n_states, r.root_winp, r.root_surprise, r.pruned_mass,
               r.borrowed_mass, r.approximated_mass) for r in results]
    res = results[0]
    mc = mc_solve(model, args.episodes, args.seed, result=res)
    zw = abs(mc.winp - res.root_winp) / mc.winp_se if mc.winp_se > 0 else 0.0
    zs = abs(mc.surprise - res.root_surprise) / mc.surprise_se if mc.surprise_se > 0 else 0.0
    comp = [("winp", res.root_winp, mc.winp, mc.winp_se, zw, zw <= 3.0),
            ("surprise", res.root_surprise, mc.surprise, mc.surprise_se, zs, zs <= 3.0)]
    out = _out_path(args, "moba_verify.csv")
    _finish(args, started, [
        (out, gio.csv_text(("quantity", "solve", "mc", "mc_se", "z", "ok"), comp)),
        (_sibling(out, "_refinement"),
         gio.csv_text(("grid_step", "n_states", "root_winp", "root_surprise", "pruned_mass",
                       "borrowed_mass", "approximated_mass"), refine))], seed=args.seed)
    for row in comp:
        print(f"{row[0]}: solve={row[1]:.8f} mc={row[2]:.8f} se={row[3]:.2e} z={row[4]:.2f}")
    if not (comp[0][5] and comp[1][5]):
        raise OracleDisagreement("solve and Monte Carlo disagree by more than 3 sigma")
    return EXIT_OK


# parser ----------------------------------------------------------------------

def _moba_source(sp):
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--config", help="MOBA model JSON config")
    g.add_argument("--game", choices=("lol", "dota2"), default="lol",
                   help="use a bundled example config")


def _solver_flags(sp):
    sp.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP)
    sp.add_argument("--lookahead", type=int, default=DEFAULT_LOOKAHEAD)
    sp.add_argument("--prune-mass", type=float, default=DEFAULT_PRUNE_MASS,
                    help="drop grid states reached with less probability")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gamechanger", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("quidditch-curve", help="surprise against the Snitch score")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--x-max", type=int, default=30)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_quidditch_curve)

    sp = sub.add_parser("quidditch-contour", help="optimal score over a (p, 1/q) grid")
    sp.add_argument("--grid", type=int, default=100, help="points per axis")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_quidditch_contour)

    sp = sub.add_parser("quidditch-verify", help="closed form vs DP vs Monte Carlo")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--episodes", type=int, default=20000)
    sp.add_argument("--dp-tol", type=float, default=1e-6)
    sp.add_argument("--z", type=float, default=None,
                    help="Monte Carlo tolerance in standard errors "
                         "(default: Bonferroni 1%% over all samples)")
    sp.add_argument("--inject-beta-sign-flip", action="store_true", help=argparse.SUPPRESS)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_quidditch_verify)

    sp = sub.add_parser("moba-fit", help="calibrate a MOBA config from match files")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--game", choices=("lol", "dota2"), default="lol")
    sp.add_argument("--roshan-item-value", type=float, default=0.0)
    sp.add_argument("--no-strip", action="store_true",
                    help="keep the original Game Changer rewards in the wealth series")
    sp.add_argument("--horizon", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_moba_fit)

    sp = sub.add_parser("moba-synth", help="simulate match files from a config")
    _moba_source(sp)
    sp.add_argument("--matches", type=int, default=500)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_moba_synth)

    sp = sub.add_parser("moba-sweep", help="optimal Game Changer reward per rating ratio")
    _moba_source(sp)
    sp.add_argument("--lambda", dest="lambda_", default="1,1.05,1.1,1.15")
    sp.add_argument("--gc-grid", default="0:6000:500")
    sp.add_argument("--workers", type=int, default=None)
    _solver_flags(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_moba_sweep)

    sp = sub.add_parser("moba-verify", help="backward induction vs Monte Carlo")
    _moba_source(sp)
    sp.add_argument("--episodes", type=int, default=100000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--refine", type=int, default=1, help="number of grid halvings")
    _solver_flags(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_moba_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleDisagreement as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (CorpusError, FitError, GridError, SpectralError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
