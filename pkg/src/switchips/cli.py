"""Command-line front end.

Every subcommand writes its tables as CSV into ``--out``, plus a JSON
manifest that records the resolved parameters, the seed and the produced
files. ``switchips replay MANIFEST`` re-runs a manifest.

Exit codes: 0 success, 2 invalid input, 3 event budget exhausted,
4 failed invariant suite.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NonterminationError, SwitchIPSError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NONTERM, EXIT_SUITE = 0, 2, 3, 4


# --------------------------------------------------------------------------
# parsing helpers


def parse_floats(text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"not a comma-separated list of numbers: {text!r}") from None
    if count is not None and len(vals) != count:
        raise ValidationError(f"expected {count} values, got {len(vals)}")
    return vals


def parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"not a comma-separated list of integers: {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop``; values rounded to 12 digits
    so that e.g. 0.5 is hit exactly."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(f"grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ValidationError("grid needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


def parse_log_range(text: str) -> list[float]:
    """``start:stop:count`` log-spaced."""
    try:
        a, b, c = text.split(":")
        start, stop, count = float(a), float(b), int(c)
    except ValueError:
        raise ValidationError(f"range must be start:stop:count, got {text!r}") from None
    if start <= 0 or stop <= 0 or count < 1:
        raise ValidationError("log range needs positive end points and count >= 1")
    return [float(v) for v in np.geomspace(start, stop, count)]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------------------
# output


class Run:
    """Collects artifacts of one subcommand and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.params: dict = {}
        self.seed = getattr(args, "seed", None)
        self.t0 = time.perf_counter()

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(v) for v in r])
        self.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        path = self.out / name
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
        self.files.append(name)
        return path

    def text(self, name: str, body: str) -> Path:
        path = self.out / name
        path.write_text(body, encoding="utf-8")
        self.files.append(name)
        return path

    def plot(self, name: str, csv_name: str, x: str, ys: list[str], logx: bool = False) -> None:
        if not getattr(self.args, "plot", False):
            return
        body = PLOT_TEMPLATE.format(csv=csv_name, x=x, ys=ys, logx=logx, png=Path(name).stem + ".png")
        self.text(name, body)

    def finish(self, argv: list[str]) -> None:
        manifest = {
            "subcommand": self.args.command,
            "argv": argv,
            "params": self.params,
            "seed": self.seed,
            "artifacts": list(self.files),
            "wall_clock_s": time.perf_counter() - self.t0,
            "version": __version__,
        }
        path = self.out / f"{self.args.command}_manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


PLOT_TEMPLATE = '''\
# Standalone plot script: run it with python3 next to the CSV.
import csv
import matplotlib.pyplot as plt

with open({csv!r}, newline="") as fh:
    rows = list(csv.DictReader(fh))
x = [float(r[{x!r}]) for r in rows]
for col in {ys!r}:
    plt.plot(x, [float(r[col]) for r in rows], label=col)
if {logx!r}:
    plt.xscale("log")
plt.xlabel({x!r})
plt.legend()
plt.savefig({png!r}, dpi=150)
'''


# --------------------------------------------------------------------------
# parameter resolution


def model_params(args: argparse.Namespace, default_sigma: int | None = 0):
    """Build model parameters from ``--config`` overlaid by explicit flags."""
    from .model import RESERVOIR_KEYS, ModelParams, parse_key_values, validate

    cfg: dict[str, str] = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from None
        cfg = parse_key_values(text)
        if "seed" in cfg and args.seed is None:
            args.seed = int(cfg["seed"])
        cfg.pop("seed", None)
    if args.sigma is not None:
        cfg["sigma"] = str(args.sigma)
    elif "sigma" not in cfg and default_sigma is not None:
        cfg["sigma"] = str(default_sigma)
    if args.n is not None:
        cfg["n_sites"] = str(args.n)
    if args.epsilon is not None:
        cfg["epsilon"] = repr(args.epsilon)
    if args.gamma is not None:
        cfg.pop("upsilon", None)
        cfg["gamma"] = repr(args.gamma)
    if args.upsilon is not None:
        if args.gamma is None:
            cfg.pop("gamma", None)
        cfg["upsilon"] = repr(args.upsilon)
    if args.rho is not None:
        for k, v in zip(RESERVOIR_KEYS, parse_floats(args.rho, 4)):
            cfg[k] = repr(v)
    if getattr(args, "mode", None):
        cfg["mode"] = args.mode
    return validate(ModelParams.from_mapping(cfg))


def macro_params(args: argparse.Namespace, epsilon: float | None = None):
    from .macro import MacroParams
    from .model import ReservoirDensities

    if args.rho is None:
        raise ValidationError("--rho is required")
    rho = ReservoirDensities.from_sequence(parse_floats(args.rho, 4))
    if args.upsilon is not None:
        U = args.upsilon
    elif args.gamma is not None and args.n is not None:
        U = args.gamma * args.n**2
    else:
        raise ValidationError("give --upsilon (or --gamma with --n)")
    e = args.epsilon if epsilon is None else epsilon
    if e is None:
        raise ValidationError("--epsilon is required")
    return MacroParams(float(e), float(U), rho)


def _params_dict(p) -> dict:
    from dataclasses import asdict

    d = asdict(p)
    d["reservoir"] = [float(v) for v in p.reservoir.as_array()]
    return d


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args, run: Run) -> int:
    from .ctmc import simulate
    from .model import Configuration, make_stream

    p = model_params(args, default_sigma=None)
    seed = 0 if args.seed is None else args.seed
    run.seed = seed
    run.params = _params_dict(p) | {"t_end": args.t_end, "burn_in": args.burn_in, "batches": args.batches}
    stats = simulate(p, Configuration.empty(p.n_sites), args.t_end, args.burn_in,
                     make_stream(seed, 0), n_batches=args.batches)
    th, se = stats.theta_hat, stats.theta_se
    rows = [(x + 1, i, th[x, i], se[x, i]) for x in range(p.n_sites) for i in range(2)]
    run.csv("simulate_profile.csv", ["x", "layer", "theta", "theta_se"], rows)
    cur, cse = stats.current_hat, stats.current_se
    run.csv("simulate_current.csv", ["bond", "layer", "current", "current_se"],
            [(b + 1, i, cur[b, i], cse[b, i]) for b in range(cur.shape[0]) for i in range(2)])
    run.text("simulate_config.txt", p.to_config(seed))
    run.plot("simulate_plot.py", "simulate_profile.csv", "x", ["theta"])
    print(f"{'x':>5} {'layer':>5} {'theta':>14} {'se':>12}")
    for x, i, t, s in rows:
        print(f"{x:>5} {i:>5} {t:>14.6f} {s:>12.3e}")
    print(f"events={stats.n_events} duration={stats.duration:g}")
    for w in stats.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_profile(args, run: Run) -> int:
    from .stationary import micro_profile

    p = model_params(args)
    run.params = _params_dict(p) | {"method": args.method}
    prof = micro_profile(p, method=args.method)
    run.csv("profile.csv", ["x", "theta0", "theta1"],
            [(x + 1, prof.theta0[x], prof.theta1[x]) for x in range(p.n_sites)])
    run.csv("profile_current.csv", ["bond", "J0", "J1", "J"],
            [(b + 1, prof.J0[b], prof.J1[b], prof.J) for b in range(len(prof.J0))])
    run.plot("profile_plot.py", "profile.csv", "x", ["theta0", "theta1"])
    print(f"J = {prof.J!r}")
    return EXIT_OK


def cmd_current(args, run: Run) -> int:
    from .macro import total_current
    from .stationary import micro_profile

    p = model_params(args)
    grid = parse_grid(args.eps_grid) if args.eps_grid else [p.epsilon]
    rows = []
    for e in grid:
        q = p.with_(epsilon=e)
        J = micro_profile(q).J
        from .macro import MacroParams

        Jm = total_current(MacroParams(e, q.macro_rate, q.reservoir))
        rows.append((e, J, q.n_sites * J, Jm))
    run.params = _params_dict(p) | {"eps_grid": grid}
    run.csv("current.csv", ["epsilon", "J_micro", "N_times_J_micro", "J_macro"], rows)
    run.plot("current_plot.py", "current.csv", "epsilon", ["N_times_J_micro", "J_macro"])
    for r in rows:
        print(" ".join(fmt(v) for v in r))
    return EXIT_OK


def cmd_macro(args, run: Run) -> int:
    from .macro import macro_current, macro_profile

    mp = macro_params(args)
    y = np.linspace(0.0, 1.0, args.points)
    r0, r1 = macro_profile(mp, y)
    J0, J1, J = macro_current(mp, y)
    run.params = _params_dict(mp) | {"points": args.points}
    run.csv("macro.csv", ["y", "rho0", "rho1", "J0", "J1", "J"], zip(y, r0, r1, J0, J1, J))
    run.plot("macro_plot.py", "macro.csv", "y", ["rho0", "rho1"])
    print(f"J = {float(J[0])!r}")
    return EXIT_OK


def cmd_uphill(args, run: Run) -> int:
    from .macro import uphill

    grid = parse_grid(args.eps_grid)
    rows = []
    crit = None
    for e in grid:
        v = uphill(macro_params(args, epsilon=e))
        crit = v.critical_epsilon
        rows.append((e, v.J, v.gap, v.verdict))
    run.params = _params_dict(macro_params(args, epsilon=grid[0])) | {"eps_grid": grid}
    run.csv("uphill.csv", ["epsilon", "J", "gap", "verdict"], rows)
    run.json("uphill.json", {"critical_epsilon": crit})
    run.plot("uphill_plot.py", "uphill.csv", "epsilon", ["J"])
    for r in rows:
        print(" ".join(fmt(v) for v in r))
    print(f"critical epsilon: {crit if crit is None else repr(crit)}")
    return EXIT_OK


def cmd_layer(args, run: Run) -> int:
    from .macro import MacroParams, boundary_layer
    from .model import ReservoirDensities

    if args.eps_range:
        grid = parse_log_range(args.eps_range)
    elif args.eps:
        grid = [float(v) for v in args.eps]
    else:
        raise ValidationError("give --eps or --eps-range")
    if args.rho is not None:
        rho = ReservoirDensities.from_sequence(parse_floats(args.rho, 4))
    else:
        rho = ReservoirDensities(args.wl, 0.0, args.wr, 0.0)
    sides = ["left", "right"] if args.side == "both" else [args.side]
    rows = []
    for e in grid:
        mp = MacroParams(e, args.upsilon, rho)
        for s in sides:
            bl = boundary_layer(mp, c=args.c, side=s)
            rows.append((e, s, bl.position, bl.width, bl.ratio, bl.ratio * math.sqrt(args.upsilon)))
    run.params = {"upsilon": args.upsilon, "c": args.c, "reservoir": list(rho.as_array()), "eps": grid}
    run.csv("layer.csv", ["epsilon", "side", "position", "width", "ratio", "ratio_times_sqrt_upsilon"], rows)
    run.plot("layer_plot.py", "layer.csv", "epsilon", ["ratio"], logx=True)
    for r in rows:
        print(" ".join(fmt(v) for v in r))
    return EXIT_OK


def cmd_duality(args, run: Run) -> int:
    from .duality import DualityPairing, check_self_duality
    from .model import Configuration, DualConfiguration, make_stream

    p = model_params(args)
    n = p.n_sites
    eta = np.array(parse_ints(args.eta), dtype=np.int64)
    xi = np.array(parse_ints(args.xi), dtype=np.int64)
    if eta.size != 2 * n or xi.size != 2 * n:
        raise ValidationError(f"--eta and --xi need 2N = {2 * n} entries (x-major, layer-minor)")
    absd = np.array(parse_ints(args.xi_absorbed) if args.xi_absorbed else [0, 0, 0, 0], dtype=np.int64)
    if absd.size != 4:
        raise ValidationError("--xi-absorbed needs 4 entries (L0, L1, R0, R1)")
    seed = 0 if args.seed is None else args.seed
    run.seed = seed
    pairing = DualityPairing(Configuration(eta.reshape(n, 2)),
                             DualConfiguration(xi.reshape(n, 2), absd.reshape(2, 2)), args.t, args.replicas)
    rep = check_self_duality(pairing, p, make_stream(seed, 0))
    run.params = _params_dict(p) | {"eta": eta, "xi": xi, "xi_absorbed": absd, "t": args.t,
                                    "replicas": args.replicas}
    run.json("duality.json", rep.to_dict())
    print("PASS" if rep.passed else "FAIL", rep.to_json())
    return EXIT_OK


def cmd_verify(args, run: Run) -> int:
    from .verify import run_suite

    results = run_suite()
    run.json("verify.json", {"checks": [r.to_dict() for r in results],
                             "pass": all(r.passed for r in results)})
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (tol {r.tolerance:.1e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SUITE


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        print(f"error [VALIDATION]: unreadable manifest: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.out is not None:
        argv = _replace_out(argv, args.out)
    return main(argv)


def _replace_out(argv: list[str], out: str) -> list[str]:
    res, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        res.append(a)
    return res + ["--out", out]


# --------------------------------------------------------------------------
# argument parser


def _add_model(sp: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        sp.add_argument("--config", help="key=value parameter file (flags override it)")
    sp.add_argument("--sigma", type=int, help="-1 exclusion, 0 independent, 1 inclusion")
    sp.add_argument("--n", type=int, help="number of sites")
    sp.add_argument("--epsilon", type=float, help="slow-layer hop rate")
    sp.add_argument("--gamma", type=float, help="microscopic switching rate")
    sp.add_argument("--upsilon", type=float, help="macroscopic switching rate (gamma = upsilon/N^2)")
    sp.add_argument("--rho", help="reservoir densities rho_L0,rho_L1,rho_R0,rho_R1")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switchips", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--plot", action="store_true", help="also write a plot script")
        if seed:
            sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("simulate", help="Gillespie simulation with time averages")
    _add_model(sp)
    sp.add_argument("--mode", choices=["boundary-driven", "bulk-torus"])
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--burn-in", type=float, default=None)
    sp.add_argument("--batches", type=int, default=32)
    common(sp, seed=True)

    sp = sub.add_parser("profile", help="stationary lattice profile and currents")
    _add_model(sp)
    sp.add_argument("--method", choices=["closed", "linear"], default="closed")
    common(sp, seed=True)

    sp = sub.add_parser("current", help="stationary lattice current, optionally over an epsilon grid")
    _add_model(sp)
    sp.add_argument("--eps-grid", help="start:stop:step")
    common(sp, seed=True)

    sp = sub.add_parser("macro", help="continuum stationary profile and currents")
    _add_model(sp, config=False)
    sp.add_argument("--points", type=int, default=101)
    common(sp)

    sp = sub.add_parser("uphill", help="uphill/downhill verdicts over an epsilon grid")
    _add_model(sp, config=False)
    sp.add_argument("--eps-grid", required=True, help="start:stop:step")
    common(sp)

    sp = sub.add_parser("layer", help="boundary-layer widths")
    sp.add_argument("--upsilon", type=float, required=True)
    sp.add_argument("--wl", type=float, default=2.0, help="rho_L0 - rho_L1")
    sp.add_argument("--wr", type=float, default=0.0, help="rho_R0 - rho_R1")
    sp.add_argument("--rho", help="full reservoir vector (overrides --wl/--wr)")
    sp.add_argument("--c", type=float, default=1.0, help="curvature threshold")
    sp.add_argument("--eps", type=float, action="append", help="epsilon value (repeatable)")
    sp.add_argument("--eps-range", help="start:stop:count, log-spaced")
    sp.add_argument("--side", choices=["left", "right", "both"], default="left")
    common(sp)

    sp = sub.add_parser("duality", help="Monte Carlo check of the duality identity")
    _add_model(sp)
    sp.add_argument("--mode", choices=["boundary-driven", "bulk-torus"])
    sp.add_argument("--eta", required=True, help="2N occupations, x-major")
    sp.add_argument("--xi", required=True, help="2N dual occupations, x-major")
    sp.add_argument("--xi-absorbed", help="absorbed dual particles L0,L1,R0,R1")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--replicas", type=int, default=10000)
    common(sp, seed=True)

    sp = sub.add_parser("verify", help="run the cross-oracle invariant suite")
    common(sp)

    sp = sub.add_parser("replay", help="re-run a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None)
    return ap


COMMANDS = {
    "simulate": cmd_simulate, "profile": cmd_profile, "current": cmd_current,
    "macro": cmd_macro, "uphill": cmd_uphill, "layer": cmd_layer,
    "duality": cmd_duality, "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return cmd_replay(args)
    for name in ("sigma", "n", "epsilon", "gamma", "upsilon", "rho", "seed", "mode", "config"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        run = Run(args)
        code = COMMANDS[args.command](args, run)
        run.finish(argv)
        return code
    except NonterminationError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NONTERM
    except SwitchIPSError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INVALID
