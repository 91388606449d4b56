"""Command line front end.

Exit codes: 0 success, 2 invalid configuration, 3 scenario guard exceeded,
4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend
from . import experiments as ex
from . import lhv as _lhv
from . import polytope as pt
from . import stats
from .qstate import Behavior, TwoQubitState, born_behavior, closed_form_stats

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_CONVERGENCE = 4


class ConfigError(ValueError):
    pass


def _vector(text: str) -> np.ndarray:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"expected a 3-vector 'x,y,z', got {text!r}")
    v = np.array(parts)
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigError("zero vector given as a measurement direction")
    return v / n


def _load_behavior(spec: str, scenario: pt.Scenario | None) -> Behavior:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name == "table2":
            return pt.table2_point()
        if scenario is None:
            raise ConfigError(f"{spec} needs --scenario")
        if name == "white":
            return pt.white_noise(scenario)
        if name == "maxcorr":
            return pt.maximally_correlated_point(scenario)
        raise ConfigError(f"unknown builtin point {spec!r}")
    if spec == "white":
        if scenario is None:
            raise ConfigError("white noise needs --scenario")
        return pt.white_noise(scenario)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"no such point file {spec!r}")
    return Behavior.from_json(path.read_text())


def _load_functional(spec: str, scenario: pt.Scenario | None) -> tuple[np.ndarray, pt.Scenario]:
    if spec == "builtin:table2":
        return pt.table2_functional(), pt.Scenario(4, 2, 4, 4)
    if spec == "builtin:chsh":
        return pt.chsh_functional(), pt.Scenario(2, 2, 2, 2)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"no such functional file {spec!r}")
    data = json.loads(path.read_text())
    s = pt.Scenario(*data["scenario"])
    F = np.asarray(data["table"], dtype=float)
    if F.size != s.dim:
        raise ConfigError("functional table length does not match its scenario")
    return F.reshape(s.shape), s


def _reference_wq(value: str | None, scenario: pt.Scenario) -> float | None:
    """A float, or a sidecar JSON file mapping 'nx,ny,na,nb' to w_Q."""
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        pass
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"reference w_Q {value!r} is neither a number nor a file")
    data = json.loads(path.read_text())
    key = str(scenario)
    if isinstance(data, dict) and key in data:
        return float(data[key])
    raise ConfigError(f"reference file has no entry for scenario {key}")


def _scenario(args) -> pt.Scenario | None:
    if getattr(args, "scenario", None) is None:
        return None
    try:
        return pt.Scenario.parse(args.scenario)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _emit(obj: dict, output: str | None) -> None:
    text = ex.dumps(ex._sanitize(obj))
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text)


RUNTIME_KEYS = ("func", "output", "outdir", "workers")


def _config(args) -> dict:
    """Resolved configuration; flags that cannot change results are left out."""
    return {k: v for k, v in sorted(vars(args).items()) if k not in RUNTIME_KEYS}


def _runtime(args) -> dict:
    return {k: getattr(args, k) for k in ("outdir", "workers") if hasattr(args, k)}


def _protocol(args) -> _lhv.Protocol:
    if args.protocol == "semianalytical":
        try:
            coeffs = _lhv.load_preset(args.preset) if args.preset else _lhv.preset_for_theta(args.theta_rad)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        return _lhv.SemianalyticalProtocol(coeffs)
    return _lhv.make_protocol(args.protocol)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    state = TwoQubitState(args.theta_rad)
    protocol = _protocol(args)
    if args.a or args.b:
        if not (args.a and args.b):
            raise ConfigError("give both --a and --b, or neither")
        settings = [(_vector(args.a), _vector(args.b))]
    else:
        settings = stats.random_settings(args.settings, args.seed)
    rows = []
    for i, (a, b) in enumerate(settings):
        model = _lhv.estimate_behavior(protocol, a, b, args.n, _lhv.stream(args.seed, i))
        target = born_behavior(state, a, b).table[0, 0]
        rep = stats.DivergenceReport.compare(target, model, a, b)
        signs = np.array([1.0, -1.0])
        e_model = float(signs @ model @ signs)
        _, _, e_q = closed_form_stats(state, a, b)
        rows.append(
            {
                "a_hat": a.tolist(),
                "b_hat": b.tolist(),
                "model_table": model.tolist(),
                "born_table": target.tolist(),
                "correlator_model": e_model,
                "correlator_quantum": e_q,
                "kl": rep.kl,
                "tvd": rep.tvd,
                "n95": rep.n95,
            }
        )
        print(
            f"setting {i}: E_model={e_model:+.5f} E_quantum={e_q:+.5f} "
            f"kl={rep.kl:.3e} tvd={rep.tvd:.3e} n95={rep.n95:.4g}"
        )
    config = _config(args)
    body = {"config": config, "settings": rows, **protocol.describe()}
    _emit(body, args.output)
    files = {"report.json": ex.dumps(ex._sanitize(body))}
    run = ex.write_run("simulate", args.seed, config, files, args.outdir, runtime=_runtime(args))
    print(f"run directory: {run}")
    return EXIT_OK


def cmd_distance(args) -> int:
    if args.target or args.model:
        if not (args.target and args.model):
            raise ConfigError("give both --target and --model")
        P = _load_behavior(args.target, None)
        Q = _load_behavior(args.model, None)
        if P.scenario != Q.scenario:
            raise ConfigError("target and model scenarios differ")
        blocks = []
        nx, ny = P.scenario[:2]
        for x in range(nx):
            for y in range(ny):
                rep = stats.DivergenceReport.compare(P.table[x, y], Q.table[x, y], smoothing=args.smoothing)
                blocks.append({"x": x, "y": y, "kl": rep.kl, "tvd": rep.tvd, "n95": rep.n95})
                print(f"x={x} y={y} kl={rep.kl:.6e} tvd={rep.tvd:.6e} n95={rep.n95:.6g}")
        _emit({"config": _config(args), "blocks": blocks}, args.output)
        return EXIT_OK
    state = TwoQubitState(args.theta_rad)
    protocol = _protocol(args)
    settings = stats.random_settings(args.settings, args.seed)
    summ = stats.sweep(protocol, state, settings, n=args.n, seed=args.seed,
                       smoothing=args.smoothing, workers=args.workers)
    q = summ.quantiles
    print(f"median kl={q['kl']['median']:.4e} tvd={q['tvd']['median']:.4e} n95={q['n95']['median']:.4g}")
    config = _config(args)
    run = ex.write_run(
        "distance", args.seed, config,
        {"settings.csv": ex.csv_with_config(summ.to_csv(), config),
         "report.json": ex.dumps({"config": ex._sanitize(config), "result": ex._sanitize(summ.summary_dict())})},
        args.outdir,
        runtime=_runtime(args),
    )
    print(f"run directory: {run}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    s = _scenario(args)
    vl = pt.enumerate_vertices(s, args.set)
    print(len(vl))
    if args.set == "comm":
        print(f"raw strategies before deduplication: {s.naive_comm_count()}")
        if s.printed_comm_count() != len(vl):
            print(f"count with leading factor |A| instead of |A|^|X|: {s.printed_comm_count()} (differs)")
    if args.output:
        Path(args.output).write_text(vl.to_jsonl())
    return EXIT_OK


def cmd_membership(args) -> int:
    s = _scenario(args)
    P = _load_behavior(args.point, s)
    s = s or pt.Scenario(*P.scenario)
    res = pt.membership(P, s, args.set, tol=args.tol)
    print(f"inside={res.inside} distance={res.distance:.3e} iterations={res.iterations}")
    if not res.inside:
        print(f"separating margin={res.margin:.6e}")
    _emit({"config": _config(args), "result": res.to_dict()}, args.output)
    return EXIT_OK


def cmd_visibility(args) -> int:
    s = _scenario(args)
    P = _load_behavior(args.point, s)
    s = s or pt.Scenario(*P.scenario)
    noise = _load_behavior(args.noise, s)
    wq = _reference_wq(args.reference_wq, s)
    report = ex.visibility_study(s, P, noise, reference_wq=wq, set_tag=args.set, method=args.method)
    print(f"w*={report['w_star']:.4f} (weight on the point)")
    print(f"noise threshold w_C={report['w_c']:.4f}")
    if wq is not None:
        print(f"w_Q={wq:.4f} (external reference) gap={report['gap']:.4f} status={report['status']}")
    _emit({"config": _config(args), "result": report}, args.output)
    return EXIT_OK


def cmd_haar_scan(args) -> int:
    s = _scenario(args)
    if s is None:
        raise ConfigError("--scenario is required")
    d = args.dimension or s.na
    report = ex.haar_scan(s, d, args.points, args.seed, conjugate_bob=args.conjugate_bob, workers=args.workers)
    print(
        f"points={report.n_points} in L={100 * report.fraction_in_local:.1f}% "
        f"(+/- {100 * report.binomial_error():.1f}) outside C={report.n_outside_comm} "
        f"unresolved={report.n_unresolved}"
    )
    config = _config(args)
    run = ex.write_run("haar-scan", args.seed, config, ex.scan_files(report, config),
                       args.outdir, runtime=_runtime(args))
    print(f"run directory: {run}")
    return EXIT_OK


def cmd_theta_sweep(args) -> int:
    results = ex.theta_sweep(
        args.thetas, settings_count=args.settings, n=args.n, seed=args.seed,
        protocol=args.protocol, workers=args.workers, smoothing=args.smoothing,
    )
    for name, summ in results.items():
        q = summ.quantiles
        print(f"{name}: median kl={q['kl']['median']:.4e} tvd={q['tvd']['median']:.4e} n95={q['n95']['median']:.4g}")
    config = _config(args)
    run = ex.write_run("theta-sweep", args.seed, config, ex.sweep_files(results, config),
                       args.outdir, runtime=_runtime(args))
    print(f"run directory: {run}")
    return EXIT_OK


def cmd_bell_value(args) -> int:
    F, s = _load_functional(args.functional, _scenario(args))
    strat, value = pt.comm_oracle(F, s, args.set)
    shown = value / (s.nx * s.ny) if args.game else value
    print(f"{shown:.10g}")
    _emit({"config": _config(args), "value": shown, "raw_value": value, "maximiser": strat.to_dict()}, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onebit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({_backend.BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outdir=False, workers=False):
        p.add_argument("--seed", type=int, default=0, help="recorded in every output")
        p.add_argument("--output", help="write the primary JSON result here")
        if outdir:
            p.add_argument("--outdir", default=None, help=f"run directory root (default ${ex.OUTPUT_ENV} or ./runs)")
        if workers:
            p.add_argument("--workers", type=int, default=1)

    def protocol_args(p):
        p.add_argument("--protocol", choices=["max-entangled", "toner-bacon", "semianalytical"], default="max-entangled")
        p.add_argument("--theta", default="pi/4", help="radians or a pi fraction such as 5pi/32")
        p.add_argument("--preset", help="coefficient preset name or JSON file (semianalytical)")
        p.add_argument("--n", type=int, default=_lhv.DEFAULT_SAMPLES, help="LHV samples per setting")
        p.add_argument("--settings", type=int, default=1, help="number of random setting pairs")

    p = sub.add_parser("simulate", help="Monte Carlo protocol tables vs the Born rule")
    protocol_args(p)
    p.add_argument("--a", help="Alice's direction x,y,z")
    p.add_argument("--b", help="Bob's direction x,y,z")
    common(p, outdir=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distance", help="KL / TVD / n95 between behaviours or over a protocol sweep")
    protocol_args(p)
    p.add_argument("--target", help="target behaviour JSON")
    p.add_argument("--model", help="model behaviour JSON")
    p.add_argument("--smoothing", type=float, default=None, help="floor model entries at this value")
    common(p, outdir=True, workers=True)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("enumerate", help="count (and export) polytope vertices")
    p.add_argument("--scenario", required=True)
    p.add_argument("--set", choices=pt.SET_TAGS, default="comm")
    common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("membership", help="decide membership of a behaviour in L or C")
    p.add_argument("--scenario")
    p.add_argument("--point", required=True, help="behaviour JSON or builtin:table2|white|maxcorr")
    p.add_argument("--set", choices=pt.SET_TAGS, default="comm")
    p.add_argument("--tol", type=float, default=pt.MEMBERSHIP_TOL)
    common(p)
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("visibility", help="threshold mixing weight against noise")
    p.add_argument("--scenario")
    p.add_argument("--point", required=True)
    p.add_argument("--noise", default="white")
    p.add_argument("--set", choices=pt.SET_TAGS, default="comm")
    p.add_argument("--method", choices=["bisection", "direct"], default="bisection")
    p.add_argument("--reference-wq", help="external quantum threshold: number or sidecar JSON")
    common(p)
    p.set_defaults(func=cmd_visibility)

    p = sub.add_parser("haar-scan", help="Haar-random qudit measurements vs L and C")
    p.add_argument("--scenario", required=True)
    p.add_argument("--dimension", type=int, default=None)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--conjugate-bob", action="store_true")
    common(p, outdir=True, workers=True)
    p.set_defaults(func=cmd_haar_scan)

    p = sub.add_parser("theta-sweep", help="divergence distributions across states")
    p.add_argument("--thetas", nargs="+", default=_lhv.preset_names())
    p.add_argument("--protocol", choices=["semianalytical", "max-entangled", "toner-bacon"], default="semianalytical")
    p.add_argument("--settings", type=int, default=500)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--smoothing", type=float, default=None)
    common(p, outdir=True, workers=True)
    p.set_defaults(func=cmd_theta_sweep)

    p = sub.add_parser("bell-value", help="maximum of a Bell functional over L or C")
    p.add_argument("--functional", required=True, help="JSON file or builtin:table2|builtin:chsh")
    p.add_argument("--scenario")
    p.add_argument("--set", choices=pt.SET_TAGS, default="comm")
    p.add_argument("--game", action="store_true", help="divide by nx*ny")
    common(p)
    p.set_defaults(func=cmd_bell_value)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if hasattr(args, "theta"):
            args.theta_rad = ex.parse_theta(args.theta)
        if getattr(args, "n", 1) < 1:
            raise ConfigError("--n must be at least 1")
        return args.func(args)
    except pt.GuardExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except pt.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
