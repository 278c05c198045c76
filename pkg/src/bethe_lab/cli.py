"""Command-line front end.

Every command prints (or writes to ``--output``) a JSON document that
echoes the full resolved configuration and the tool version.  Flags mirror
the keys of an optional ``--config file.json``; flags win.

Exit codes: 0 success, 1 invalid configuration, 2 verification failure,
3 runtime or I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .disorder import DisorderSpec
from .errors import BetheLabError, ConfigurationError, VerificationFailure
from .lyapunov import (
    PoolConfig,
    ac_density,
    delocalization_criterion,
    estimate_finite_depth,
    extrapolate_eta,
    population_dynamics,
)
from .phase import EstimatorConfig, edge_window, export, scan
from .scatter import export_profile, transmission_profile
from .tree import (
    free_forward_green,
    free_lattice_green,
    free_lyapunov,
    spectrum_edges,
    weak_disorder_threshold,
)
from . import verify as checks

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULTS = {
    "K": 2, "lam": 0.0, "E": 0.0, "eta": 1e-6, "R": 14, "n": 200, "seed": 0,
    "threads": None, "disorder": "uniform-symmetric", "method": "finite-depth",
    "boundary": "free", "pool_size": 2000, "burn_in": 20, "sweeps": 20,
    "extrapolate": False, "etas": "1e-3,1e-4,1e-5", "output": None, "format": "json",
    "lambdas": "0", "energies": "0", "side": "both", "delta_max": None,
    "resolution": 1e-3, "probes": 8, "k": math.pi / 2, "M": 6, "s": 0.5,
    "depths": "2,4,6,8", "deltas": "0.02,0.04,0.08", "sweep": "", "delta": 0.1,
    "reference": "rooted",
}

VERIFY_DEFAULTS = {
    "lb": {"lam": 0.05, "R": 10, "n": 1000},
    "gap": {"lam": 0.05, "R": 16, "n": 400, "eta": 0.0},
    "trunc": {"lam": 0.05, "R": 8, "n": 1000, "eta": 1e-4},
    "boundary": {"lam": 0.05, "n": 200, "eta": 0.0, "depths": "6,8,10,12"},
    "moments": {"lam": 0.05, "n": 400, "eta": 0.0},
    "lifshitz": {"lam": 0.05, "R": 6, "n": 2000},
    "main": {"lam": 0.05, "R": 10, "n": 200, "eta": 1e-4},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text) -> list[float]:
    """Comma list ``a,b,c`` or linspace ``start:stop:num``."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        start, stop, num = text.split(":")
        return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
    return [float(x) for x in text.split(",")]


def _disorder(value) -> DisorderSpec:
    if isinstance(value, DisorderSpec):
        return value
    if isinstance(value, dict):
        return DisorderSpec.from_dict(value)
    value = str(value)
    if value.lstrip().startswith("{"):
        return DisorderSpec.from_json(value)
    return DisorderSpec(value)


def _clean(obj):
    """JSON-ready copy with floats rounded to 9 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.9g}")
    if isinstance(obj, DisorderSpec):
        return _clean(obj.to_dict())
    return obj


def _common(p, *names):
    flags = {
        "K": dict(type=int, help="branching number"),
        "lam": dict(flags=("--lambda",), type=float, help="disorder strength"),
        "E": dict(type=float, help="energy"),
        "eta": dict(type=float, help="imaginary part of the spectral parameter"),
        "R": dict(type=int, help="tree depth"),
        "n": dict(type=int, help="number of disorder samples"),
        "method": dict(choices=["finite-depth", "population", "closed-form"]),
        "boundary": dict(choices=["open", "free"]),
        "pool_size": dict(type=int), "burn_in": dict(type=int), "sweeps": dict(type=int),
    }
    for name in names:
        spec = dict(flags[name])
        opts = spec.pop("flags", ("--" + name.replace("_", "-"),))
        p.add_argument(*opts, dest=name, default=None, **spec)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="bethe-lab", description=__doc__.splitlines()[0])
    root.add_argument("--version", action="version", version=__version__)
    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--seed", type=int, default=None)
    base.add_argument("--threads", type=int, default=None,
                      help="worker threads (default: $BETHE_LAB_THREADS or CPU count)")
    base.add_argument("--config", default=None, help="JSON file with default flag values")
    base.add_argument("--output", default=None, help="write the result here instead of stdout")
    base.add_argument("--disorder", default=None,
                      help="disorder kind or JSON spec, e.g. '{\"kind\": \"gaussian\", \"params\": {}}'")
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("free", parents=[base], help="lambda = 0 closed forms")
    _common(p, "K", "E")

    p = sub.add_parser("spectrum", parents=[base], help="almost-sure spectrum edges")
    _common(p, "K", "lam")

    p = sub.add_parser("lyap", parents=[base], help="Lyapunov exponent estimate")
    _common(p, "K", "lam", "E", "eta", "R", "n", "method", "boundary", "pool_size", "burn_in", "sweeps")
    p.add_argument("--extrapolate", action="store_true", default=None,
                   help="fit over --etas and report the eta -> 0 intercept")
    p.add_argument("--etas", default=None)

    p = sub.add_parser("acdensity", parents=[base], help="ac spectral density at a vertex")
    _common(p, "K", "lam", "E", "eta", "R", "n", "pool_size", "burn_in", "sweeps")
    p.add_argument("--method", dest="method", choices=["population", "finite-depth"], default=None)

    p = sub.add_parser("phase", parents=[base], help="(lambda, E) phase grid")
    _common(p, "K", "eta", "R", "n", "method", "boundary", "pool_size", "burn_in", "sweeps")
    p.add_argument("--lambdas", default=None, help="comma list or start:stop:num")
    p.add_argument("--energies", default=None, help="comma list or start:stop:num")
    p.add_argument("--format", choices=["json", "csv"], default=None)

    p = sub.add_parser("edge-window", parents=[base], help="width of the delocalized edge window")
    _common(p, "K", "lam", "eta", "R", "n", "method", "boundary", "pool_size", "burn_in", "sweeps")
    p.add_argument("--side", choices=["lower", "upper", "both"], default=None)
    p.add_argument("--delta-max", dest="delta_max", type=float, default=None)
    p.add_argument("--resolution", type=float, default=None)
    p.add_argument("--probes", type=int, default=None)

    p = sub.add_parser("scatter", parents=[base], help="wire reflection profile (CSV)")
    _common(p, "K", "lam", "eta", "n", "pool_size", "burn_in", "sweeps")
    p.add_argument("--energies", default=None)
    p.add_argument("--k", type=float, default=None, help="wire wave number in (0, pi)")

    p = sub.add_parser("verify", parents=[base], help="proof-step checks")
    p.add_argument("check", choices=sorted(VERIFY_DEFAULTS))
    _common(p, "K", "lam", "E", "eta", "R", "n", "method", "boundary", "pool_size", "burn_in", "sweeps")
    p.add_argument("--M", type=int, default=None, help="extra depth standing in for the full tree")
    p.add_argument("--s", type=float, default=None, help="fractional moment exponent")
    p.add_argument("--depths", default=None)
    p.add_argument("--deltas", default=None, help="energy offsets above the edge")
    p.add_argument("--sweep", default=None, help="extra lambda values for the gap report")
    p.add_argument("--delta", type=float, default=None, help="decay exponent in the composed bound")
    p.add_argument("--reference", choices=["rooted", "lattice"], default=None)
    return root


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, ``--config`` file and explicit flags (in that order)."""
    explicit = {k: v for k, v in vars(args).items() if v is not None}
    cfg = dict(DEFAULTS)
    if args.command == "verify":
        cfg.update(VERIFY_DEFAULTS[args.check])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigurationError("config file must hold a JSON object")
        loaded = {("lam" if k == "lambda" else k.replace("-", "_")): v for k, v in loaded.items()}
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update(explicit)
    cfg.pop("config", None)
    if cfg["K"] < 2:
        raise ConfigurationError("K must be >= 2")
    if cfg["lam"] < 0:
        raise ConfigurationError("lambda must be >= 0")
    if cfg["threads"] is not None and cfg["threads"] < 1:
        raise ConfigurationError("threads must be >= 1")
    cfg["disorder"] = _disorder(cfg["disorder"])
    return cfg


def _echo(cfg: dict) -> dict:
    """Resolved values of the flags this command accepts."""
    keep = cfg.get("_accepted", set(cfg))
    return {("lambda" if k == "lam" else k): v for k, v in cfg.items()
            if k in keep and not k.startswith("_")}


def _estimator(cfg) -> EstimatorConfig:
    method = "population" if cfg["method"] == "population" else cfg["method"]
    return EstimatorConfig(method=method, eta=cfg["eta"], R=cfg["R"], n=cfg["n"],
                           boundary=cfg["boundary"], pool_size=cfg["pool_size"],
                           burn_in=cfg["burn_in"], sweeps=cfg["sweeps"], disorder=cfg["disorder"])


def _cmd_free(cfg):
    K, E = cfg["K"], cfg["E"]
    L0 = free_lyapunov(K, E)
    return {"L0": L0, "gamma0": free_forward_green(K, E), "G0": free_lattice_green(K, E),
            "criterion": "holds" if L0 < math.log(K) else "fails", "log_K": math.log(K)}


def _cmd_spectrum(cfg):
    lo, hi = spectrum_edges(cfg["K"], cfg["lam"])
    return {"E_lambda": lo, "edges": [lo, hi], "weak_disorder_threshold": weak_disorder_threshold(cfg["K"])}


def _lyap_once(cfg, eta):
    K, lam, E, spec = cfg["K"], cfg["lam"], cfg["E"], cfg["disorder"]
    if cfg["method"] == "population":
        _, est = population_dynamics(K, lam, E, eta, cfg["pool_size"], cfg["burn_in"],
                                     cfg["sweeps"], spec, cfg["seed"])
        return est
    if cfg["method"] == "closed-form":
        raise ConfigurationError("use the 'free' command for closed forms")
    return estimate_finite_depth(K, lam, E, eta, cfg["R"], cfg["n"], spec, cfg["seed"],
                                 cfg["boundary"], cfg["threads"])


def _cmd_lyap(cfg):
    if cfg["extrapolate"]:
        etas = _floats(cfg["etas"])
        series = [(eta, _lyap_once(cfg, eta)) for eta in etas]
        est = extrapolate_eta(series)
        extra = {"series": [s.to_dict() for _, s in series]}
    else:
        est = _lyap_once(cfg, cfg["eta"])
        extra = {}
    out = est.to_dict(K=cfg["K"], **{"lambda": cfg["lam"]}, E=cfg["E"])
    out["seed"] = cfg["seed"]
    out["criterion"] = delocalization_criterion(est, cfg["K"]).value
    out.update(extra)
    return out


def _cmd_acdensity(cfg):
    method = cfg["method"] if cfg["method"] in ("population", "finite-depth") else "population"
    dens, frac = ac_density(cfg["K"], cfg["lam"], cfg["E"], cfg["eta"], cfg["n"], cfg["disorder"],
                            cfg["seed"], method, cfg["R"],
                            PoolConfig(cfg["pool_size"], cfg["burn_in"], cfg["sweeps"]), cfg["threads"])
    return {"ac_density": dens, "fraction_positive": frac}


def _cmd_phase(cfg):
    grid = scan(cfg["K"], _floats(cfg["lambdas"]), _floats(cfg["energies"]), _estimator(cfg),
                cfg["seed"], cfg["threads"])
    return grid


def _cmd_edge_window(cfg):
    w = edge_window(cfg["K"], cfg["lam"], _estimator(cfg), cfg["seed"], cfg["side"], cfg["delta_max"],
                    cfg["resolution"], cfg["probes"], cfg["threads"])
    probes = [{"E": E, "mean": m, "stderr": s, "criterion": c}
              for E, (m, s, c) in sorted(w.probes.items())]
    return {"delta_hat": w.delta, "edge": w.edge, "diagnostic": w.diagnostic, "probes": probes}


def _cmd_scatter(cfg):
    return transmission_profile(cfg["K"], cfg["lam"], _floats(cfg["energies"]), cfg["eta"], cfg["n"],
                                cfg["disorder"], cfg["seed"], cfg["k"], "population",
                                PoolConfig(cfg["pool_size"], cfg["burn_in"], cfg["sweeps"]),
                                cfg["threads"])


def _cmd_verify(cfg):
    K, lam, spec, seed, th = cfg["K"], cfg["lam"], cfg["disorder"], cfg["seed"], cfg["threads"]
    e_lam = spectrum_edges(K, lam)[0]
    E = cfg["E"] if "E" in cfg.get("_explicit", ()) else None
    check = cfg["check"]
    if check == "lb":
        return checks.check_monotone_bound(K, lam, cfg["R"], cfg["n"], spec, seed, th)
    if check == "gap":
        return checks.check_lyapunov_gap(K, lam, _estimator(cfg), seed, _floats(cfg["sweep"]), th)
    if check == "trunc":
        return checks.check_truncation(K, lam, e_lam + 0.02 if E is None else E, cfg["R"], cfg["M"],
                                       cfg["eta"], cfg["n"], spec, seed, th)
    if check == "boundary":
        return checks.check_boundary_decay(K, lam, e_lam if E is None else E,
                                           [int(d) for d in _floats(cfg["depths"])], cfg["n"], spec,
                                           seed, cfg["eta"], th)
    if check == "moments":
        return checks.check_fractional_moments(K, lam, e_lam if E is None else E, cfg["eta"], cfg["s"],
                                               [int(d) for d in _floats(cfg["depths"])], cfg["n"],
                                               spec, seed, threads=th)
    if check == "lifshitz":
        return checks.check_edge_gate(K, cfg["R"], lam, _floats(cfg["deltas"]), cfg["n"], spec, seed, th)
    return checks.main_term_bound(K, lam, e_lam + 0.02 if E is None else E, cfg["R"], cfg["M"],
                                  cfg["n"], spec, seed, cfg["eta"], cfg["delta"], cfg["reference"],
                                  threads=th)


def _emit(text: str, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _json_doc(cfg, result) -> str:
    doc = {"tool": "bethe_lab", "version": __version__, "command": cfg["command"],
           "config": _echo(cfg), "result": result}
    return json.dumps(_clean(doc), indent=1) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        cfg["_explicit"] = {k for k, v in vars(args).items() if v is not None}
        cfg["_accepted"] = set(vars(args)) - {"config", "threads", "output", "command"}
        cmd = args.command
        if cmd == "phase":
            grid = _cmd_phase(cfg)
            if cfg["format"] == "csv":
                if not cfg["output"]:
                    raise ConfigurationError("CSV output needs --output")
                export(grid, "csv", cfg["output"])
                json_path = Path(cfg["output"]).with_suffix(".json")
                export(grid, "json", json_path)
            else:
                doc = grid.to_dict()
                doc["config"] = _clean(_echo(cfg))
                _emit(json.dumps(_clean(doc), indent=1) + "\n", cfg["output"])
            return EXIT_OK
        if cmd == "scatter":
            rows = _cmd_scatter(cfg)
            if cfg["output"]:
                export_profile(rows, cfg["output"])
                Path(cfg["output"]).with_suffix(".json").write_text(
                    _json_doc(cfg, [r.__dict__ for r in rows]))
            else:
                _emit(_json_doc(cfg, [r.__dict__ for r in rows]), None)
            return EXIT_OK
        handlers = {"free": _cmd_free, "spectrum": _cmd_spectrum, "lyap": _cmd_lyap,
                    "acdensity": _cmd_acdensity, "edge-window": _cmd_edge_window,
                    "verify": _cmd_verify}
        try:
            result = handlers[cmd](cfg)
        except VerificationFailure as exc:
            report = exc.report.to_dict() if hasattr(exc.report, "to_dict") else {"detail": str(exc.report)}
            report["error"] = str(exc)
            _emit(_json_doc(cfg, report), cfg["output"])
            print(f"verification failed: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        if cmd == "verify":
            result = result.to_dict()
        _emit(_json_doc(cfg, result), cfg["output"])
        if cmd == "verify" and not result["pass"]:
            return EXIT_VERIFY
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"bethe-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BetheLabError, OSError, ArithmeticError) as exc:
        print(f"bethe-lab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
