"""Command-line surface: reproducible runs writing stable CSV/JSON outputs.

Every output carries a metadata block (tool version, command, full flag
set, seed) and contains no timestamps, so re-running a command with the
same flags yields byte-identical files.  Exit codes: 0 success, 2 usage,
3 I/O, 4 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bell import (
    BellReport,
    TimeQuadruple,
    bell_report,
    combination_search,
    lrt_bound_exponential,
    p_threshold,
    qm_r_factor,
    theta_scan,
    x_threshold,
)
from .kinematics import (
    BoostConfig,
    SeparationCriterion,
    derive_boost,
    ps_curve,
    required_delta_t_max,
)
from .lrt import InsufficientDataError, MODEL_REGISTRY, make_model
from .montecarlo import (
    EmptySubensembleError,
    bin_delta,
    delta_correlation_table,
    estimate_correlation,
    generate_model_events,
    generate_qm_events,
    read_events_csv,
    write_events_csv,
)
from .params import BUILTIN_SPECIES, MesonParams, species_params

REQUIRE_SEED_ENV = "MESONBELL_REQUIRE_SEED"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INSUFFICIENT_DATA = 4


class UsageError(ValueError):
    pass


def _read_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    cfg: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"bad config line (expected key = value): {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _resolve(args, cfg: dict[str, str], key: str, default, cast):
    """Precedence: explicit flag > config file > built-in default."""
    flag = getattr(args, key.replace("-", "_"))
    if flag is not None:
        return flag
    if key in cfg:
        return cast(cfg[key])
    return default


def _resolve_params(args, cfg: dict[str, str]) -> MesonParams:
    species = _resolve(args, cfg, "species", None, str)
    x = _resolve(args, cfg, "x", None, float)
    delta_m = _resolve(args, cfg, "delta-m", None, float)
    gamma = _resolve(args, cfg, "gamma", None, float)
    picked = sum(v is not None for v in (species, x, delta_m))
    if picked > 1:
        raise UsageError("give only one of --species, --x, or --delta-m/--gamma")
    if x is not None:
        return MesonParams(label=f"x={x:g}", delta_m=float(x), gamma=1.0)
    if delta_m is not None or gamma is not None:
        if delta_m is None or gamma is None:
            raise UsageError("--delta-m and --gamma must be given together")
        return MesonParams(label="custom", delta_m=float(delta_m), gamma=float(gamma))
    if species is None:
        species = "B"
    try:
        return species_params(species)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolve_seed(args, cfg: dict[str, str]) -> int:
    seed = _resolve(args, cfg, "seed", None, int)
    if seed is None:
        if os.environ.get(REQUIRE_SEED_ENV):
            raise UsageError(f"--seed is required when {REQUIRE_SEED_ENV} is set")
        return 0
    return int(seed)


def _fmt(v: float) -> str:
    return repr(float(v))


def _metadata_lines(command: str, flags: dict) -> list[str]:
    lines = [f"# tool = mesonbell {__version__}", f"# command = {command}"]
    for key in sorted(flags):
        lines.append(f"# {key} = {flags[key]}")
    return lines


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _write_sidecar(path: str, command: str, flags: dict) -> None:
    payload = {"tool": f"mesonbell {__version__}", "command": command, "flags": flags}
    _write_text(path + ".meta.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _add_species_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--species", choices=sorted(BUILTIN_SPECIES), default=None,
                   help="built-in constants (default B)")
    p.add_argument("--x", type=float, default=None,
                   help="custom oscillation ratio delta_m/gamma in natural units")
    p.add_argument("--delta-m", type=float, default=None, help="custom delta_m in 1/s")
    p.add_argument("--gamma", type=float, default=None, help="custom gamma in 1/s")


def cmd_constants(args) -> int:
    cfg = _read_config(args.config)
    params = _resolve_params(args, cfg)
    print(f"species   = {params.label}")
    print(f"delta_m   = {params.delta_m!r} 1/s")
    print(f"gamma     = {params.gamma!r} 1/s")
    print(f"x         = {params.x!r}")
    print(f"x_threshold = {x_threshold()!r}")
    print(f"p_threshold = {p_threshold()!r}")
    return EXIT_OK


def cmd_fig2(args) -> int:
    cfg = _read_config(args.config)
    params = _resolve_params(args, cfg)
    theta_min = float(_resolve(args, cfg, "theta-min", 0.0, float))
    theta_max = float(_resolve(args, cfg, "theta-max", math.pi / 2.0, float))
    steps = int(_resolve(args, cfg, "steps", 200, int))
    scan = theta_scan(params, theta_min, theta_max, steps)
    flags = {
        "species": params.label, "delta_m": _fmt(params.delta_m), "gamma": _fmt(params.gamma),
        "theta_min": _fmt(theta_min), "theta_max": _fmt(theta_max), "steps": steps,
    }
    lines = _metadata_lines("fig2", flags)
    lines.append("theta_rad,r_qm,lrt_bound")
    for th, r, b in zip(scan.theta, scan.r_qm, scan.lrt_bound):
        lines.append(f"{_fmt(th)},{_fmt(r)},{_fmt(b)}")
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.sidecar:
        _write_sidecar(args.out, "fig2", flags)
    return EXIT_OK


def cmd_fig3(args) -> int:
    cfg = _read_config(args.config)
    params = _resolve_params(args, cfg)
    seed = _resolve_seed(args, cfg)
    n = int(_resolve(args, cfg, "n", 20000, int))
    betas_raw = _resolve(args, cfg, "betas", None, str)
    if betas_raw is None:
        betas = [derive_boost(0.425).beta]
    else:
        betas = [float(b) for b in str(betas_raw).split(",") if b.strip()]
    if not betas or not all(0.0 <= b < 1.0 for b in betas):
        raise UsageError(f"betas must lie in [0, 1), got {betas_raw!r}")
    criterion = SeparationCriterion(_resolve(args, cfg, "criterion", "full-interval", str))
    dt_max = float(_resolve(args, cfg, "dt-max", 1.2 * required_delta_t_max(params), float))
    points = int(_resolve(args, cfg, "points", 25, int))
    grid = np.linspace(0.0, dt_max, points)

    curves = []
    for k, beta in enumerate(betas):
        config = BoostConfig(beta=beta)
        curves.append(ps_curve(config, params, grid, criterion, n, seed + 1000 * k))
    attainable = any(c.attainable for c in curves)
    summary = (
        "threshold attainable over the required range"
        if attainable
        else "threshold not attainable over the required range"
    )

    flags = {
        "species": params.label, "delta_m": _fmt(params.delta_m), "gamma": _fmt(params.gamma),
        "betas": ",".join(_fmt(b) for b in betas), "criterion": criterion.value,
        "n": n, "seed": seed, "dt_max": _fmt(dt_max), "points": points,
    }
    lines = _metadata_lines("fig3", flags)
    lines.append(f"# p_threshold = {_fmt(2.0 - math.sqrt(2.0))}")
    lines.append(f"# summary = {summary}")
    lines.append("delta_t_s,beta,criterion,p_s,stderr")
    for beta, curve in zip(betas, curves):
        for row in curve.rows:
            lines.append(
                f"{_fmt(row.delta_t)},{_fmt(beta)},{criterion.value},"
                f"{_fmt(row.p_s)},{_fmt(row.stderr)}"
            )
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.sidecar:
        _write_sidecar(args.out, "fig3", flags)
    print(summary)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _read_config(args.config)
    params = _resolve_params(args, cfg)
    seed = _resolve_seed(args, cfg)
    n = int(_resolve(args, cfg, "n", 100000, int))
    if n < 0:
        raise UsageError(f"n must be >= 0, got {n}")
    model_name = _resolve(args, cfg, "model", "qm", str)
    bin_width = float(_resolve(args, cfg, "bin-width", 0.1 / params.gamma, float))
    dt_max = float(_resolve(args, cfg, "dt-max", 10.0 / params.gamma, float))

    if model_name == "qm":
        batch = generate_qm_events(params, n, seed, n_threads=args.threads)
    elif model_name in MODEL_REGISTRY:
        batch = generate_model_events(make_model(model_name, params), n, seed,
                                      n_threads=args.threads)
    else:
        known = ", ".join(["qm"] + sorted(MODEL_REGISTRY))
        raise UsageError(f"unknown model {model_name!r} (known: {known})")

    write_events_csv(args.out, batch)

    hist = bin_delta(batch, bin_width, dt_max)
    rows = delta_correlation_table(hist)
    corr_out = args.corr_out or str(Path(args.out).with_suffix("")) + ".corr.csv"
    flags = {
        "model": model_name, "species": params.label, "delta_m": _fmt(params.delta_m),
        "gamma": _fmt(params.gamma), "n": n, "seed": seed,
        "bin_width": _fmt(bin_width), "dt_max": _fmt(dt_max), "overflow": hist.overflow,
    }
    lines = _metadata_lines("simulate", flags)
    lines.append("dt_center_s,c_est,stderr,n_events")
    for row in rows:
        lines.append(f"{_fmt(row.dt_center)},{_fmt(row.value)},{_fmt(row.stderr)},{row.n_events}")
    _write_text(corr_out, "\n".join(lines) + "\n")
    if args.sidecar:
        _write_sidecar(corr_out, "simulate", flags)
    return EXIT_OK


def cmd_bell(args) -> int:
    cfg = _read_config(args.config)
    params = _resolve_params(args, cfg)
    try:
        t1, t1p, t2, t2p = (float(v) for v in args.times.split(","))
    except ValueError as exc:
        raise UsageError(f"--times must be four comma-separated seconds: {exc}") from exc
    q = TimeQuadruple(t1, t1p, t2, t2p)

    if args.events is None:
        report = bell_report(params, q)
    else:
        batch = read_events_csv(args.events)
        bin_width = float(_resolve(args, cfg, "bin-width", 0.1 / params.gamma, float))
        dts = q.delta_ts()
        dt_max = max(dts) + 2.0 * bin_width
        hist = bin_delta(batch, bin_width, dt_max)
        missing = [dt for dt in dts if hist.counts[hist.bin_of(dt)].sum() == 0]
        if missing:
            raise EmptySubensembleError(
                "no events in required delta_t bin(s): "
                + ", ".join(_fmt(dt) for dt in sorted(set(missing)))
            )
        ests = {dt: estimate_correlation(hist.counts[hist.bin_of(dt)]) for dt in set(dts)}
        r = abs(ests[dts[0]].value + ests[dts[1]].value + ests[dts[2]].value - ests[dts[3]].value)
        report = BellReport.from_values(r, lrt_bound_exponential(params, q))

    payload = {
        "r_value": report.r_value,
        "lrt_bound": report.lrt_bound,
        "qm_max": report.qm_max,
        "margin": report.margin,
        "verdict": report.verdict,
        "times_s": {"t1": q.t1, "t1p": q.t1p, "t2": q.t2, "t2p": q.t2p},
        "params": {"label": params.label, "delta_m": params.delta_m, "gamma": params.gamma},
        "source": "events" if args.events else "analytic",
        "tool": f"mesonbell {__version__}",
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_search(args) -> int:
    cfg = _read_config(args.config)
    params = _resolve_params(args, cfg)
    seed = _resolve_seed(args, cfg)
    samples = int(_resolve(args, cfg, "samples", 100000, int))
    t_max = float(_resolve(args, cfg, "t-max", 10.0 / params.gamma, float))
    result = combination_search(params, samples, seed, t_range=(0.0, t_max))
    q = result.argmax
    payload = {
        "max_margin": result.max_margin,
        "argmax_s": {"t1": q.t1, "t1p": q.t1p, "t2": q.t2, "t2p": q.t2p},
        "r_at_argmax": qm_r_factor(params, q),
        "n_samples": result.n_samples,
        "seed": result.seed,
        "t_max_s": t_max,
        "params": {"label": params.label, "delta_m": params.delta_m, "gamma": params.gamma},
        "violation_found": result.max_margin > 0,
        "tool": f"mesonbell {__version__}",
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mesonbell",
        description="Bell-test feasibility toolkit for entangled neutral-meson pair decays.",
    )
    parser.add_argument("--version", action="version", version=f"mesonbell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, seeded: bool = False) -> None:
        _add_species_flags(p)
        p.add_argument("--config", default=None, help="optional key = value config file")
        if seeded:
            p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")

    p = sub.add_parser("constants", help="print the species constants and feasibility thresholds")
    common(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("fig2", help="scan quantum R and the local bound over theta")
    common(p)
    p.add_argument("--theta-min", type=float, default=None)
    p.add_argument("--theta-max", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", action="store_true", help="also write <out>.meta.json")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="space-like fraction versus time difference")
    common(p, seeded=True)
    p.add_argument("--betas", default=None, help="comma-separated boost speeds in [0,1)")
    p.add_argument("--criterion", choices=[c.value for c in SeparationCriterion], default=None)
    p.add_argument("--dt-max", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("-n", type=int, default=None, help="samples per grid point")
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", action="store_true")
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("simulate", help="generate events and a binned correlation table")
    common(p, seeded=True)
    p.add_argument("--model", default=None, help="qm | " + " | ".join(sorted(MODEL_REGISTRY)))
    p.add_argument("-n", type=int, default=None, help="number of pair decays")
    p.add_argument("--bin-width", type=float, default=None, help="delta_t bin width in s")
    p.add_argument("--dt-max", type=float, default=None)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; never changes output bytes")
    p.add_argument("--out", required=True, help="events CSV path")
    p.add_argument("--corr-out", default=None, help="binned correlation CSV path")
    p.add_argument("--sidecar", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bell", help="R-versus-bound report for one time quadruple")
    common(p)
    p.add_argument("--times", required=True, help="t1,t1p,t2,t2p in seconds")
    p.add_argument("--events", default=None, help="estimate correlations from this events CSV")
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("search", help="seeded random search for bound-beating quadruples")
    common(p, seeded=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--t-max", type=float, default=None, help="upper end of sampled times in s")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_search)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EmptySubensembleError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
