"""Command-line front end.

Subcommands cover the pipeline stages: ``extract`` (superoperator file),
``calibrate`` (computed vs reference per-level success probabilities),
``duration`` (completion-time Monte Carlo), ``sample`` (logical error rate
at one point), and the two threshold sweeps.  Every output file starts with
a config echo sufficient to re-run it bit-identically; all stochastic
commands require an explicit seed.

Exit codes: 0 success, 2 configuration error, 3 numerical exactness budget
breached, 4 threshold unresolved.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .lattice import CodeLattice, logical_error_rate
from .noise import NoiseParams
from .protocols import get_protocol, load_protocol, validate
from .schedule import (
    LevelTiming,
    duration_histogram,
    memory_error,
    min_duration,
    rate_from_lifetime,
    render_stats,
    sample_durations,
    simulate_duration,
)
from .superop import (
    ExactnessWarningError,
    deserialize_superoperator,
    extract_superoperator,
    extract_stringent_plus,
    serialize_superoperator,
    success_probabilities,
    twirl,
    full_symmetric_group,
    CYCLIC_GROUP,
)
from .threshold import find_crossing, sweep_local, sweep_network

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_UNRESOLVED = 4

# Reference calibration targets for the built-in protocols: per-level
# success probabilities at the standard operating points.
CALIBRATION_REFERENCE = {
    "EXPEDIENT": {
        "noise": (0.006, 0.006, 0.1),
        "p_levels": [0.7346, 0.7506, 0.8619, 0.8550, 0.8651, 0.8619, 0.8550, 0.8654],
    },
    "STRINGENT": {
        "noise": (0.0075, 0.0075, 0.1),
        "p_levels": [
            0.7277, 0.7429, 0.8586, 0.8509, 0.8019, 0.8586, 0.8509,
            0.8043, 0.8586, 0.8509, 0.6588, 0.8586, 0.8509, 0.6454,
        ],
    },
}

# Reference schedule inputs (published operating-point timings)
SCHEDULE_REFERENCE = {
    "EXPEDIENT": {
        "t": [7, 6, 4, 3, 2, 4, 3, 2, 2],
        "p": [0.7346, 0.7506, 0.8619, 0.8550, 0.8651, 0.8619, 0.8550, 0.8654, None],
        "frl": [1, 1, 3, 3, 1, 6, 7, 1, None],
        "group": [1, 1, 2, 2, None, 3, 3, None, None],
    },
    "STRINGENT": {
        "t": [7, 6, 4, 3, 5, 4, 3, 5, 4, 3, 5, 4, 3, 5, 2],
        "p": [0.7277, 0.7429, 0.8586, 0.8509, 0.8019, 0.8586, 0.8509,
              0.8043, 0.8586, 0.8509, 0.6588, 0.8586, 0.8509, 0.6454, None],
        "frl": [1, 1, 3, 3, 1, 6, 6, 1, 9, 9, 1, 12, 12, 1, None],
        "group": [1, 1, 1, 1, 1, 1, 1, 1, 2, 2, None, 3, 3, None, None],
    },
}


class ConfigError(ValueError):
    pass


def reference_timings(protocol: str) -> list[LevelTiming]:
    ref = SCHEDULE_REFERENCE.get(protocol.upper())
    if ref is None:
        raise ConfigError(f"no reference timings for protocol {protocol!r}")
    return [
        LevelTiming(t, p, frl, group)
        for t, p, frl, group in zip(ref["t"], ref["p"], ref["frl"], ref["group"])
    ]


def computed_timings(protocol: str, noise: NoiseParams, eps: float) -> list[LevelTiming]:
    spec = get_protocol(protocol)
    levels = success_probabilities(spec, noise, eps)
    probs = {ls.index: ls.probability for ls in levels}
    out = []
    for lv in spec.levels:
        p = probs.get(lv.index)
        out.append(LevelTiming(lv.t_steps, p, lv.frl, lv.parallel_group))
    return out


def _config_echo(args: argparse.Namespace) -> str:
    skip = {"func"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return json.dumps(cfg, default=str)


def _open_out(args, default_name: str):
    path = args.output
    if path is None:
        out_dir = os.environ.get("NETSTAB_OUT", ".")
        path = os.path.join(out_dir, default_name)
    if path == "-":
        return sys.stdout, "<stdout>"
    try:
        return open(path, "w"), path
    except OSError as exc:
        raise ConfigError(f"cannot write output {path!r}: {exc}") from exc


def _stamp(fh, args):
    fh.write(f"# netstab {__version__}\n")
    fh.write(f"# config {_config_echo(args)}\n")


def _noise_from(args) -> NoiseParams:
    try:
        return NoiseParams(args.pg, args.pm, args.pn)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_spec(args, basis="Z"):
    if getattr(args, "protocol_file", None):
        with open(args.protocol_file) as fh:
            spec = load_protocol(fh.read())
        errs = validate(spec)
        if errs:
            raise ConfigError(f"invalid protocol file: {errs[0]}")
        return spec
    return get_protocol(args.protocol, basis)


def cmd_extract(args) -> int:
    noise = _noise_from(args)
    spec = _load_spec(args, basis=args.basis)
    try:
        so = extract_superoperator(spec, noise, eps=args.eps, trunc_budget=args.trunc_budget)
    except ExactnessWarningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if args.twirl != "off":
        group = CYCLIC_GROUP if args.twirl == "cyclic" else full_symmetric_group(so.n_data)
        so = twirl(so, group)
    fh, path = _open_out(args, f"superop_{spec.name.lower()}_{spec.basis.lower()}.txt")
    with fh:
        fh.write(f"# netstab {__version__}\n")
        fh.write(f"# config {_config_echo(args)}\n")
        fh.write(serialize_superoperator(so))
    print(f"wrote {path} (total={so.total():.9f}, truncated={so.truncated_mass:.3e})")
    for ls in so.level_success:
        print(f"  level {ls.index:2d} p_success = {ls.probability:.4f}  {ls.name}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    name = args.protocol.upper()
    if name not in CALIBRATION_REFERENCE:
        raise ConfigError("calibrate supports EXPEDIENT and STRINGENT")
    ref = CALIBRATION_REFERENCE[name]
    noise = NoiseParams(*ref["noise"]) if args.pg is None else _noise_from(args)
    levels = success_probabilities(get_protocol(name), noise, args.eps)
    worst = 0.0
    print(f"calibration {name} at p_g={noise.p_g} p_m={noise.p_m} p_n={noise.p_n}")
    for ls, pub in zip(levels, ref["p_levels"]):
        delta = ls.probability - pub
        worst = max(worst, abs(delta))
        print(
            f"  level {ls.index:2d}  computed={ls.probability:.4f}  reference={pub:.4f}"
            f"  delta={delta:+.4f}  {ls.name}"
        )
    print(f"worst |delta| = {worst:.4f} (tolerance 0.005)")
    return EXIT_OK if worst <= 0.005 else 1


def cmd_duration(args) -> int:
    if args.table == "reference":
        timings = reference_timings(args.protocol)
    else:
        noise = _noise_from(args)
        timings = computed_timings(args.protocol, noise, args.eps)
    stats = simulate_duration(timings, args.samples, args.seed, semantics=args.semantics)
    fh, path = _open_out(args, f"duration_{args.protocol.lower()}.txt")
    with fh:
        _stamp(fh, args)
        fh.write(render_stats(stats))
    if args.histogram:
        durations = sample_durations(timings, args.samples, args.seed, args.semantics)
        with open(args.histogram, "w") as hh:
            _stamp(hh, args)
            hh.write("steps,count\n")
            for steps, count in duration_histogram(durations):
                hh.write(f"{steps},{count}\n")
    t_min, p_min = min_duration(timings)
    print(
        f"wrote {path}: min={t_min} p_min={p_min:.4f} mean={stats.mean:.1f} "
        f"median={stats.quantiles[0.5]} q99={stats.quantiles[0.99]}"
    )
    return EXIT_OK


def cmd_memory(args) -> int:
    rate = args.rate if args.rate is not None else rate_from_lifetime(args.lifetime)
    p = memory_error(rate, args.duration)
    print(f"decay_rate={rate!r} /s  duration={args.duration!r} s  error={p!r}")
    return EXIT_OK


def _load_so(path: str):
    with open(path) as fh:
        text = "".join(ln for ln in fh if not ln.startswith("#"))
    return deserialize_superoperator(text)


def cmd_sample(args) -> int:
    noise = _noise_from(args)
    if args.so_z and args.so_x:
        so_z, so_x = _load_so(args.so_z), _load_so(args.so_x)
    else:
        so_z = twirl(extract_superoperator(get_protocol(args.protocol, "Z"), noise, args.eps))
        so_x = twirl(extract_superoperator(get_protocol(args.protocol, "X"), noise, args.eps))
    abort = None
    if args.protocol.upper() == "STRINGENT_PLUS" and args.flags != "off":
        abort = (
            extract_stringent_plus(noise, basis="Z", eps=args.eps),
            extract_stringent_plus(noise, basis="X", eps=args.eps),
        )
    lat = CodeLattice(args.distance, args.rounds or args.distance)
    res = logical_error_rate(
        lat,
        so_z,
        so_x,
        args.samples,
        args.seed,
        abort_extraction=abort,
        favor_factor=args.favor_factor,
        use_flags=args.flags == "on",
        missing_rate=args.missing_rate,
    )
    fh, path = _open_out(args, "sample.csv")
    with fh:
        _stamp(fh, args)
        fh.write("d,T,p_g,p_m,p_n,protocol,samples,failures,rate,stderr\n")
        fh.write(
            f"{lat.d},{lat.rounds},{noise.p_g!r},{noise.p_m!r},{noise.p_n!r},"
            f"{args.protocol.upper()},{res.samples},{res.failures},{res.rate!r},{res.stderr!r}\n"
        )
    print(f"wrote {path}: rate={res.rate:.5f} +- {res.stderr:.5f}")
    return EXIT_OK


def _write_sweep(points, args, default_name: str):
    fh, path = _open_out(args, default_name)
    with fh:
        _stamp(fh, args)
        fh.write("d,T,p_g,p_m,p_n,protocol,samples,failures,rate,stderr\n")
        for pt in points:
            fh.write(
                f"{pt.d},{pt.rounds},{pt.noise.p_g!r},{pt.noise.p_m!r},{pt.noise.p_n!r},"
                f"{pt.protocol},{pt.samples},{pt.failures},{pt.rate!r},{pt.stderr!r}\n"
            )
    return path


def cmd_sweep_local(args) -> int:
    points = sweep_local(
        args.protocol,
        args.p_values,
        args.pn,
        args.distances,
        args.samples,
        args.seed,
        eps=args.eps,
        workers=args.workers,
    )
    path = _write_sweep(points, args, f"sweep_local_{args.protocol.lower()}.csv")
    crossing = find_crossing(points)
    if crossing.resolved:
        print(f"wrote {path}: crossing in [{crossing.lower}, {crossing.upper}]")
        return EXIT_OK
    print(f"wrote {path}: threshold unresolved ({crossing.reason})")
    return EXIT_UNRESOLVED


def cmd_sweep_network(args) -> int:
    points = sweep_network(
        args.protocol,
        args.p_values,
        args.plocal,
        args.distances,
        args.samples,
        args.seed,
        eps=args.eps,
        workers=args.workers,
    )
    path = _write_sweep(points, args, f"sweep_network_{args.protocol.lower()}.csv")
    crossing = find_crossing(points)
    if crossing.resolved:
        print(f"wrote {path}: crossing in [{crossing.lower}, {crossing.upper}]")
        return EXIT_OK
    print(f"wrote {path}: threshold unresolved ({crossing.reason})")
    return EXIT_UNRESOLVED


def _add_noise_args(p, required=True):
    p.add_argument("--pg", type=float, required=required,
                   help="two-qubit gate error rate")
    p.add_argument("--pm", type=float, required=required,
                   help="measurement/initialization error rate")
    p.add_argument("--pn", type=float, required=required,
                   help="raw network Bell-pair error rate")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netstab",
        description="Networked stabilizer measurement: superoperators, durations, thresholds.",
    )
    ap.add_argument("--version", action="version", version=f"netstab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract a stabilizer superoperator to a file")
    p.add_argument("--protocol", default="EXPEDIENT")
    p.add_argument("--protocol-file", help="declarative protocol JSON instead of a built-in")
    p.add_argument("--basis", choices=("Z", "X"), default="Z")
    _add_noise_args(p)
    p.add_argument("--eps", type=float, default=1e-13, help="truncation threshold")
    p.add_argument("--trunc-budget", type=float, default=1e-6)
    p.add_argument("--twirl", choices=("cyclic", "full", "off"), default="cyclic")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("calibrate", help="compare per-level success probabilities to reference")
    p.add_argument("--protocol", default="EXPEDIENT")
    p.add_argument("--pg", type=float)
    p.add_argument("--pm", type=float)
    p.add_argument("--pn", type=float)
    p.add_argument("--eps", type=float, default=1e-13)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("duration", help="Monte Carlo completion-time statistics")
    p.add_argument("--protocol", default="EXPEDIENT")
    p.add_argument("--table", choices=("reference", "computed"), default="reference",
                   help="level timings source: published reference or computed from noise")
    p.add_argument("--pg", type=float)
    p.add_argument("--pm", type=float)
    p.add_argument("--pn", type=float)
    p.add_argument("--eps", type=float, default=1e-13)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--semantics", choices=("serial", "parallel"), default="parallel")
    p.add_argument("--histogram", help="also write a steps,count CSV here")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_duration)

    p = sub.add_parser("memory", help="memory-error arithmetic")
    p.add_argument("--lifetime", type=float, help="1/e lifetime in seconds")
    p.add_argument("--rate", type=float, help="decay rate per second (overrides lifetime)")
    p.add_argument("--duration", type=float, required=True, help="exposure in seconds")
    p.set_defaults(func=cmd_memory)

    p = sub.add_parser("sample", help="logical error rate at one parameter point")
    p.add_argument("--protocol", default="EXPEDIENT")
    _add_noise_args(p)
    p.add_argument("--distance", "-d", type=int, default=4)
    p.add_argument("--rounds", "-T", type=int, help="noisy rounds (default: distance)")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-13)
    p.add_argument("--so-z", help="pre-extracted Z-basis superoperator file")
    p.add_argument("--so-x", help="pre-extracted X-basis superoperator file")
    p.add_argument("--flags", choices=("on", "off"), default="on",
                   help="use STRINGENT+ classical flags in decoding")
    p.add_argument("--favor-factor", type=float, default=0.5)
    p.add_argument("--missing-rate", type=float, default=0.0,
                   help="fraction of stabilizer rounds abandoned")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("sweep-local", help="sweep local error rate, bracket the threshold")
    p.add_argument("--protocol", default="MONOLITHIC")
    p.add_argument("--p-values", type=float, nargs="+", required=True)
    p.add_argument("--pn", type=float, default=0.0)
    p.add_argument("--distances", type=int, nargs="+", default=[4, 6])
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-13)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_sweep_local)

    p = sub.add_parser("sweep-network", help="sweep network error rate, bracket the threshold")
    p.add_argument("--protocol", default="EXPEDIENT")
    p.add_argument("--p-values", type=float, nargs="+", required=True)
    p.add_argument("--plocal", type=float, default=0.006)
    p.add_argument("--distances", type=int, nargs="+", default=[4, 6])
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-13)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_sweep_network)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, matching our config-error code
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
