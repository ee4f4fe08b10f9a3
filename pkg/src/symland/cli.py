"""Command line entry point: ``symland run|verify|curve``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import curves, io, topology
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, RunReport, run, verify_all
from .linalg import LinAlgError
from .models import forward_loss

log = logging.getLogger("symland")


def _parse_sets(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _parse_extra(extra: list[str]) -> dict[str, str]:
    """Accept ``--key value`` and ``--key=value`` as overrides."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key, sep, value = tok[2:].partition("=")
        if not sep:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for --{key}")
            i += 1
            value = extra[i]
        out[key.replace("-", "_")] = value
        i += 1
    return out


def _print_report(rep: RunReport) -> None:
    print(f"== {rep.experiment} (seed {rep.seed}, {rep.wall_time:.2f} s)")
    for a in rep.assertions:
        print("  " + a.line())
    if rep.error:
        print(f"  [FAIL] error: {rep.error}")
    print(f"  {'PASS' if rep.passed else 'FAIL'}")


def _cmd_run(args, extra) -> int:
    overrides = {**_parse_extra(extra), **_parse_sets(args.set)}
    out = Path(args.out) if args.out else Path("runs") / args.experiment
    cfg = ExperimentConfig(args.experiment, args.seed, args.scale, out, overrides)
    rep = run(cfg)
    _print_report(rep)
    return 0 if rep.passed else 1


def _cmd_verify(args, extra) -> int:
    if extra:
        raise ConfigError(f"unexpected arguments {extra}")
    reports = verify_all(args.seed, Path(args.out))
    for rep in reports:
        _print_report(rep)
    ok = all(r.passed for r in reports)
    print(f"verify: {sum(r.passed for r in reports)}/{len(reports)} experiments passed")
    return 0 if ok else 1


def _cmd_curve(args, extra) -> int:
    if extra:
        raise ConfigError(f"unexpected arguments {extra}")
    if len(args.ckpt) != 2:
        raise ConfigError("curve needs exactly two --ckpt files")
    net = io.load_network(args.net)
    w1, w2 = (io.load_checkpoint(p, net) for p in args.ckpt)
    linear = curves.loss_profile(net, curves.linear_path(w1, w2), args.n)
    rep = curves.barrier(net, curves.linear_path(w1, w2), args.n)
    print(f"endpoint losses: {forward_loss(net, w1):.6g} {forward_loss(net, w2):.6g}")
    print(f"linear path: max loss {rep.max_loss:.6g} at t={rep.argmax_t:.4g}, barrier {rep.barrier:.6g}")
    gamma = None
    if net.is_linear and net.skip_epsilon == 0.0:
        try:
            i1 = topology.component_index_linear(w1, net)
            i2 = topology.component_index_linear(w2, net)
        except (topology.NotAtMinimumError, LinAlgError) as exc:
            print(f"no symmetry path: {exc}")
        else:
            print(f"component indices: {i1.signs} {i2.signs}")
            if i1 == i2:
                gamma = curves.loss_profile(net, curves.component_path(w1, w2, net), args.n)
                print(f"symmetry path: max loss {gamma.losses.max():.6g}")
    if gamma is None:
        curves.write_profile_csv(args.out, linear)
    else:
        curves.write_profile_csv(args.out, gamma, linear)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symland", description="Symmetry and connectivity experiments on loss landscapes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--scale", choices=("fast", "paper"), default="fast")
    r.add_argument("--out", default=None, help="output directory (default runs/<experiment>)")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="run every experiment at fast scale")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="verify_out")
    v.set_defaults(func=_cmd_verify)

    c = sub.add_parser("curve", help="loss profile between two checkpoints")
    c.add_argument("--ckpt", action="append", required=True)
    c.add_argument("--net", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--n", type=int, default=101)
    c.set_defaults(func=_cmd_curve)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, extra)
    except (ConfigError, io.MalformedFileError, ValueError, OSError) as exc:
        print(f"symland: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
