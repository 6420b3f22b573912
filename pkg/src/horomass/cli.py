"""Command line entry point: ``horomass <subcommand> [options]``.

Exit status is 0 when every check passes, 1 when some check fails (the
failing checks are listed on stderr) and 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, validate
from .runner import SUBCOMMANDS, run


def _common():
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=S, help="YAML experiment config")
    p.add_argument("--seed", type=int, metavar="N", default=S, help="seed for all sample sets")
    p.add_argument("--out", metavar="DIR", default=S, help="output directory")
    p.add_argument("--n", type=int, default=S, help="dimension (>= 3)")
    p.add_argument("--tau", type=float, default=S, help="decay exponent (> n/2)")
    p.add_argument("--alpha", type=float, default=S, help="rho(eps) = eps^-alpha")
    p.add_argument("--family", metavar="NAME", choices=("zero", "bump", "tail", "gauge"), default=S,
                   help="perturbation family: zero, bump, tail or gauge")
    p.add_argument("--convention-measure", dest="measure", choices=("b", "g"), default=S,
                   help="measure and normal used in the mass fluxes")
    p.add_argument("--g-constant", dest="g_constant", choices=("paper", "corrected"), default=S,
                   help="constant subtracted in the modified Einstein tensor")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="horomass", parents=[common],
                                     description="Mass of asymptotically hyperbolic metrics with horospherical boundary.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    helps = {
        "verify-identities": "decay and scaling of the two divergence identities",
        "mass-convergence": "M_eps along the schedule, Cauchy diagnostics and the extrapolated limit",
        "small-terms": "the four small-terms integrals against their bound chains",
        "evaluation-check": "(2-n)/2 M_eps against the G and W flux sum",
        "decay-audit": "decay of the perturbation and of the cutoff metric",
        "all": "every subcommand above",
    }
    for name in SUBCOMMANDS + ("all",):
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else validate(ExperimentConfig())
    return cfg.override(
        n=getattr(args, "n", None),
        tau=getattr(args, "tau", None),
        alpha=getattr(args, "alpha", None),
        seed=getattr(args, "seed", None),
        family=getattr(args, "family", None),
        measure=getattr(args, "measure", None),
        g_constant=getattr(args, "g_constant", None),
        out=getattr(args, "out", None),
    )


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("horomass: error: a subcommand is required", file=sys.stderr)
        return 2
    try:
        cfg = config_from_args(args)
        status, runner, _ = run(args.command, cfg)
    except ConfigError as exc:
        print(f"horomass: config error at {exc.path}: {exc.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"horomass: {exc}", file=sys.stderr)
        return 2
    with open(f"{runner.out}/summary.txt", encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    if status:
        print("failing checks: " + ", ".join(runner.failing), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
