"""Command-line front end for the experiment runner.

Subcommands: spectrum, rigidity, evolve, convergence, mesh.  Each builds an
:class:`~buckstokes.runner.ExperimentConfig` from the flags (optionally
seeded from a JSON config file, with flags overriding the file), calls the
matching ``run_*`` function, writes the returned payloads under ``--out``,
and prints the headline numbers.

Exit codes: 0 on success, 1 on numerical failure (solver breakdown, with a
diagnostic on standard error), 2 on usage errors (bad flags, bad domain
parameters, violated preconditions).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, runner
from .solvers import FactorizationError, NonConvergenceError

__all__ = ["main", "build_parser"]

_COMMANDS = {
    "spectrum": runner.run_spectrum,
    "rigidity": runner.run_rigidity,
    "evolve": runner.run_evolve,
    "convergence": runner.run_convergence,
    "mesh": runner.run_mesh,
}

# argparse dest -> ExperimentConfig field
_CONFIG_FIELDS = {
    "h": "target_h",
    "levels": "levels",
    "k": "k",
    "tol": "tol",
    "nu": "nu",
    "dt": "dt",
    "T": "horizon",
    "seed": "seed",
    "out": "out_dir",
    "jobs": "jobs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buckstokes",
        description="Buckling / Stokes / constrained-vorticity spectra and "
        "boundary-rigidity diagnostics on parametric planar domains.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    descriptions = {
        "spectrum": "Dirichlet, buckling and Stokes spectra with a Weinstein-gap summary.",
        "rigidity": "Boundary-rigidity residual sweep (ellipse aspect family, or mesh levels).",
        "evolve": "Constrained heat evolution from the first Stokes mode.",
        "convergence": "Observed convergence orders over at least three refinement levels.",
        "mesh": "Triangulate the domain and emit the connectivity as JSON.",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc, description=desc)
        p.add_argument("--config", metavar="FILE", help="JSON config file; flags override its values")
        p.add_argument("--domain", choices=("disc", "ellipse", "rectangle", "fourier"),
                       help="domain kind (default disc)")
        p.add_argument("--params", metavar="a,b,...",
                       help="domain parameters: disc radius; ellipse/rectangle a,b; "
                       "fourier radius,c1,...")
        p.add_argument("--h", type=float, help="target mesh size (default 0.1; 0.2 for convergence)")
        p.add_argument("--levels", type=int, help="refinement levels (default 1; 3 for convergence)")
        p.add_argument("--k", type=int, help="eigenpair count (default 3)")
        p.add_argument("--tol", type=float, help="eigensolver tolerance (default 1e-9)")
        p.add_argument("--nu", type=float, help="viscosity for evolve (default 1.0)")
        p.add_argument("--dt", type=float, help="time step for evolve (default horizon/60)")
        p.add_argument("--T", type=float, help="time horizon for evolve (default 3/(2 nu lambda1S))")
        p.add_argument("--seed", type=int, help="iteration seed (default 0)")
        p.add_argument("--out", metavar="DIR", help="output directory (default .)")
        p.add_argument("--jobs", type=int, help="worker processes across independent sub-runs (default 1)")
    return parser


def _load_config(args: argparse.Namespace) -> runner.ExperimentConfig:
    """Merge config file and flags (flags win) into an ExperimentConfig."""
    base: dict = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise ValueError(f"config file must hold a JSON object, got {type(base).__name__}")

    if args.domain is not None or "domain" not in base:
        kind = args.domain or "disc"
        params = [s for s in (args.params or "").split(",") if s.strip()]
        try:
            parsed = [float(s) for s in params]
        except ValueError:
            raise ValueError(f"--params must be comma-separated numbers, got {args.params!r}") from None
        base["domain"] = runner.domain_to_dict(runner.domain_from_params(kind, parsed))
    elif args.params is not None:
        raise ValueError("--params given without --domain while the config file already sets one")

    if args.command == "convergence":
        base.setdefault("target_h", 0.2)
        base.setdefault("levels", 3)
    for dest, field in _CONFIG_FIELDS.items():
        value = getattr(args, dest)
        if value is not None:
            base[field] = value
    return runner.ExperimentConfig.from_dict(base)


def _print_summary(command: str, summary: dict) -> None:
    if command == "spectrum":
        header = ("domain", "lambda1_D", "lambda2_D", "lambda1_B", "lambda1_S", "weinstein_gap")
        row = (
            summary["domain"],
            f"{summary['lambda1_dirichlet']:.6f}",
            f"{summary['lambda2_dirichlet']:.6f}",
            f"{summary['lambda1_buckling']:.6f}",
            f"{summary['lambda1_stokes']:.6f}",
            f"{summary['weinstein_gap']:+.4e}",
        )
        widths = [max(len(a), len(b)) for a, b in zip(header, row)]
        print("  ".join(name.ljust(w) for name, w in zip(header, widths)))
        print("  ".join(val.ljust(w) for val, w in zip(row, widths)))
    elif command == "rigidity":
        print(f"rows={summary['rows']} domains={','.join(summary['domains'])}")
        dev = " ".join(f"{x:.4f}" for x in summary["dev_boundary_vorticity"])
        neu = " ".join(f"{x:.4f}" for x in summary["neumann_pressure_norm"])
        print(f"dev_boundary_vorticity: {dev}")
        print(f"neumann_pressure_norm:  {neu}")
    elif command == "evolve":
        print(
            f"domain={summary['domain']} nu={summary['nu']} steps={summary['steps']} "
            f"rate_fit={summary['decay_rate_fit']:.6f} reference={summary['rate_reference']:.6f} "
            f"rel_err={summary['rate_relative_error']:.2e}"
        )
        print(
            f"transport_residual={summary['transport_residual']:.4f} "
            f"shape_drift={summary['shape_drift']:.2e} "
            f"dissipation_margin={summary['dissipation_margin']:.3e}"
        )
    elif command == "convergence":
        for quantity, order in summary["orders"].items():
            print(f"{quantity}: observed order {order:.3f}")
    elif command == "mesh":
        print(
            f"domain={summary['domain']} vertices={summary['vertices']} "
            f"triangles={summary['triangles']} boundary={summary['boundary']} h={summary['h']:.5f}"
        )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = _load_config(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"buckstokes: {exc}", file=sys.stderr)
        return 2

    try:
        out = _COMMANDS[args.command](config)
    except ValueError as exc:
        # Violated run preconditions (mesh size bounds, level counts) are usage errors.
        print(f"buckstokes: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, FactorizationError, ArithmeticError) as exc:
        print(f"buckstokes: numerical failure: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in out.files.items():
        (out_dir / name).write_text(text, encoding="utf-8", newline="")

    _print_summary(args.command, out.summary)
    print(f"wrote {len(out.files)} file(s) to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
