"""Command-line front end: ``ktcs <command> [flags]`` or ``python -m ktcs``.

Exit codes: 0 success, 2 invalid input, 3 numerical convergence failure.
Without ``--out`` tabular results go to standard output as CSV; with
``--out DIR`` they are written to files next to a ``manifest.json``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConvergenceError, ValidationError

__all__ = ["main", "build_parser", "cmd_dispatch"]

COMMANDS = ("numdist", "mandel", "csi", "qfunc", "weight", "unity", "carleman",
            "identity", "mcwf", "figure")


# ---------------------------------------------------------------------------
# argument parsing


def _state_flags(p: argparse.ArgumentParser, xi_default: float = 1.0) -> None:
    p.add_argument("--K", type=int, default=1, help="dimension K (default 1)")
    p.add_argument("--j", type=int, default=0, help="residue index 0 <= j < K")
    p.add_argument("--p", type=int, default=0, help="charge p")
    p.add_argument("--q", type=int, default=0, help="charge q")
    p.add_argument("--xi-re", type=float, default=xi_default, help="Re xi")
    p.add_argument("--xi-im", type=float, default=0.0, help="Im xi")


def _z_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--z", type=float, nargs="+", help="explicit z values")
    p.add_argument("--z-min", type=float, default=0.01)
    p.add_argument("--z-max", type=float, default=40.0)
    p.add_argument("--steps", type=int, default=100)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output directory (default: print to stdout)")
    p.add_argument("--config", type=Path, help="JSON file whose keys provide flag defaults")
    p.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ktcs",
                                     description="K-dimensional trio coherent states toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("numdist", help="chain number distribution P_n")
    _state_flags(p)
    p.add_argument("--n-max", type=int, help="largest chain index (default: automatic)")
    _common(p)

    for name, helptext in (("mandel", "Mandel parameters versus z"),
                           ("csi", "Cauchy-Schwarz measures versus z")):
        p = sub.add_parser(name, help=helptext)
        _state_flags(p)
        _z_flags(p)
        _common(p)

    p = sub.add_parser("qfunc", help="Q function on the alpha = beta = gamma slice")
    _state_flags(p, xi_default=5.0)
    p.add_argument("--nx", type=int, default=400)
    p.add_argument("--half-width", type=float)
    p.add_argument("--floor", type=float, default=0.75, help="peak floor relative to max")
    _common(p)

    p = sub.add_parser("weight", help="radial weight and moment check")
    _state_flags(p)
    p.add_argument("--x-min", type=float, default=1e-3)
    p.add_argument("--x-max", type=float, default=1e3)
    p.add_argument("--steps", type=int, default=61, help="log-spaced sample count")
    p.add_argument("--moments", type=int, default=8, help="check moments n <= this")
    p.add_argument("--tolerance", type=float, default=1e-6)
    _common(p)

    p = sub.add_parser("unity", help="resolution of unity and reproducing kernel")
    _state_flags(p)
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--n-radial", type=int, default=200)
    p.add_argument("--n-angular", type=int, default=64)
    _common(p)

    p = sub.add_parser("carleman", help="logarithmic test for the Carleman series")
    _state_flags(p)
    p.add_argument("--n-probe", type=int, default=10 ** 6)
    _common(p)

    p = sub.add_parser("identity", help="fourteen-laser operator identity")
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--trials", type=int, default=20)
    _common(p)

    p = sub.add_parser("mcwf", help="trapped-ion preparation run")
    p.add_argument("--xi-re", type=float, default=10.0)
    p.add_argument("--xi-im", type=float, default=0.0)
    p.add_argument("--zeta", type=float, default=0.005, help="zeta / Gamma")
    p.add_argument("--p", type=int, default=0)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--w", type=float, default=0.0, help="odd-sector weight of the initial state")
    p.add_argument("--l", type=int, default=0, help="initial chain index")
    p.add_argument("--m-max", type=int)
    p.add_argument("--dt", type=float, default=0.01, help="step in units of 1/Gamma")
    p.add_argument("--t-max", type=float, default=200.0, help="duration in units of 1/Gamma")
    p.add_argument("--record-every", type=float, default=1.0)
    p.add_argument("--n-traj", type=int, default=200)
    p.add_argument("--snapshots", type=float, nargs="*", default=[],
                   help="Gamma t values for phonon snapshots")
    p.add_argument("--oracle", action="store_true", help="also run the density-matrix oracle")
    _common(p)

    p = sub.add_parser("figure", help="reproduce the data of one figure")
    p.add_argument("number", type=int, choices=range(1, 13), metavar="N", help="1..12")
    p.add_argument("--n-traj", type=int, help="override trajectory count")
    _common(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    # config values act as defaults; explicit flags win
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest == "xi" and isinstance(value, (list, tuple)):
            defaults["xi_re"], defaults["xi_im"] = value
        elif dest == "zeta_over_gamma":
            defaults["zeta"] = value
        elif dest in ("dt_gamma", "t_max_gamma", "record_every_gamma"):
            defaults[dest[:-len("_gamma")]] = value
        elif dest in known:
            defaults[dest] = value
        else:
            raise ValidationError(f"unknown config key {key!r}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# helpers


def _params(args):
    from .fock import KtcsParams

    return KtcsParams.from_xi(complex(args.xi_re, args.xi_im), args.p, args.q, args.K, args.j)


def _z_values(args) -> np.ndarray:
    if args.z:
        return np.asarray(args.z, dtype=float)
    if args.steps < 1:
        raise ValidationError("--steps must be >= 1")
    return np.linspace(args.z_min, args.z_max, args.steps)


class _Sink:
    """Collects tables and JSON documents, then prints or writes them."""

    def __init__(self, args, command: str, params: dict):
        from .io import RunManifest

        self.out: Optional[Path] = args.out
        self.manifest = RunManifest(command, params, seed=getattr(args, "seed", None))

    def table(self, name: str, header, rows) -> None:
        from .io import format_number, write_csv

        if self.out is None:
            import csv

            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_number(v) for v in row])
        else:
            self.manifest.add(write_csv(self.out / f"{name}.csv", header, rows))

    def document(self, name: str, data: dict) -> None:
        text = json.dumps(data, indent=2, sort_keys=True, default=_json_default)
        if self.out is None:
            print(text)
        else:
            path = self.out / f"{name}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            self.manifest.add(path)

    def paths(self, paths) -> None:
        for p in paths:
            self.manifest.add(p)

    def close(self) -> None:
        if self.out is not None:
            self.manifest.finish().write(self.out / "manifest.json")


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating, np.bool_)):
        return obj.item()
    return str(obj)


def _echo(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
            if k not in ("out", "config")}


# ---------------------------------------------------------------------------
# commands


def _cmd_numdist(args, sink):
    from .fock import auto_n_max
    from .statistics import number_distribution

    params = _params(args)
    n_max = auto_n_max(params) if args.n_max is None else args.n_max
    n = np.arange(n_max + 1)
    sink.table("numdist", ["n", "P_n"], zip(n, number_distribution(params, n)))


def _cmd_mandel(args, sink):
    from .statistics import mandel

    params = _params(args)
    rows = []
    for z in _z_values(args):
        m = mandel(params, z)
        rows.append((z, m.Ma, m.Mb, m.Mc, m.discrepancy))
    sink.table("mandel", ["z", "Ma", "Mb", "Mc", "explicit_discrepancy"], rows)


def _cmd_csi(args, sink):
    from .statistics import PAIRS, csi_measures

    params = _params(args)
    header = ["z"] + [f"J_{p}" for p in PAIRS] + [f"G_{p}" for p in PAIRS] + ["flagged"]
    rows = []
    for z in _z_values(args):
        c = csi_measures(params, z)
        rows.append((z, *c.as_tuple(), ";".join(c.flagged) or "-"))
    sink.table("csi", header, rows)


def _cmd_qfunc(args, sink):
    from .io import write_qgrid
    from .phase_space import count_peaks, fringe_minimum, q_slice

    params = _params(args)
    grid = q_slice(params, nx=args.nx, half_width=args.half_width)
    summary = {"peaks": count_peaks(grid, args.floor), "max": float(grid.values.max()),
               "min": float(grid.values.min()), "x_range": grid.x_range}
    if params.xi_mod > 0:
        fm = fringe_minimum(params)
        summary.update(fringe_min_relative=fm.value, fringe_zero_interior=fm.interior)
    if sink.out is not None:
        sink.paths(write_qgrid(grid, sink.out / f"q_K{params.K}_j{params.j}.csv"))
    sink.document("qfunc_summary", summary)


def _cmd_weight(args, sink):
    from .completeness import MomentProblem, verify_moments, weight, weight_tilde

    params = _params(args)
    x = np.logspace(np.log10(args.x_min), np.log10(args.x_max), args.steps)
    sink.table("weight", ["x", "W_tilde", "W_Kj"],
               zip(x, weight_tilde(x, params.p, params.q), weight(params, x)))
    report = verify_moments(MomentProblem(params.p, params.q, args.moments, args.tolerance))
    sink.document("moments", report.to_dict())


def _cmd_unity(args, sink):
    from .completeness import reproducing_kernel_check, resolution_of_unity

    params = _params(args)
    M = resolution_of_unity(params.K, params.p, params.q, args.n_max, args.n_radial,
                            args.n_angular)
    kc = reproducing_kernel_check(params, args.n_radial, args.n_angular)
    sink.document("unity", {
        "identity_block_n_max": args.n_max,
        "identity_max_deviation": float(np.abs(M - np.eye(len(M))).max()),
        "kernel_residual": kc.residual,
        "kernel_off_residue": kc.off_residue,
        "n_radial": kc.n_radial, "n_angular": kc.n_angular,
        "note": "finite principal block of the identity on chain indices 0..n_max",
    })


def _cmd_carleman(args, sink):
    from .completeness import carleman_test

    res = carleman_test(args.K, args.j, args.p, args.q, args.n_probe)
    sink.document("carleman", {"estimate": res.estimate, "raw_ratio": res.raw,
                               "verdict": res.verdict, "limit": -1.5 * args.K,
                               "n_probe": args.n_probe})


def _cmd_identity(args, sink):
    from .iontrap import verify_laser_identity

    r = verify_laser_identity(args.n_max, args.trials, args.seed)
    sink.document("identity", {"relative_residual": r, "n_max": args.n_max,
                               "trials": args.trials})


def _cmd_mcwf(args, sink):
    from .iontrap import SimConfig, evolve_density, mcwf_run

    cfg = SimConfig(xi=complex(args.xi_re, args.xi_im), zeta=args.zeta, p=args.p, q=args.q,
                    w=args.w, l=args.l, m_max=args.m_max, dt=args.dt, t_max=args.t_max,
                    n_traj=args.n_traj, seed=args.seed, record_every=args.record_every)
    res = mcwf_run(cfg)
    header = ["gamma_t", "F0", "F1", "F0_err", "F1_err"]
    cols = [res.times, res.fidelity[:, 0], res.fidelity[:, 1],
            res.fidelity_err[:, 0], res.fidelity_err[:, 1]]
    if args.oracle:
        dens = evolve_density(cfg)
        header += ["F0_oracle", "F1_oracle"]
        cols += [dens.fidelity[:, 0], dens.fidelity[:, 1]]
    sink.table("timeseries", header, zip(*cols))
    from .statistics import number_distribution

    n = np.arange(2 * cfg.M)
    ref = sum(wt * number_distribution(cfg.target(j), n)
              for j, wt in enumerate(cfg.sector_weights()))
    for t in args.snapshots:
        pi, err = res.snapshot(t)
        sink.table(f"snapshot_t{t:g}", ["n", "Pi_n", "Pi_n_err", "P_n_target"],
                   zip(n, pi, err, ref))
    sink.document("run_config", cfg.to_json())


def _cmd_figure(args, sink):
    from .figures import run_figure

    out = sink.out or Path(f"figure{args.number}")
    sink.out = out
    paths, summary = run_figure(args.number, out, n_traj=args.n_traj)
    sink.paths(paths)
    print(json.dumps({"figure": args.number, "outputs": [str(p) for p in paths], **summary},
                     indent=2, sort_keys=True, default=_json_default))


_HANDLERS = {name: globals()[f"_cmd_{name}"] for name in COMMANDS}


def _limit_threads():
    value = os.environ.get("KTCS_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise ValidationError(f"KTCS_THREADS must be an integer, got {value!r}")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def cmd_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one command; returns the exit code."""
    parser = build_parser()
    try:
        args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"ktcs: error: {exc}", file=sys.stderr)
        return 2
    try:
        with _limit_threads():
            sink = _Sink(args, args.command, _echo(args))
            _HANDLERS[args.command](args, sink)
            sink.close()
    except ValidationError as exc:
        print(f"ktcs: invalid input: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"ktcs: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    return cmd_dispatch(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
