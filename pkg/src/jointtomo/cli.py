"""Command-line entry point.

Subcommands: simulate, estimate, refine, export-sos, rank-check, bench.
Exit codes: 0 success, 2 validation error, 3 numerical degeneracy, 4 I/O.
"""

import argparse
import json
import sys

import numpy as np
from scipy.linalg import expm

from . import bench as bench_mod
from . import refine as refine_mod
from . import serialize
from .basis import build_basis
from .channels import (
    ProcessEnsemble,
    build_regression_matrices,
    make_named_channel,
    min_hamiltonian_count,
    rank_bound,
)
from .errors import DegeneracyError, ValidationError
from .estimator import (
    Stage1Config,
    estimate_joint_v1,
    estimate_joint_v2,
    project_pure,
)
from .measurement import simulate_dataset

_METHOD_NAMES = {"ls": "plain_ls", "plain_ls": "plain_ls", "mp": "mp_inverse",
                 "mp_inverse": "mp_inverse", "tikhonov": "tikhonov"}


def _print_config(args, quiet: bool) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    stream = sys.stderr if quiet else sys.stdout
    print("config: " + json.dumps(resolved, default=str), file=stream)


def _load_inputs(args):
    """Ensemble, truth (may be None), basis, and scenario from the flags."""
    if args.preset:
        sc = bench_mod.preset(args.preset, seed=args.seed)
        return sc.ensemble, sc.truth_state, sc.truth_povm, sc.basis, sc
    if args.channels:
        ens = serialize.load_ensemble(args.channels)
    elif getattr(args, "hamiltonians", None):
        records = serialize.load_hamiltonians(args.hamiltonians)
        channels = []
        for idx, (h, dt) in enumerate(records):
            step = expm(-1j * h * dt)
            u = np.eye(h.shape[0], dtype=complex)
            for k in range(1, args.samples + 1):
                u = u @ step
                channels.append(make_named_channel("unitary", u=u, label=f"H{idx + 1}_k{k}"))
        ens = ProcessEnsemble(tuple(channels))
    else:
        raise ValidationError("provide --preset, --channels, or --hamiltonians")
    state = serialize.load_state(args.state) if getattr(args, "state", None) else None
    povm = serialize.load_povm(args.povm) if getattr(args, "povm", None) else None
    return ens, state, povm, build_basis(ens.d), None


def _cmd_simulate(args) -> int:
    ens, state, povm, basis, _ = _load_inputs(args)
    if state is None or povm is None:
        raise ValidationError("simulate needs a preset or explicit --state and --povm files")
    ds = simulate_dataset(ens, state, povm, args.n0, seed=args.seed,
                          scale_observable=args.anchor, exact=args.exact, basis=basis)
    serialize.save_dataset(ds, args.out)
    if not args.quiet:
        print(f"wrote dataset with {ds.n_processes} processes x {ds.n_outcomes} outcomes "
              f"({ds.total_copies} copies) to {args.out}")
    return 0


def _report_errors(result, state, povm, quiet: bool) -> None:
    if state is None or quiet:
        return
    pre_s = np.linalg.norm(result.rho_bar - state.rho)
    post_s = np.linalg.norm(result.rho_hat.rho - state.rho)
    print(f"state error (Frobenius): pre-correction {pre_s:.6e}, post-correction {post_s:.6e}")
    if povm is not None:
        pre_p = np.sqrt(np.sum(np.abs(result.povm_bar - povm.elements) ** 2))
        post_p = np.sqrt(np.sum(np.abs(result.povm_hat.elements - povm.elements) ** 2))
        print(f"detector error (Frobenius): pre-correction {pre_p:.6e}, "
              f"post-correction {post_p:.6e}")


def _cmd_estimate(args) -> int:
    ens, state, povm, basis, sc = _load_inputs(args)
    ds = serialize.load_dataset(args.dataset)
    reg = build_regression_matrices(ens, basis)
    config = Stage1Config(method=_METHOD_NAMES[args.method],
                          reg_scale=None if args.reg_scale == "auto" else float(args.reg_scale))
    version = args.version or (sc.estimator if sc else "v1")
    if version == "v2":
        result = estimate_joint_v2(ds, reg.b_natural, config)
    else:
        result = estimate_joint_v1(ds, reg.b, basis, config)
    if args.pure:
        from dataclasses import replace
        result = replace(result, rho_hat=project_pure(result.rho_hat))
    serialize.save_result(result, args.out)
    _report_errors(result, state, povm, args.quiet)
    if not args.quiet:
        print(f"wrote estimate to {args.out}")
    return 0


def _cmd_refine(args) -> int:
    ens, state, povm, basis, _ = _load_inputs(args)
    ds = serialize.load_dataset(args.dataset)
    reg = build_regression_matrices(ens, basis)
    config = Stage1Config(method=_METHOD_NAMES[args.method],
                          reg_scale=None if args.reg_scale == "auto" else float(args.reg_scale))
    init = estimate_joint_v1(ds, reg.b, basis, config)
    result = refine_mod.refine_alternating(ds, reg.b, basis, init, iters=args.iters)
    serialize.save_result(result, args.out)
    _report_errors(result, state, povm, args.quiet)
    if not args.quiet:
        tr = result.diagnostics["objective_trajectory"]
        print(f"objective {tr[0]:.6e} -> {tr[-1]:.6e} "
              f"in {result.diagnostics['sweeps_accepted']} accepted sweeps; wrote {args.out}")
    return 0


def _cmd_export_sos(args) -> int:
    ens, _, _, basis, _ = _load_inputs(args)
    ds = serialize.load_dataset(args.dataset)
    reg = build_regression_matrices(ens, basis)
    problem = refine_mod.export_sos_problem(
        ds, reg.b, basis, args.out, pure=args.pure,
        b_natural=reg.b_natural if args.pure else None,
    )
    if not args.quiet:
        print(f"wrote polynomial program with {len(problem.variables)} variables, "
              f"{len(problem.equalities)} equalities, {len(problem.inequalities)} "
              f"inequalities to {args.out}")
    return 0


def _cmd_rank_check(args) -> int:
    ens, _, _, basis, _ = _load_inputs(args)
    reg = build_regression_matrices(ens, basis)
    d = basis.d
    n2 = basis.n_traceless ** 2
    bound = rank_bound(ens)
    count, n_min = min_hamiltonian_count(d)
    print(f"L = {len(ens)} processes, d = {d}")
    print(f"rank(B) = {reg.rank_b} of {n2}")
    print(f"rank(B_natural) = {reg.rank_b_natural} <= bound {bound} (cap {d ** 4})")
    print(f"complete (v1): {'yes' if reg.complete_v1 else 'no'}")
    print(f"complete (v2): {'yes' if reg.complete_v2 else 'no'}")
    print(f"minimum Hamiltonians for d={d}: {count} (n_min = {n_min})")
    return 0


def _cmd_bench(args) -> int:
    sc = bench_mod.preset(args.preset, seed=args.seed)
    grid = [int(float(tok)) for tok in args.n0_grid.split(",")]
    config = None
    if args.method:
        config = Stage1Config(method=_METHOD_NAMES[args.method],
                              reg_scale=None if args.reg_scale == "auto"
                              else float(args.reg_scale))
    table = bench_mod.run_mse_experiment(sc, grid, trials=args.trials, seed=args.seed,
                                         exact=args.exact, config=config)
    table.to_csv(args.out)
    table.write_metadata(args.out + ".meta.json")
    if not args.quiet:
        slope_s, _, r2_s = bench_mod.fit_loglog_slope(table, "mse_state")
        slope_p, _, r2_p = bench_mod.fit_loglog_slope(table, "mse_povm")
        print(f"state slope {slope_s:+.3f} (r2 {r2_s:.3f}), "
              f"detector slope {slope_p:+.3f} (r2 {r2_p:.3f}); "
              f"{table.failures} failed trials; wrote {args.out}")
    return 0


def _add_common(p, out_default=None):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n0", type=int, default=10000, help="shots per configuration")
    p.add_argument("--out", default=out_default)
    p.add_argument("--exact", action="store_true", help="noiseless simulation mode")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--preset", choices=bench_mod.PRESET_NAMES, default=None)
    p.add_argument("--channels", default=None, help="ensemble JSON file")
    p.add_argument("--hamiltonians", default=None, help="Hamiltonian JSON file")
    p.add_argument("--samples", type=int, default=3,
                   help="sampling points per Hamiltonian")
    p.add_argument("--state", default=None, help="truth state JSON file")
    p.add_argument("--povm", default=None, help="truth detector JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointtomo",
        description="Joint quantum state and detector reconstruction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a measurement dataset")
    _add_common(p, out_default="dataset.json")
    p.add_argument("--anchor", type=int, default=1, help="scale observable index")
    p.set_defaults(func=_cmd_simulate)

    for name, fn in (("estimate", _cmd_estimate), ("refine", _cmd_refine)):
        p = sub.add_parser(name, help=f"{name} from a dataset")
        _add_common(p, out_default=f"{name}.json")
        p.add_argument("--dataset", required=True)
        p.add_argument("--method", choices=sorted(_METHOD_NAMES), default="ls")
        p.add_argument("--reg-scale", default="auto",
                       help="Tikhonov scale, or 'auto' for 100/N")
        p.add_argument("--version", choices=("v1", "v2"), default=None)
        p.add_argument("--pure", action="store_true",
                       help="project the state estimate to rank 1")
        p.add_argument("--iters", type=int, default=100)
        p.set_defaults(func=fn)

    p = sub.add_parser("export-sos", help="write the polynomial program to a file")
    _add_common(p, out_default="problem.sos")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pure", action="store_true")
    p.set_defaults(func=_cmd_export_sos)

    p = sub.add_parser("rank-check", help="informational-completeness diagnostics")
    _add_common(p)
    p.set_defaults(func=_cmd_rank_check)

    p = sub.add_parser("bench", help="MSE scaling experiment over a shot grid")
    _add_common(p, out_default="mse.csv")
    p.add_argument("--n0-grid", default="1000,10000,100000,1000000")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--method", choices=sorted(_METHOD_NAMES), default=None)
    p.add_argument("--reg-scale", default="auto")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _print_config(args, args.quiet)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
