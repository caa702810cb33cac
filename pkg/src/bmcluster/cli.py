"""Command line entry point: ``bmcluster <subcommand> ...``.

Exit status is 0 on success, 2 when inputs fail validation and 3 on any
other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .exceptions import TrimClampWarning, ValidationError
from .harness import (
    ExperimentConfig,
    exp_feasibility,
    exp_improvement_vs_T,
    exp_spectral_error_vs_n,
    exp_spectral_norm,
    raster_table,
    trajectory_lengths,
)
from .improve import improve
from .info import check_zero_condition, information_quantity
from .metrics import misclassification
from .model import PRESETS, load_model, mixing_time_bound
from .simulate import Trajectory, count_matrix, simulate_trajectory
from .spectral import spectral_cluster

def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _t_rule(text):
    return text if not text[0].isdigit() or "log" in text or text in ("n2", "n3") else _int_list(text)


def _resolve_model(args, default="spectral"):
    if getattr(args, "model", None):
        model, n = load_model(args.model)
        return model, n
    return PRESETS[args.preset or default], None


def _add_model_args(p, default):
    p.add_argument("--model", type=Path, help="JSON or TOML model file with keys K, alpha, p (optional n)")
    p.add_argument("--preset", choices=sorted(PRESETS), help=f"bundled parameter set (default: {default})")


def _add_experiment_args(p, *, n, t_rule, trials, iters):
    p.add_argument("--n", type=_int_list, default=n, help="state counts, comma separated")
    p.add_argument("--t-rule", type=_t_rule, default=t_rule, help="nlogn, nlog1.5n, nlog2n, n1.025logn, n2, n3, or a comma list of T values")
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0, help="base seed; trial i uses seed XOR i")
    p.add_argument("--iters", type=int, default=iters, help="improvement iterations")
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--spectral-method", choices=["kmeans", "neighborhood"], default="kmeans")


def _config(args, model, **extra):
    return ExperimentConfig(
        model=model,
        n_grid=args.n,
        t_rule=args.t_rule,
        trials=args.trials,
        seed_base=args.seed,
        improvement_iters=args.iters,
        outputs=args.out,
        workers=args.workers,
        spectral_method=args.spectral_method,
        **extra,
    )


def cmd_info(args):
    model, _ = _resolve_model(args)
    report = information_quantity(model.alpha, model.p)
    zero, witness = check_zero_condition(model.alpha, model.p)
    out = report.to_dict()
    out["zero_condition"] = {"holds": zero, "witness": list(witness) if witness else None}
    out["eta"] = model.eta
    out["mixing_bound_eps_0.25"] = mixing_time_bound(model.eta, 0.25)
    print(json.dumps(out, indent=2))


def cmd_simulate(args):
    model, n_file = _resolve_model(args)
    n = args.n[0] if args.n else n_file
    if n is None:
        raise ValidationError("--n is required", field="n")
    T = trajectory_lengths(args.t_rule, n)[0]
    traj = simulate_trajectory(model.kernel(n), T, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    traj.dump(args.out / "trajectory.txt", n)
    count_matrix(traj, n).to_csv(args.out / "counts.csv")
    np.savetxt(args.out / "truth.txt", model.partition(n).labels, fmt="%d")
    print(f"wrote {args.out}/trajectory.txt (n={n}, T={T}, seed={args.seed})")


def cmd_cluster(args):
    args.out.mkdir(parents=True, exist_ok=True)
    truth = None
    if args.trajectory:
        traj, n = Trajectory.load(args.trajectory)
        counts = count_matrix(traj, n)
        if args.K is None:
            raise ValidationError("--K is required with --trajectory", field="K")
        K = args.K
    else:
        model, n_file = _resolve_model(args)
        n = args.n[0] if args.n else n_file
        if n is None:
            raise ValidationError("--n is required", field="n")
        K = model.K
        T = trajectory_lengths(args.t_rule, n)[0]
        traj = simulate_trajectory(model.kernel(n), T, args.seed)
        counts = count_matrix(traj, n)
        truth = model.partition(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrimClampWarning)
        spectral = spectral_cluster(counts, K, method=args.spectral_method, random_state=args.seed % 2**32)
    np.savetxt(args.out / "singular_values.csv", spectral.singular_values, fmt="%.10g")
    final = spectral.clusters
    if args.iters > 0 and final.is_complete:
        trace = improve(counts, final, args.iters, truth=truth)
        trace.to_csv(args.out / "trace.csv")
        final = trace.final
    np.savetxt(args.out / "partition.txt", final.labels, fmt="%d")
    summary = {"n": counts.n, "T": counts.T, "K": K, "sizes": final.sizes.tolist()}
    if truth is not None:
        summary["spectral_error"] = misclassification(truth, spectral.clusters).rate
        summary["final_error"] = misclassification(truth, final).rate
    print(json.dumps(summary))


def cmd_exp_spectral(args):
    model, _ = _resolve_model(args)
    table = exp_spectral_error_vs_n(_config(args, model))
    print(table.write(args.out))


def cmd_exp_improve(args):
    model, _ = _resolve_model(args, "improvement")
    table = exp_improvement_vs_T(_config(args, model))
    print(table.write(args.out))


def cmd_exp_feasibility(args):
    # only the cluster fractions of a two-cluster model are used; otherwise equal halves
    model, _ = _resolve_model(args)
    table = exp_feasibility(_config(args, model, grid_resolution=args.resolution))
    print(table.write(args.out))


def cmd_exp_norm(args):
    model, _ = _resolve_model(args)
    table, fit = exp_spectral_norm(_config(args, model))
    path = table.write(args.out)
    report = {"c1": fit.intercept, "c2": fit.slope, "r2": fit.r2}
    (args.out / "exp_norm_fit.json").write_text(json.dumps(report, indent=2) + "\n")
    print(path)
    print(json.dumps(report))


def cmd_raster(args):
    alpha = [1.0 - args.alpha2, args.alpha2]
    table = raster_table(alpha, args.resolution, args.threshold)
    print(table.write(args.out))


def build_parser():
    parser = argparse.ArgumentParser(prog="bmcluster", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="information quantities of a model")
    _add_model_args(p, "spectral")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("simulate", help="simulate a trajectory and its counts")
    _add_model_args(p, "spectral")
    _add_experiment_args(p, n=None, t_rule="nlogn", trials=1, iters=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cluster", help="run the two-stage pipeline")
    _add_model_args(p, "spectral")
    p.add_argument("--trajectory", type=Path, help="trajectory dump to cluster instead of simulating")
    p.add_argument("--K", type=int)
    _add_experiment_args(p, n=None, t_rule="nlogn", trials=1, iters=3)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("exp-spectral", help="spectral-stage error against n")
    _add_model_args(p, "spectral")
    _add_experiment_args(p, n=list(range(50, 751, 50)), t_rule="nlogn", trials=40, iters=0)
    p.set_defaults(func=cmd_exp_spectral)

    p = sub.add_parser("exp-improve", help="error after refinement steps against T")
    _add_model_args(p, "improvement")
    _add_experiment_args(p, n=[240], t_rule=[2500, 5000, 10000, 15000, 20000, 25000, 30000], trials=40, iters=2)
    p.set_defaults(func=cmd_exp_improve)

    p = sub.add_parser("exp-feasibility", help="two-cluster raster of empirical errors at T = n ln n")
    _add_model_args(p, "spectral")
    _add_experiment_args(p, n=[300], t_rule="nlogn", trials=10, iters=6)
    p.add_argument("--resolution", type=int, default=10)
    p.set_defaults(func=cmd_exp_feasibility)

    p = sub.add_parser("exp-norm", help="noise spectral norm against n with sqrt(T/n) fit")
    _add_model_args(p, "spectral")
    _add_experiment_args(p, n=list(range(100, 501, 50)), t_rule="nlog1.5n", trials=10, iters=0)
    p.set_defaults(func=cmd_exp_norm)

    p = sub.add_parser("raster", help="theoretical two-cluster feasibility raster")
    p.add_argument("--alpha2", type=float, default=0.5)
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.set_defaults(func=cmd_raster)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        field = f" [{exc.field}]" if getattr(exc, "field", None) else ""
        print(f"error{field}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
