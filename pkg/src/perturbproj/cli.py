"""Command-line front end: releases, benchmarks, and their file formats.

Exit codes: 0 success, 2 parse or validation failure, 3 numerical failure.
All randomness flows from --seed, artifacts are byte-identical across reruns
(wall-clock time goes to stderr, never into files), and every sidecar records
epsilon, delta, sensitivity, sigma, seed, and method.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .bench import (
    complexity_box_closed_form,
    complexity_monte_carlo,
    scaling_experiment_cosine,
    scaling_experiment_marginals,
    stability_experiment,
)
from .engine import EngineConfig, default_iterations
from .marginals import (
    avg_query_sq_error,
    parity_tensor,
    read_dataset_csv,
    release_even_k,
    release_gaussian_only,
    release_threshold_baseline,
    save_release,
)
from .mechanism import PrivacyParams, RandomStream
from .projections import EigenFailure, EntryClip, FrobeniusBall, PsdTrace
from .similarity import (
    MODE_EXACT,
    MODE_PRACTICAL,
    read_vectors_csv,
    release_cosine_exact,
    release_cosine_practical,
    write_release_csv,
)

_SET_FLAG = {"box": "bound", "frobenius": "radius", "psd-trace": "trace"}


def _check_privacy(epsilon: float, delta: float) -> None:
    """Refuse bad privacy flags before touching any input."""
    if not epsilon > 0:
        raise ValueError(f"--epsilon must be > 0, got {epsilon:g}")
    if not 0 < delta < 1:
        raise ValueError(f"--delta must be in (0, 1), got {delta:g}")


def _parse_sizes(text: str) -> list:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValueError(f"--sizes must be comma-separated integers, got {text!r}")
    if not sizes:
        raise ValueError("--sizes must name at least one size")
    return sizes


def _write_json(payload: dict, out) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _sidecar(path: Path, payload: dict) -> None:
    path.with_suffix(".json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def run_similarity(args) -> int:
    _check_privacy(args.epsilon, args.delta)
    if not args.sensitivity > 0:
        raise ValueError(f"--sensitivity must be > 0, got {args.sensitivity:g}")
    if args.iters is not None and args.iters < 1:
        raise ValueError(f"--iters must be >= 1, got {args.iters}")
    vectors = read_vectors_csv(args.input, header=args.header)
    params = PrivacyParams(args.epsilon, args.delta, args.sensitivity)
    iters = args.iters if args.iters is not None else default_iterations(vectors.count)
    config = EngineConfig(iterations=iters, stream=RandomStream(args.seed))
    release_fn = release_cosine_exact if args.mode == "exact" else release_cosine_practical
    release = release_fn(vectors, params, config)
    out = Path(args.out)
    write_release_csv(release, out)
    _sidecar(out, {
        "epsilon": params.epsilon,
        "delta": params.delta,
        "sensitivity": params.sensitivity,
        "sigma": release.sigma,
        "seed": args.seed,
        "method": MODE_EXACT if args.mode == "exact" else MODE_PRACTICAL,
        "iterations": release.iterations,
        "residuals": list(release.residuals),
    })
    return 0


def run_marginals(args) -> int:
    _check_privacy(args.epsilon, args.delta)
    k = args.order
    if k < 1:
        raise ValueError(f"--order must be >= 1, got {k}")
    if args.mode == "even-flatten" and k % 2 != 0:
        raise ValueError(
            f"--mode even-flatten needs an even --order, got {k}; "
            "use --mode threshold or --mode gaussian for odd orders"
        )
    if args.mode == "threshold" and args.sparsity is None:
        raise ValueError("--mode threshold needs --sparsity to be declared")
    if args.sparsity is not None and args.sparsity < 1:
        raise ValueError(f"--sparsity must be >= 1, got {args.sparsity}")
    data = read_dataset_csv(args.input, header=args.header,
                            count_column=args.count_column, sparsity=args.sparsity)
    params = PrivacyParams(args.epsilon, args.delta, 1.0)
    stream = RandomStream(args.seed)
    if args.mode == "even-flatten":
        release = release_even_k(data, k, params, stream)
    elif args.mode == "threshold":
        release = release_threshold_baseline(data, k, args.sparsity, params, stream)
    else:
        release = release_gaussian_only(data, k, params, stream)
    save_release(release, args.out)
    if args.report_error:
        err = avg_query_sq_error(release, parity_tensor(data, k))
        print(f"average query-wise squared error: {err:.17g}")
    return 0


def _bench_set(args):
    name = args.set
    if name == "box":
        return EntryClip(args.bound)
    if name == "frobenius":
        return FrobeniusBall(args.radius)
    return PsdTrace(args.trace)


def _write_per_trial(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("n,trial,method,error\n")
        for n, trial, method, error in rows:
            fh.write(f"{n},{trial},{method},{error:.17g}\n")


def run_bench(args) -> int:
    _check_privacy(args.epsilon, args.delta)
    if args.trials < 2:
        raise ValueError(f"--trials must be >= 2, got {args.trials}")
    stream = RandomStream(args.seed)
    started = time.perf_counter()

    if args.experiment in ("cosine-scaling", "marginal-scaling"):
        if args.sizes is None:
            raise ValueError(f"{args.experiment} needs --sizes")
        sizes = _parse_sizes(args.sizes)
        params = PrivacyParams(args.epsilon, args.delta, args.sensitivity)
        if args.experiment == "cosine-scaling":
            report = scaling_experiment_cosine(sizes, params, args.trials, stream,
                                               iterations=args.iters)
        else:
            report = scaling_experiment_marginals(sizes, args.order, args.m, params,
                                                  args.trials, stream,
                                                  sparsity=args.sparsity)
        payload = report.to_dict(include_wall_time=False)
        if args.per_trial_csv:
            _write_per_trial(report.per_trial, args.per_trial_csv)
    elif args.experiment == "stability":
        set_ = _bench_set(args)
        if args.set != "box":
            raise ValueError("stability compares against the box closed form; use --set box")
        shape = (args.n,) if args.ambient == "vector" else (args.n, args.n)
        result = stability_experiment(set_, np.zeros(shape), args.trials, stream)
        bound = (4.0 / 3.0) * args.bound * complexity_box_closed_form(
            args.n, "vector" if args.ambient == "vector" else "sym-matrix")
        payload = {
            "experiment": "stability",
            "set_kind": set_.kind,
            "ambient": args.ambient,
            "n": args.n,
            "trials": args.trials,
            "estimate": result.estimate,
            "std_error": result.std_error,
            "stability_bound": bound,
            "within_bound": bool(result.estimate <= bound + 3 * result.std_error),
            "seed": args.seed,
            "wall_time_s": None,
        }
    else:
        set_ = _bench_set(args)
        estimate = complexity_monte_carlo(set_, args.n, args.trials, stream,
                                          ambient=args.ambient)
        closed = None
        if args.set == "box":
            closed = args.bound * complexity_box_closed_form(
                args.n, "vector" if args.ambient == "vector" else "sym-matrix")
        payload = {
            "experiment": "complexity",
            "set_kind": estimate.set_kind,
            "ambient": estimate.ambient,
            "n": estimate.n,
            "trials": estimate.trials,
            "value": estimate.value,
            "std_error": estimate.std_error,
            "closed_form": closed,
            "seed": args.seed,
            "wall_time_s": None,
        }

    _write_json(payload, args.out)
    print(f"{args.experiment} completed in {time.perf_counter() - started:.3f}s",
          file=sys.stderr)
    return 0


def _add_privacy_flags(p, required: bool) -> None:
    p.add_argument("--epsilon", type=float, required=required,
                   default=None if required else 1.0, help="privacy budget, > 0")
    p.add_argument("--delta", type=float, required=required,
                   default=None if required else 1e-6, help="failure probability, in (0, 1)")


def _add_bench_flags(p) -> None:
    p.add_argument("--sizes", help="comma-separated problem sizes, ascending")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    p.add_argument("--n", type=int, default=4, help="side length for stability/complexity")
    p.add_argument("--set", choices=sorted(_SET_FLAG), default="box")
    p.add_argument("--ambient", choices=["vector", "matrix"], default="matrix")
    p.add_argument("--bound", type=float, default=1.0, help="entry bound for --set box")
    p.add_argument("--radius", type=float, default=1.0, help="radius for --set frobenius")
    p.add_argument("--trace", type=float, default=1.0, help="trace cap for --set psd-trace")
    p.add_argument("--order", type=int, default=2, help="marginal order k")
    p.add_argument("--m", type=int, default=100, help="record count for marginal scaling")
    p.add_argument("--sparsity", type=int, default=None)
    p.add_argument("--sensitivity", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--per-trial-csv", default=None,
                   help="also write raw per-trial errors as CSV")
    _add_privacy_flags(p, required=False)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perturbproj",
        description="Differentially private matrix and marginal releases by "
                    "calibrated noise plus convex projection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("similarity", help="release private pairwise cosine similarities")
    sim.add_argument("--input", required=True, help="CSV of unit-norm row vectors")
    _add_privacy_flags(sim, required=True)
    sim.add_argument("--sensitivity", type=float, default=1.0)
    sim.add_argument("--mode", choices=["exact", "practical"], default="exact")
    sim.add_argument("--iters", type=int, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="released matrix CSV path")
    sim.add_argument("--header", action="store_true", help="skip the first input line")

    mar = sub.add_parser("marginals", help="release private k-way marginal tensors")
    mar.add_argument("--input", required=True, help="CSV of 0/1 records")
    _add_privacy_flags(mar, required=True)
    mar.add_argument("--order", type=int, default=2, help="tensor order k")
    mar.add_argument("--mode", choices=["even-flatten", "threshold", "gaussian"],
                     default="even-flatten")
    mar.add_argument("--sparsity", type=int, default=None,
                     help="declared max ones per record")
    mar.add_argument("--seed", type=int, default=0)
    mar.add_argument("--out", required=True, help="released tensor binary path")
    mar.add_argument("--header", action="store_true", help="skip the first input line")
    mar.add_argument("--count-column", action="store_true",
                     help="treat the last column as a record multiplicity")
    mar.add_argument("--report-error", action="store_true",
                     help="print average query-wise squared error vs the clean tensor")

    ben = sub.add_parser("bench", help="run a benchmark experiment")
    ben.add_argument("experiment",
                     choices=["cosine-scaling", "marginal-scaling", "stability", "complexity"])
    _add_bench_flags(ben)

    comp = sub.add_parser("complexity", help="shorthand for `bench complexity`")
    _add_bench_flags(comp)
    comp.set_defaults(experiment="complexity")

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "similarity":
            return run_similarity(args)
        if args.command == "marginals":
            return run_marginals(args)
        return run_bench(args)
    except (EigenFailure, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
