"""Command-line entry point: ``rrtebd <command> [flags]``.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 TEBD run aborted
by the discarded-weight threshold, 4 chain-mapping breakdown.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import asdict
from pathlib import Path

from .bench import (
    BenchConfig,
    ProfileConfig,
    SpeedupSummary,
    StabilityRecord,
    TebdRunConfig,
    TimingRecord,
    generate_matrix,
    profile_two_site_update,
    run_chainmap,
    run_stability,
    run_svd_bench,
    run_tebd,
    write_records_csv,
    write_tebd_outputs,
)
from .chainmap import ChainBreakdown
from .linalg import ContractViolation
from .tebd import write_diagnostics_csv

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_ABORT, EXIT_BREAKDOWN = 0, 1, 2, 3, 4


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write_meta(path: Path, command: str, config: dict, extra: dict | None = None) -> None:
    meta = {"command": command, "config": config, "python": platform.python_version()}
    if extra:
        meta.update(extra)
    path.write_text(json.dumps(meta, indent=2, default=str) + "\n", encoding="ascii")


def cmd_matgen(args) -> int:
    spec = generate_matrix(args.rows, args.cols, args.spectrum, args.seed, args.out)
    print(f"wrote {args.out} ({args.rows}x{args.cols}, spectrum {spec.label}) and {args.out}.spectrum")
    return EXIT_OK


def cmd_svd_bench(args) -> int:
    cfg = BenchConfig(
        "svd-bench", args.sizes, args.spectrum, args.k, args.p, args.q, args.trials, 1, args.seed,
        args.threads, args.out, args.row_factor,
    )
    records, summary = run_svd_bench(cfg)
    out = Path(args.out)
    write_records_csv(records, out, TimingRecord)
    summary_path = out.with_name(out.stem + "_summary.csv")
    if summary:
        write_records_csv(summary, summary_path, SpeedupSummary)
    _write_meta(out.with_suffix(".meta.json"), "svd-bench", asdict(cfg))
    for s in summary:
        print(f"size {s.rows}x{s.size} k={s.k} p={s.p} q={s.q}: det {s.median_det_seconds:.3f}s "
              f"rrsvd {s.median_rrsvd_seconds:.3f}s speed-up {s.speedup:.2f}")
    for r in records:
        if r.method == "skip":
            print(f"size {r.rows}x{r.size} skipped: {r.note}", file=sys.stderr)
    return EXIT_OK


def cmd_stability(args) -> int:
    p = args.p if args.p is not None else args.k
    cfg = BenchConfig(
        "stability", [args.size], args.spectrum, [args.k], [p], args.q, args.reruns, args.instances,
        args.seed, args.threads, args.out, args.row_factor,
    )
    rows = run_stability(cfg)
    out = Path(args.out)
    write_records_csv(rows, out, StabilityRecord)
    _write_meta(out.with_suffix(".meta.json"), "stability", asdict(cfg))
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_tebd_run(args) -> int:
    cfg = TebdRunConfig(
        model=args.model, sites=args.sites, chi=args.chi, dt=args.dt, steps=args.steps, backend=args.backend,
        epsilon=args.epsilon, accuracy_check=args.accuracy_check, oversampling=args.oversampling,
        power_iterations=args.power_iterations, crossover=args.crossover, seed=args.seed,
        coupling=args.coupling, field=args.field, initial=args.initial, coeff_file=args.coeff_file,
        boson_dim=args.boson_dim, trunc_tolerance=args.trunc_tolerance,
        abort_threshold=args.abort_threshold, observe_every=args.observe_every, threads=args.threads,
    )
    run = run_tebd(cfg)
    paths = write_tebd_outputs(run, args.out)
    res = run.result
    _write_meta(Path(str(args.out) + "_run.json"), "tebd-run", asdict(cfg), {
        "aborted": res.aborted, "abort_step": res.abort_step, "cumulative_discarded": res.cumulative_discarded,
    })
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    if res.aborted:
        print(f"aborted at step {res.abort_step}: cumulative discarded weight "
              f"{res.cumulative_discarded:.3e} exceeds {cfg.abort_threshold:.3e}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_chainmap(args) -> int:
    coeffs = run_chainmap(args.measure, args.n_chain, args.out)
    print(f"wrote {coeffs.n_chain} chain sites to {args.out} (t0={coeffs.t0:.6g})")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = ProfileConfig(
        local_dim=args.local_dim, chi=args.chi, sites=args.sites, updates=args.updates, decay=args.decay,
        backend=args.backend, oversampling=args.oversampling, power_iterations=args.power_iterations,
        accuracy_check=args.accuracy_check, epsilon=args.epsilon, crossover=args.crossover, seed=args.seed,
        threads=args.threads,
    )
    records, summary = profile_two_site_update(cfg)
    out = Path(args.out)
    write_diagnostics_csv(records, out)
    _write_meta(out.with_suffix(".meta.json"), "profile", asdict(cfg), {"summary": summary})
    print(" ".join(f"{k}={v:.4g}" for k, v in summary.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrtebd", description="Randomized SVD and TEBD experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None, help="BLAS thread limit (advisory, recorded)")

    p = sub.add_parser("matgen", help="structured matrix as RRSM plus spectrum sidecar")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--spectrum", required=True, help="exp:<ratio> | expw:<weight> | power | zero | file:<path>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_matgen)

    p = sub.add_parser("svd-bench", help="deterministic vs randomized SVD timing")
    p.add_argument("--sizes", type=_ints, default=[900, 1600, 2500, 3600, 4900])
    p.add_argument("--row-factor", type=int, default=1)
    p.add_argument("--spectrum", default="expw:4e-4")
    p.add_argument("--k", type=_ints, default=[100])
    p.add_argument("--p", type=_ints, default=[100])
    p.add_argument("--q", type=_ints, default=[2])
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_svd_bench)

    p = sub.add_parser("stability", help="per-index singular value errors")
    p.add_argument("--size", type=int, default=750)
    p.add_argument("--row-factor", type=int, default=2)
    p.add_argument("--spectrum", default="expw:4e-4")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--p", type=int, default=None, help="defaults to k")
    p.add_argument("--q", type=_ints, default=[2, 4])
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--reruns", type=int, default=20)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("tebd-run", help="TEBD evolution with timing diagnostics")
    p.add_argument("--model", choices=["ising", "heisenberg", "tedopa-chain"], default="ising")
    p.add_argument("--coeff-file", default=None, help="chain coefficients for tedopa-chain")
    p.add_argument("--boson-dim", type=int, default=4)
    p.add_argument("--sites", type=int, default=6)
    p.add_argument("--chi", type=int, default=32)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--backend", choices=["det", "rrsvd"], default="det")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--accuracy-check", action="store_true")
    p.add_argument("--oversampling", type=int, default=None, help="defaults to chi")
    p.add_argument("--power-iterations", type=int, default=2)
    p.add_argument("--crossover", type=int, default=256)
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--field", type=float, default=1.0)
    p.add_argument("--initial", choices=["up", "neel"], default="up")
    p.add_argument("--trunc-tolerance", type=float, default=1e-24)
    p.add_argument("--abort-threshold", type=float, default=None)
    p.add_argument("--observe-every", type=int, default=1)
    p.add_argument("--out", required=True, help="output prefix")
    common(p)
    p.set_defaults(func=cmd_tebd_run)

    p = sub.add_parser("chainmap", help="map a discretized bath measure to chain coefficients")
    p.add_argument("--measure", required=True, help="two-column text: node weight")
    p.add_argument("--n-chain", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_chainmap)

    p = sub.add_parser("profile", help="timing decomposition of fixed-size two-site updates")
    p.add_argument("--local-dim", type=int, default=16)
    p.add_argument("--chi", type=int, default=100)
    p.add_argument("--sites", type=int, default=6)
    p.add_argument("--updates", type=int, default=5)
    p.add_argument("--decay", type=float, default=0.9)
    p.add_argument("--backend", choices=["det", "rrsvd"], default="det")
    p.add_argument("--oversampling", type=int, default=None)
    p.add_argument("--power-iterations", type=int, default=2)
    p.add_argument("--accuracy-check", action="store_true")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--crossover", type=int, default=256)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ChainBreakdown as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except ContractViolation as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
