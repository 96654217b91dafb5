"""Command-line front end: dataset generation, mixing, diagnostics, benchmarks.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 domain
incompatibility (strategy/task mismatch, invalid dataset for an operation),
4 invariant violation detected by a check.

Reports are machine-readable (CSV or single-line JSON) on stdout; any human
prose goes to stderr. Every subcommand with a ``--seed`` flag is
bit-reproducible. ``--config FILE`` supplies ``key=value`` defaults that
explicit flags override; unknown keys are rejected. The environment variable
``SPD_AUGMENT_THREADS`` caps batch worker count (0 = auto).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import augment, regress, spdness
from .data_io import (
    TASK_CLASSIFICATION,
    TASK_REGRESSION,
    LabeledDataset,
    SpdbFormatError,
    gen_labeled_dataset,
    gen_random_spd,
    gen_synthetic_series,
    read_matrices,
    read_series_csv,
    write_matrices,
    write_series_csv,
)
from .linalg import count_eig_calls

__all__ = ["main"]


class _UsageError(Exception):
    """Bad flag combination detected after argparse."""


def _workers() -> int:
    raw = os.environ.get("SPD_AUGMENT_THREADS", "")
    if not raw:
        return 1
    cap = int(raw)
    if cap == 0:
        return os.cpu_count() or 1
    return max(1, cap)


def _emit_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _emit_csv(header: list[str], rows: list[list], out_path: str | None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if out_path:
        Path(out_path).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"{flag} expects a comma-separated integer list: {exc}")
    if not values:
        raise _UsageError(f"{flag} list is empty")
    return values


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"{flag} expects a comma-separated float list: {exc}")
    if not values:
        raise _UsageError(f"{flag} list is empty")
    return values


# ----------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "series":
        if args.t is None:
            raise _UsageError("--t is required for --kind series")
        latent = args.latent_rank if args.latent_rank is not None else args.n
        files = []
        for k in range(args.count):
            series = gen_synthetic_series(args.n, args.t, latent, args.noise, rng)
            if args.count == 1:
                target = Path(args.output)
            else:
                stem = Path(args.output)
                target = stem.with_name(f"{stem.stem}_{k:03d}{stem.suffix or '.csv'}")
            write_series_csv(target, series, layout=args.series_layout)
            files.append(str(target))
        _emit_json(
            {"kind": args.kind, "count": args.count, "n": args.n, "t": args.t,
             "seed": args.seed, "files": files}
        )
        return 0
    if args.kind == "log-linear":
        dataset = gen_labeled_dataset(
            args.n, args.count, TASK_REGRESSION, "log-linear", rng, noise=args.noise
        )
    elif args.kind == "clustered":
        dataset = gen_labeled_dataset(
            args.n,
            args.count,
            TASK_CLASSIFICATION,
            "clustered",
            rng,
            noise=args.noise,
            n_classes=args.classes,
            separation=args.separation,
        )
    else:  # spd
        mats = np.stack(
            [gen_random_spd(args.n, args.condition, rng).array for _ in range(args.count)]
        )
        dataset = LabeledDataset(
            matrices=mats,
            labels=rng.uniform(0.0, 1.0, size=args.count),
            task=TASK_REGRESSION,
        )
    write_matrices(args.output, dataset)
    _emit_json(
        {"kind": args.kind, "count": args.count, "n": args.n, "seed": args.seed,
         "output": str(args.output)}
    )
    return 0


# ----------------------------------------------------------------------
# mix


def cmd_mix(args) -> int:
    dataset = read_matrices(args.input)
    config = augment.MixConfig(
        strategy=args.strategy,
        alpha=args.alpha,
        keep_prob=args.keep_prob,
        cmix_bandwidth=args.bandwidth,
        seed=args.seed,
        use_eigencache=args.cache == "on",
    )
    samples = augment.augment_batch(dataset, config, args.count, workers=_workers())
    if samples:
        matrices = np.stack([s.matrix for s in samples])
        first = samples[0].label
        if np.ndim(first) == 1:
            labels = np.stack([np.asarray(s.label) for s in samples])
        else:
            labels = np.asarray([float(s.label) for s in samples])
    else:
        matrices = np.zeros((0, dataset.dim, dataset.dim))
        labels = np.zeros(0)
    out = LabeledDataset(
        matrices=matrices,
        labels=labels,
        task=dataset.task,
        is_correlation=dataset.is_correlation and args.strategy == "gmixup",
        ids=[f"m{k:06d}" for k in range(len(samples))],
    )
    write_matrices(args.output, out)
    prov_path = Path(args.output).with_name(Path(args.output).stem + ".provenance.csv")
    with open(prov_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "strategy", "source_i", "source_j", "lam", "mask_summary"])
        for sample_id, s in zip(out.ids, samples):
            p = s.provenance
            writer.writerow(
                [sample_id, p.strategy, p.source_i, p.source_j or "",
                 "" if p.lam is None else repr(p.lam), p.mask_summary or ""]
            )
    _emit_json(
        {"strategy": args.strategy, "count": len(samples), "n": dataset.dim,
         "seed": args.seed, "cache": args.cache, "output": str(args.output)}
    )
    return 0


# ----------------------------------------------------------------------
# diagnose


def _infer_format(path: str, explicit: str) -> str:
    if explicit != "auto":
        return explicit
    return "spdb" if path.endswith(".spdb") else "series"


def cmd_diagnose(args) -> int:
    sweep = _parse_int_list(args.sweep, "--sweep") if args.sweep else None
    header = ["id", "n", "t", "positive_count", "spdness_pct", "is_spd"]
    rows: list[list] = []
    per_t: dict[int, list[float]] = {}

    def add(sample_id: str, rep: spdness.SpdnessReport) -> None:
        rows.append(
            [sample_id, rep.n, rep.t, rep.positive_count,
             f"{rep.spdness_pct:.4f}", int(rep.is_spd)]
        )
        per_t.setdefault(rep.t, []).append(rep.spdness_pct)

    for path in args.input:
        fmt = _infer_format(path, args.format)
        if fmt == "spdb":
            if sweep is not None:
                raise _UsageError("--sweep applies to series input only")
            if args.t is None:
                raise _UsageError("--t is required for matrix (SPDB) input")
            dataset = read_matrices(path)
            for sample_id, mat in zip(dataset.ids, dataset.matrices):
                add(sample_id, spdness.spdness_report(mat, dataset.dim, args.t))
        else:
            series = read_series_csv(path, layout=args.series_layout)
            n, t = series.shape
            name = Path(path).stem
            lengths = sweep if sweep is not None else [t]
            for tt in lengths:
                if tt < 2 or tt > t:
                    raise _UsageError(
                        f"sweep length {tt} is invalid for a series of length {t}"
                    )
                if args.reduce == "average" and t % tt != 0:
                    raise _UsageError(
                        f"sweep length {tt} does not divide the series length {t}"
                    )
                reduced = (
                    spdness.truncate(series, tt)
                    if args.reduce == "truncate"
                    else spdness.downsample_by_averaging(series, tt)
                )
                add(name, spdness.spdness_report(spdness.correlation(reduced), n, tt))

    for tt in sorted(per_t):
        pcts = per_t[tt]
        rows.append(
            ["aggregate", "", tt, "", f"{float(np.mean(pcts)):.4f}",
             f"{float(np.mean([p == 100.0 for p in pcts])):.4f}"]
        )
    _emit_csv(header, rows, args.output)
    return 0


# ----------------------------------------------------------------------
# regress


def cmd_regress(args) -> int:
    dataset = read_matrices(args.input)
    if dataset.task != TASK_REGRESSION:
        raise ValueError("the regression harness requires a regression dataset")
    if len(dataset) < 2:
        raise ValueError("need at least 2 samples")
    if len(dataset) and float(np.min(dataset.labels)) < 0.0:
        raise ValueError("the comparison requires non-negative labels")
    lambdas = _parse_float_list(args.lambdas, "--lambdas")
    rng = np.random.default_rng(args.seed)
    header = ["pair", "lam", "err_geodesic", "err_line", "violation", "ordering_violation"]
    rows: list[list] = []
    violations = 0
    for trial in range(args.trials):
        a = int(rng.integers(len(dataset)))
        b = int(rng.integers(len(dataset) - 1))
        b = b + 1 if b >= a else b
        s_a, s_b = dataset.matrices[a], dataset.matrices[b]
        sigma = args.sigma if args.sigma is not None else regress.default_harness_sigma(s_a, s_b)
        config = regress.KernelConfig(sigma=sigma)
        table = regress.theorem1_harness(
            s_a, s_b, float(dataset.labels[a]), float(dataset.labels[b]), lambdas, config
        )
        pair = f"{dataset.ids[a]}:{dataset.ids[b]}"
        for row in table:
            violations += int(row.loss_violation)
            rows.append(
                [pair, repr(row.lam), repr(row.err_geodesic_sq), repr(row.err_line_sq),
                 int(row.loss_violation), int(row.ordering_violation)]
            )
    _emit_csv(header, rows, args.output)
    if violations:
        print(f"{violations} loss violations detected", file=sys.stderr)
        return 4
    return 0


# ----------------------------------------------------------------------
# probe


def cmd_probe(args) -> int:
    if args.trials < 1:
        raise _UsageError("--trials must be at least 1")
    dataset = read_matrices(args.input)
    rng = np.random.default_rng(args.seed)
    result = augment.incorrect_label_probe(dataset, args.trials, rng)
    _emit_json(
        {
            "trials": args.trials,
            "mean_dv": result.mean_dv,
            "mean_dr": result.mean_dr,
            "std_dv": result.std_dv,
            "std_dr": result.std_dr,
            "relative_gap": result.relative_gap,
        }
    )
    return 0


# ----------------------------------------------------------------------
# bench


def _median_seconds(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def cmd_bench(args) -> int:
    dims = _parse_int_list(args.n, "--n")
    header = [
        "n", "batch", "reps", "strategy", "median_per_mix_seconds",
        "eig_calls_per_mix", "precompute_seconds",
    ]
    rows: list[list] = []
    for n in dims:
        rng = np.random.default_rng(args.seed + n)
        mats = np.stack(
            [gen_random_spd(n, 100.0, rng).array for _ in range(args.batch)]
        )
        labels = rng.uniform(0.0, 1.0, size=args.batch)
        dataset = LabeledDataset(matrices=mats, labels=labels, task=TASK_REGRESSION)
        lams = rng.uniform(0.0, 1.0, size=args.batch)
        pairs = [(k, (k + 1) % args.batch) for k in range(args.batch)]

        def run_direct():
            for (a, b), lam in zip(pairs, lams):
                augment.r_mixup(mats[a], mats[b], labels[a], labels[b], float(lam))

        def run_vmix():
            for (a, b), lam in zip(pairs, lams):
                augment.v_mixup(mats[a], mats[b], labels[a], labels[b], float(lam))

        precompute_start = time.perf_counter()
        cache = augment.EigenCache.build(dataset)
        precompute = time.perf_counter() - precompute_start
        entries = [(cache.entry(dataset.ids[a]), cache.entry(dataset.ids[b])) for a, b in pairs]

        def run_cached():
            for (ea, eb), ((a, b), lam) in zip(entries, zip(pairs, lams)):
                augment.r_mixup_cached(ea, eb, labels[a], labels[b], float(lam))

        with count_eig_calls() as counter:
            augment.r_mixup(mats[0], mats[1], labels[0], labels[1], 0.5)
        direct_calls = counter.count
        with count_eig_calls() as counter:
            augment.r_mixup_cached(entries[0][0], entries[0][1], labels[0], labels[1], 0.5)
        cached_calls = counter.count
        with count_eig_calls() as counter:
            augment.v_mixup(mats[0], mats[1], labels[0], labels[1], 0.5)
        vmix_calls = counter.count

        t_direct = _median_seconds(run_direct, args.reps) / args.batch
        t_cached = _median_seconds(run_cached, args.reps) / args.batch
        t_vmix = _median_seconds(run_vmix, args.reps) / args.batch
        rows.append([n, args.batch, args.reps, "rmixup-direct", repr(t_direct), direct_calls, ""])
        rows.append(
            [n, args.batch, args.reps, "rmixup-cached", repr(t_cached), cached_calls,
             repr(precompute)]
        )
        rows.append([n, args.batch, args.reps, "vmixup", repr(t_vmix), vmix_calls, ""])
        print(
            f"n={n}: direct {t_direct * 1e3:.3f} ms/mix, cached {t_cached * 1e3:.3f} "
            f"ms/mix (speedup {t_direct / t_cached:.2f}x), vmixup "
            f"{t_vmix * 1e3:.3f} ms/mix",
            file=sys.stderr,
        )
    _emit_csv(header, rows, args.output)
    return 0


# ----------------------------------------------------------------------
# parser plumbing


def _build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="spdmix",
        description="Geodesic mixup and diagnostics for SPD matrix datasets.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    def sub(name: str, help_text: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key=value defaults file")
        registry[name] = p
        return p

    p = sub("gen", "generate synthetic datasets or series")
    p.add_argument("--kind", required=True, choices=["log-linear", "clustered", "spd", "series"])
    p.add_argument("--n", type=int, required=True, help="matrix dimension / variable count")
    p.add_argument("--count", type=int, default=1, help="samples (or series files)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=int, default=None, help="series length (kind=series)")
    p.add_argument("--latent-rank", type=int, default=None, help="latent signals (kind=series)")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--condition", type=float, default=100.0, help="condition target (kind=spd)")
    p.add_argument("--classes", type=int, default=2, help="class count (kind=clustered)")
    p.add_argument("--separation", type=float, default=3.0, help="class gap (kind=clustered)")
    p.add_argument("--series-layout", default="vars-as-rows",
                   choices=["vars-as-rows", "vars-as-cols"])
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub("mix", "augment a dataset with one strategy")
    p.add_argument("--input", required=True)
    p.add_argument("--strategy", required=True, choices=list(augment.STRATEGIES))
    p.add_argument("--alpha", type=float, default=1.0, help="Beta shape for the mix ratio")
    p.add_argument("--keep-prob", type=float, default=0.9)
    p.add_argument("--bandwidth", type=float, default=None, help="label kernel width (cmixup)")
    p.add_argument("--count", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache", choices=["on", "off"], default="off",
                   help="use the precomputed eigendecomposition fast path")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub("diagnose", "eigenvalue positivity reports for series or matrices")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--format", choices=["auto", "spdb", "series"], default="auto")
    p.add_argument("--series-layout", default="vars-as-rows",
                   choices=["vars-as-rows", "vars-as-cols"])
    p.add_argument("--t", type=int, default=None, help="series length behind SPDB input")
    p.add_argument("--sweep", default=None, help="comma-separated target lengths")
    p.add_argument("--reduce", choices=["truncate", "average"], default="truncate")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub("regress", "geodesic-vs-line regression comparison harness")
    p.add_argument("--input", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=None,
                   help="kernel bandwidth; default 8x each pair's distance")
    p.add_argument("--lambdas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_regress)

    p = sub("probe", "incorrect-label probe on a regression dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probe)

    p = sub("bench", "time direct vs cached geodesic mixing")
    p.add_argument("--n", default="8,50,120,360", help="comma-separated dimensions")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_bench)

    return parser, registry


def _coerce(action: argparse.Action, text: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return isinstance(action, argparse._StoreTrueAction)
        if low in ("0", "false", "no", "off"):
            return isinstance(action, argparse._StoreFalseAction)
        raise _UsageError(f"config key {action.dest}: cannot parse boolean {text!r}")
    if action.type is not None:
        try:
            return action.type(text)
        except (TypeError, ValueError) as exc:
            raise _UsageError(f"config key {action.dest}: {exc}")
    return text


def _load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _UsageError(f"config line is not key=value: {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def main(argv=None) -> int:
    parser, registry = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            overrides = _load_config(args.config)
            sub = registry[args.command]
            actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
            for key, text in overrides.items():
                if key not in actions:
                    raise _UsageError(f"unknown config key {key!r}")
                sub.set_defaults(**{key: _coerce(actions[key], text)})
            args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        code = exc.code if exc.code is not None else 0
        return code if isinstance(code, int) else 2
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpdbFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
