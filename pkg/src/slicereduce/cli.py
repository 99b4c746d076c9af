"""Command-line front-end: reduce, compare, bench, stats, hash-dump, synth.

Exit codes: 0 success, 1 usage/config error, 2 data/runtime error.
All diagnostics go to stderr; results go to stdout or --out files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, metrics, reducer, synth
from .errors import SliceReduceError
from .ingest import WindowSpec, load_manifest, load_slice_image
from .model import (
    Count,
    Fraction,
    MetricKind,
    MetricSpec,
    Threshold,
    validate_manifest,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_METHODS = {k.value: k for k in MetricKind}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="slicereduce", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _Parser) -> None:
        p.add_argument("--config", help="JSON file supplying any of this command's options")

    def add_window(p: _Parser) -> None:
        p.add_argument("--window-center", type=float, help="intensity window center (HU)")
        p.add_argument("--window-width", type=float, help="intensity window width (HU)")

    p = sub.add_parser("reduce", help="reduce a manifest with one method")
    p.add_argument("--manifest", help="input JSON-Lines manifest")
    p.add_argument("--method", help="every-n | ssim | mi | deepnet | hash")
    p.add_argument("--mode", help="fraction | count | threshold")
    p.add_argument("--value", type=float, help="mode parameter")
    p.add_argument("--out", help="output directory")
    p.add_argument("--bins", type=int, help="mi joint-histogram bins (default 256)")
    p.add_argument("--embeddings", help="SSEB embedding file (required for deepnet)")
    p.add_argument("--threads", type=int, help="worker threads (default: cpu count)")
    add_window(p)
    add_common(p)

    p = sub.add_parser("compare", help="overlap of two or more reduce outputs")
    p.add_argument("runs", nargs="*", help="reduce output directories")
    p.add_argument("--out", help="write JSON report here instead of stdout")
    add_common(p)

    p = sub.add_parser("bench", help="time reduction methods over a manifest")
    p.add_argument("--manifest", help="input JSON-Lines manifest")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--repetitions", type=int, help="repetitions per method (default 3)")
    p.add_argument("--mode", help="fraction | count | threshold (default fraction)")
    p.add_argument("--value", type=float, help="mode parameter (default 0.1)")
    p.add_argument("--bins", type=int, help="mi joint-histogram bins")
    p.add_argument("--embeddings", help="SSEB embedding file for deepnet")
    p.add_argument("--out", help="CSV output path (default stdout)")
    add_window(p)
    add_common(p)

    p = sub.add_parser("stats", help="summary of a reduce output")
    p.add_argument("run", nargs="?", help="reduce output directory")
    p.add_argument("--histogram", action="store_true", help="rescore kept pairs and add a histogram")
    p.add_argument("--hist-bins", type=int, help="histogram bins (default 16)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    add_common(p)

    p = sub.add_parser("hash-dump", help="print per-slice 64-bit hashes")
    p.add_argument("--manifest", help="input JSON-Lines manifest")
    add_window(p)
    add_common(p)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--out", help="output directory")
    p.add_argument("--volumes", type=int, help="number of volumes")
    p.add_argument("--slices", help="slices per volume: N or LO:HI")
    p.add_argument("--size", type=int, help="square slice size in pixels (default 64)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--noise", type=float, help="pixel noise sigma (default 5.0)")
    add_common(p)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Flags win; --config JSON fills unset options; then defaults."""
    values = {k: v for k, v in vars(args).items() if v is not None and v is not False}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("--config must contain a JSON object")
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in vars(args):
                raise UsageError(f"--config key {key!r} is not an option of this command")
            values.setdefault(dest, val)
    return values


def _require(values: dict, *names: str) -> None:
    for name in names:
        if values.get(name) is None:
            raise UsageError(f"missing required option --{name.replace('_', '-')}")


def _window_from(values: dict) -> WindowSpec | None:
    center = values.get("window_center")
    width = values.get("window_width")
    if (center is None) != (width is None):
        raise UsageError("--window-center and --window-width must be given together")
    if center is None:
        return None
    try:
        return WindowSpec(center=float(center), width=float(width))
    except ValueError as e:
        raise UsageError(str(e)) from e


def _mode_from(values: dict, default_mode: str | None = None, default_value: float | None = None):
    mode_name = values.get("mode", default_mode) or default_mode
    value = values.get("value", default_value)
    if value is None:
        value = default_value
    if mode_name is None:
        raise UsageError("missing required option --mode")
    if value is None:
        raise UsageError("missing required option --value")
    try:
        if mode_name == "fraction":
            return Fraction(float(value))
        if mode_name == "count":
            if float(value) != int(float(value)):
                raise UsageError(f"count mode needs an integer value, got {value}")
            return Count(int(float(value)))
        if mode_name == "threshold":
            return Threshold(float(value))
    except SliceReduceError as e:
        raise UsageError(str(e)) from e
    raise UsageError(f"unknown mode {mode_name!r} (expected fraction, count, or threshold)")


def _metric_from(values: dict, mode=None) -> MetricSpec:
    name = values.get("method")
    if name not in _METHODS:
        raise UsageError(f"unknown method {name!r} (expected one of {', '.join(_METHODS)})")
    kind = _METHODS[name]
    try:
        if kind is MetricKind.EVERY_N:
            if not isinstance(mode, Fraction):
                raise UsageError("every-n supports --mode fraction only (stride = round(1/fraction))")
            return MetricSpec(kind, n=max(1, round(1.0 / mode.value)))
        if kind is MetricKind.MI:
            return MetricSpec(kind, bins=values.get("bins"))
        if kind is MetricKind.DEEPNET:
            if not values.get("embeddings"):
                raise UsageError("--method deepnet requires --embeddings")
            return MetricSpec(kind, embeddings_path=str(values["embeddings"]))
        return MetricSpec(kind)
    except SliceReduceError as e:
        raise UsageError(str(e)) from e


# --- subcommands ----------------------------------------------------------


def cmd_reduce(values: dict) -> int:
    _require(values, "manifest", "method", "mode", "value", "out")
    mode = _mode_from(values)
    metric = _metric_from(values, mode)
    window = _window_from(values)
    threads = int(values.get("threads") or os.cpu_count() or 1)
    if threads < 1:
        raise UsageError("--threads must be >= 1")

    entries = load_manifest(values["manifest"])
    volumes = validate_manifest(entries)
    plan = reducer.reduce_dataset(volumes, metric, mode, window=window, threads=threads)
    digest = reducer.manifest_digest(values["manifest"])
    kept = reducer.apply_plan(plan, entries, values["out"], input_digest=digest)
    extra = {"window": {"center": window.center, "width": window.width} if window else None,
             "threads": threads}
    _amend_provenance(Path(values["out"]) / "provenance.json", extra)
    print(
        f"kept {len(kept)} of {len(entries)} slices "
        f"({100.0 * len(kept) / len(entries):.1f}%) -> {Path(values['out']) / 'reduced.jsonl'}"
    )
    return EXIT_OK


def _amend_provenance(path: Path, extra: dict) -> None:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_compare(values: dict) -> int:
    runs = values.get("runs") or []
    if len(runs) < 2:
        raise UsageError("compare needs at least two reduce output directories")
    loaded = []
    for run in runs:
        prov, kept_refs = reducer.plan_from_run_dir(run)
        kept = {(r.volume_id, r.slice_index) for r in kept_refs}
        loaded.append((run, prov, kept))
    digests = {prov.get("input_manifest_digest") for _, prov, _ in loaded}
    if len(digests) > 1:
        print("compare: runs were produced from different input manifests", file=sys.stderr)
        return EXIT_DATA
    reports = []
    for i in range(len(loaded)):
        for j in range(i + 1, len(loaded)):
            run_a, prov_a, kept_a = loaded[i]
            run_b, prov_b, kept_b = loaded[j]
            rep = analysis.overlap_from_kept(
                f"{prov_a['method']['kind']}:{run_a}", kept_a,
                f"{prov_b['method']['kind']}:{run_b}", kept_b,
            )
            reports.append(rep)
    doc = {"reports": reports}
    _emit_json(doc, values.get("out"))
    return EXIT_OK


def cmd_bench(values: dict) -> int:
    _require(values, "manifest", "methods")
    mode = _mode_from(values, default_mode="fraction", default_value=0.1)
    specs = []
    for name in str(values["methods"]).split(","):
        specs.append(_metric_from({**values, "method": name.strip()}, mode))
    window = _window_from(values)
    reps = int(values.get("repetitions") or 3)
    if reps < 1:
        raise UsageError("--repetitions must be >= 1")
    rows = analysis.bench(values["manifest"], specs, reps, mode=mode, window=window)
    out = values.get("out")
    if out:
        analysis.write_bench_csv(rows, out)
    else:
        sys.stdout.write(analysis.bench_csv_text(rows))
    for line in analysis.bench_summary(rows):
        print(
            f"# {line['method']:9s} {line['phase']:12s} "
            f"min {line['min_seconds']:.4f}s  median {line['median_seconds']:.4f}s "
            f"({line['repetitions']} reps)",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_stats(values: dict) -> int:
    run = values.get("run")
    if not run:
        raise UsageError("stats needs a reduce output directory")
    prov, kept_refs = reducer.plan_from_run_dir(run)
    volumes = {}
    for vid, counts in sorted(prov["volumes"].items()):
        total = counts["kept"] + counts["removed"]
        volumes[vid] = {**counts, "total": total, "kept_fraction": counts["kept"] / total}
    totals = prov["totals"]
    doc = {
        "method": prov["method"],
        "mode": prov["mode"],
        "value": prov["value"],
        "volumes": volumes,
        "totals": {**totals, "kept_fraction": totals["kept"] / totals["slices"]},
    }
    if values.get("histogram"):
        doc["kept_pair_score_histogram"] = _kept_histogram(prov, kept_refs, int(values.get("hist_bins") or 16))
    _emit_json(doc, values.get("out"))
    return EXIT_OK


def _kept_histogram(prov: dict, kept_refs, bins: int) -> dict:
    method = prov["method"]
    metric = MetricSpec(
        kind=_METHODS[method["kind"]],
        n=method.get("n"),
        bins=method.get("bins"),
        embeddings_path=method.get("embeddings_path"),
    )
    win = prov.get("window")
    window = WindowSpec(win["center"], win["width"]) if win else None
    scores: list[float] = []
    # kept slices of each volume are re-indexed 0..k-1 for scoring only
    by_volume: dict[str, list] = {}
    for ref in kept_refs:
        by_volume.setdefault(ref.volume_id, []).append(ref)
    for vid in sorted(by_volume):
        refs = sorted(by_volume[vid], key=lambda r: r.slice_index)
        if metric.kind is MetricKind.EVERY_N:
            raise UsageError("--histogram needs a pairwise method run (not every-n)")
        if metric.kind is MetricKind.DEEPNET:
            from .embeddings import load_embeddings, lookup

            table = load_embeddings(metric.embeddings_path)
            items = [lookup(table, r) for r in refs]
            fn = metrics.cosine
        elif metric.kind is MetricKind.HASH:
            items = [metrics.dhash(load_slice_image(r, window)) for r in refs]
            fn = metrics.hamming
        elif metric.kind is MetricKind.SSIM:
            items = [load_slice_image(r, window) for r in refs]
            fn = metrics.ssim
        else:
            items = [load_slice_image(r, window) for r in refs]
            fn = lambda x, y: metrics.nmi(x, y, metric.bins)
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                scores.append(float(fn(items[i], items[j])))
    return analysis.score_histogram(scores, bins)


def cmd_hash_dump(values: dict) -> int:
    _require(values, "manifest")
    window = _window_from(values)
    entries = load_manifest(values["manifest"])
    for ref in entries:
        h = metrics.dhash(load_slice_image(ref, window))
        print(f"{ref.volume_id}\t{ref.slice_index}\t{h:016x}")
    return EXIT_OK


def cmd_synth(values: dict) -> int:
    _require(values, "out", "volumes", "slices")
    slices_spec = str(values["slices"])
    if ":" in slices_spec:
        lo, hi = slices_spec.split(":", 1)
        try:
            slices: int | tuple[int, int] = (int(lo), int(hi))
        except ValueError as e:
            raise UsageError(f"bad --slices range {slices_spec!r}") from e
        if not 1 <= slices[0] <= slices[1]:
            raise UsageError(f"bad --slices range {slices_spec!r}")
    else:
        try:
            slices = int(slices_spec)
        except ValueError as e:
            raise UsageError(f"bad --slices value {slices_spec!r}") from e
        if slices < 1:
            raise UsageError("--slices must be >= 1")
    volumes = int(values["volumes"])
    if volumes < 1:
        raise UsageError("--volumes must be >= 1")
    manifest = synth.generate_corpus(
        values["out"],
        volumes,
        slices,
        size=int(values.get("size") or 64),
        seed=int(values.get("seed") or 0),
        noise=float(values.get("noise") if values.get("noise") is not None else 5.0),
    )
    print(manifest)
    return EXIT_OK


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


_COMMANDS = {
    "reduce": cmd_reduce,
    "compare": cmd_compare,
    "bench": cmd_bench,
    "stats": cmd_stats,
    "hash-dump": cmd_hash_dump,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        values = _merge_config(args)
        return _COMMANDS[args.command](values)
    except UsageError as e:
        print(f"slicereduce {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SliceReduceError, OSError) as e:
        print(f"slicereduce {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
