"""sliceembed CLI. Exit codes: 0 success, 1 usage error, 2 runtime error."""

from __future__ import annotations

import argparse
import sys

from .export import ExporterConfig, ExportError, export_embeddings


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sliceembed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="write an SSEB v1 embedding file for a manifest")
    p.add_argument("--manifest", required=True, help="slicereduce JSON-Lines manifest")
    p.add_argument("--out", required=True, help="output .sseb path")
    p.add_argument("--source", choices=("final", "pooled"), default="final",
                   help="final: 1000-dim network output (default); pooled: 2048-dim features")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--weights", default="imagenet",
                   help="imagenet (download), random (seeded init), or a .pth path")
    p.add_argument("--seed", type=int, default=0, help="seed for --weights random")
    p.add_argument("--device", default="cpu")
    p.add_argument("--window-center", type=float, help="intensity window center")
    p.add_argument("--window-width", type=float, help="intensity window width")
    p.add_argument("--error-log", help="per-slice failure log path (default: <out>.errors.log)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        config = ExporterConfig(
            manifest=args.manifest,
            out=args.out,
            source=args.source,
            batch_size=args.batch_size,
            weights=args.weights,
            seed=args.seed,
            device=args.device,
            window_center=args.window_center,
            window_width=args.window_width,
            error_log=args.error_log,
        )
    except ExportError as e:
        print(f"sliceembed export: {e}", file=sys.stderr)
        return 1
    try:
        sidecar = export_embeddings(config)
    except (ExportError, OSError) as e:
        print(f"sliceembed export: {e}", file=sys.stderr)
        return 2
    print(f"wrote {sidecar['count']} embeddings (dim {sidecar['dim']}) -> {config.out}")
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
