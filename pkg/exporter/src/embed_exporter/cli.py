"""Command-line entry point: one ``export`` command."""

from __future__ import annotations

import argparse
import sys

from .export import AlignmentPolicy, ExportJob, LayerPolicy, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-exporter",
        description="Export a frozen contextual-embedding archive from a pretrained model.",
    )
    parser.add_argument("--corpus", required=True, help="corpus file (.tsv, .cupt, or plain text)")
    parser.add_argument("--model", required=True, help="model identifier (hash3:... or hf:...)")
    parser.add_argument("--out", required=True, help="archive output path")
    parser.add_argument(
        "--layer-policy",
        choices=[p.value for p in LayerPolicy],
        default=LayerPolicy.AVERAGE_ALL.value,
    )
    parser.add_argument(
        "--alignment-policy",
        choices=[p.value for p in AlignmentPolicy],
        default=AlignmentPolicy.FIRST_SUBTOKEN.value,
    )
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus_path=args.corpus,
        model_id=args.model,
        out_path=args.out,
        layer_policy=LayerPolicy(args.layer_policy),
        alignment_policy=AlignmentPolicy(args.alignment_policy),
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        manifest = export(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {manifest['archive']}: {manifest['sentences']} sentences, "
        f"dim {manifest['dim']}, {len(manifest['truncated'])} truncated, "
        f"{len(manifest['zero_vector_words'])} zero-vector words"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
