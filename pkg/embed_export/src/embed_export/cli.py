"""CLI: embed-export --input <igt> --model <id> --out <file> --max-len 512"""

import argparse
import logging
import sys

from .export import ExportJob, ModelLoadError, TokenizationMismatch, export


def main(argv=None):
    ap = argparse.ArgumentParser(prog="embed-export", description=__doc__)
    ap.add_argument("--input", required=True, help="IGT corpus file")
    ap.add_argument("--model", required=True, help="model identifier or local path")
    ap.add_argument("--out", required=True, help="output TransEmb-v1 file")
    ap.add_argument("--max-len", type=int, default=512)
    ap.add_argument("--lang", default="default")
    ap.add_argument("--batch-size", type=int, default=8)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    job = ExportJob(input_path=args.input, model_id=args.model,
                    output_path=args.out, max_length=args.max_len,
                    lang=args.lang, batch_size=args.batch_size)
    try:
        n = export(job)
    except (ModelLoadError, TokenizationMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    print(f"wrote {n} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
