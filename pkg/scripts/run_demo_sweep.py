#!/usr/bin/env python3
"""End-to-end demo: build demo data if needed, run the full encoder x decoder
strategy sweep at a small model size, and print the ranked table.

Usage: python3 scripts/run_demo_sweep.py [--outdir demo_out] [--epochs 3]
"""

import argparse
import os
import subprocess
import sys

from canoseg.experiment import ExperimentSpec, run_sweep, sweep_table_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="demo_data")
    ap.add_argument("--outdir", default="demo_out")
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--limit", type=int, default=30)
    ap.add_argument("--stage2-top", type=int, default=2)
    args = ap.parse_args()

    if not os.path.exists(os.path.join(args.data, "corpus.igt")):
        subprocess.check_call([sys.executable,
                               os.path.join(os.path.dirname(__file__), "make_demo_data.py"),
                               "--outdir", args.data])

    spec = ExperimentSpec(
        igt_path=os.path.join(args.data, "corpus.igt"),
        embeddings_path=os.path.join(args.data, "trans.emb"),
        alignments_path=os.path.join(args.data, "align.pharaoh"),
        limits=[args.limit],
        model_overrides={"emb": 8, "hid": 16, "dropout": 0.0},
        train_overrides={"max_epochs": args.epochs, "batch_size": 16, "lr": 2e-3},
        outdir=args.outdir)
    stage1, stage2 = run_sweep(spec, stage2_top=args.stage2_top)
    print("stage 1: incorporation strategies (dev accuracy)")
    print(sweep_table_text(stage1))
    print("stage 2: CLS strategies over the leaders")
    print(sweep_table_text(stage2))
    print(f"reports under {args.outdir}/")


if __name__ == "__main__":
    main()
