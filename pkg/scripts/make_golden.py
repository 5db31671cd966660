#!/usr/bin/env python3
"""Regenerate the committed golden benchmark report.

Runs the pinned benchmark config end to end (detection + segmentation) and
writes golden/benchmark_report.json. The regression suite compares fresh runs
against this file with a 1e-9 numeric tolerance (timing fields are ignored).
"""

import argparse
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from archseg.pipeline import load_config, run_dataset  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=ROOT / "configs" / "benchmark.json")
    parser.add_argument("--out", default=ROOT / "golden" / "benchmark_report.json")
    parser.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    args = parser.parse_args()

    config = load_config(args.config)
    report = run_dataset(config, jobs=args.jobs)
    if report.failures:
        for f in report.failures:
            print(f"model {f['model']} FAILED:\n{f['error']}", file=sys.stderr)
        return 1
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    report.save(args.out)
    print(f"wrote {args.out}")
    print("aggregate:", {k: round(v, 6) for k, v in report.aggregate.items()})
    return 0


if __name__ == "__main__":
    sys.exit(main())
