"""Small strong-scaling benchmark demo.

Runs both CLIs on a modest 3D grid and prints where the reports landed.
Usage: python3 scripts/run_bench_demo.py [out_dir]
"""

import sys
from pathlib import Path

from unifft.cli import main_analysis, main_bench


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("bench_demo")
    bench_dir = out / "raw"
    rc = main_bench([
        "--dims", "32x32x32",
        "--kind", "slab",
        "--np", "1", "--np", "2", "--np", "4",
        "--iterations", "5", "--repeats", "3",
        "--out", str(bench_dir),
        "--formats", "json,csv",
    ])
    if rc != 0:
        return rc

    analysis_dir = out / "analysis"
    rc = main_analysis([
        "--in", str(bench_dir),
        "--out", str(analysis_dir),
        "--formats", "json,csv,svg",
    ])
    if rc != 0:
        return rc

    print(f"raw records:  {bench_dir / 'report.json'}")
    for path in sorted(analysis_dir.iterdir()):
        print(f"analysis out: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
