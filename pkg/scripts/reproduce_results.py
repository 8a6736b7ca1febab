#!/usr/bin/env python3
"""Run the three bundled experiment configs and drop CSV + SVG under out/.

The activation/aggregation sweep takes a few minutes; leakage and matmul run
in well under a minute each.
"""

import pathlib
import sys

from pbacc.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
OUT = ROOT / "out"


def run():
    jobs = sys.argv[1] if len(sys.argv) > 1 else "1"
    for command, config in (
        ("leakage", "leakage.json"),
        ("leakage", "leakage-operating-point.json"),
        ("matmul", "matmul.json"),
        ("run", "activations.json"),
    ):
        out_dir = OUT / pathlib.Path(config).stem
        print(f"== pbacc {command} --config {config} -> {out_dir}")
        code = main(
            [
                command,
                "--config",
                str(CONFIGS / config),
                "--out",
                str(out_dir),
                "--jobs",
                jobs,
                "--plot",
            ]
        )
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
