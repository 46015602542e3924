"""Rewrite the regression baselines from configs/reference.ini.

Run from the repository root after an intentional numerical change:

    python3 tests/baselines/regenerate.py
"""

import shutil
import sys
from pathlib import Path

from magbloch.cli import main

ROOT = Path(__file__).resolve().parents[2]
OUT = Path(__file__).resolve().parent / "reference"

if __name__ == "__main__":
    shutil.rmtree(OUT, ignore_errors=True)
    config = str(ROOT / "configs" / "reference.ini")
    for command in ("thomas", "verify"):
        code = main([command, "--config", config, "--out", str(OUT)])
        if code != 0:
            sys.exit(f"{command} exited with {code}")
