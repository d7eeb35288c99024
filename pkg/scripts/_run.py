"""Shared helper: run one experiment from its example config and print the data files."""
from pathlib import Path
import sys

from ceeat.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(experiment: str, config: str, out: str, extra: list[str] | None = None) -> int:
    argv = [experiment, "--config", str(CONFIGS / config), "--out", out] + (extra or [])
    return main(argv + sys.argv[1:])
