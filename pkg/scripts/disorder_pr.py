"""Participation ratio of the brightest eigenstate under static disorder."""
import sys

from _run import run

if __name__ == "__main__":
    sys.exit(run("disorder-pr", "disorder_pr.ini", "results/disorder_pr"))
