"""Closed-form vs golden-rule enhancements for every Dicke state in range."""
import csv
import sys

from _run import run

OUT = "results/table1"

if __name__ == "__main__":
    code = run("table1", "table1.ini", OUT)
    if code == 0:
        with open(f"{OUT}/table1.csv") as fh:
            rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
        worst = max(float(r["abs_diff"]) for r in rows)
        print(f"{len(rows)} rows, largest |closed form - oracle| = {worst:.2e}")
    sys.exit(code)
