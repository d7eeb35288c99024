"""Emission rate of N=4 anharmonic oscillators with two quanta as U grows."""
import csv
import sys

from _run import run

if __name__ == "__main__":
    code = run("anharmonic", "anharmonic.ini", "results/anharmonic")
    if code == 0:
        with open("results/anharmonic/anharmonic.csv") as fh:
            for row in csv.DictReader(line for line in fh if not line.startswith("#")):
                print(f"U/V = {float(row['U_over_V']):>8g}   gamma/gamma0 = {float(row['gamma_over_gamma0']):.4f}")
    sys.exit(code)
