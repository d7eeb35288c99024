"""Cascade down the symmetric ladder for N = 8 spins and N = 8 oscillators."""
import sys

import numpy as np

from _run import run
from ceeat.cascade import evolve_cascade, ladder_rates, peak_time

if __name__ == "__main__":
    code = run("ladder", "ladder_spin.ini", "results/ladder_spin")
    code = code or run("ladder", "ladder_ho.ini", "results/ladder_ho")
    spec = ladder_rates("spin", 8)
    for m0 in range(1, 9):
        traj = evolve_cascade(spec, m0, 2.0, 2000)
        t = peak_time(traj)
        where = "none" if t is None else f"t = {t:.4f}"
        print(f"spin N=8 m0={m0}: gamma(0) = {traj.gamma[0]:5.1f}, "
              f"max = {np.max(traj.gamma):7.3f}, interior peak {where}")
    sys.exit(code)
