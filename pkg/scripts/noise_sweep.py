"""Enhancement of the half-filled N=4 Dicke state under OU site noise.

Extra arguments go to the CLI, e.g. ``--workers 0`` to use every CPU;
results do not depend on the worker count.
"""
import sys

from _run import run

if __name__ == "__main__":
    code = run("noise-sweep", "noise_lambda.ini", "results/noise_lambda")
    code = code or run("noise-sweep", "noise_inv_tau.ini", "results/noise_inv_tau")
    sys.exit(code)
