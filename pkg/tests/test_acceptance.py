"""Acceptance gate: one group of tests per criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py`` (or this file directly); the terminal
summary prints one PASS/FAIL line per criterion.
"""
import math
import os
import time

import numpy as np
import pytest

from ceeat.cascade import evolve_cascade, ladder_rates, peak_time
from ceeat.cli import four_site_examples, main
from ceeat.dicke_states import SpinDickeLabel, valid_spin_labels
from ceeat.fockspace import HO, SPIN
from ceeat.rates import FIELD, UNBOUNDED, anharmonic_sr_rate, max_enhancement, table1_rows
from ceeat.stochastic import (
    OUParams,
    TrajectoryConfig,
    disorder_pr_scan,
    noise_sweep,
    ou_path,
    simulate_noisy_emission,
    stationary_autocorrelation,
)

acceptance = pytest.mark.acceptance


@acceptance(1, "four-site regression (4, 6, 0) within 1e-12, < 1 s")
def test_four_site_regression():
    start = time.perf_counter()
    rows = four_site_examples()
    elapsed = time.perf_counter() - start
    for (name, closed, oracle), expected in zip(rows, (4.0, 6.0, 0.0)):
        assert abs(closed - expected) <= 1e-12, name
        assert abs(oracle - expected) <= 1e-12, name
    assert elapsed < 1.0


@acceptance(2, "closed form vs golden-rule oracle within 1e-9 on the full grid, < 1 min")
def test_table_oracle_equivalence():
    start = time.perf_counter()
    rows = list(table1_rows(max_spin_sites=6, max_ho_sites=4, max_bright=4, max_dark=2))
    elapsed = time.perf_counter() - start
    worst = max(r["abs_diff"] for r in rows)
    assert worst < 1e-9
    kinds = {(r["process"], r["donor_kind"], r["acceptor_kind"]) for r in rows}
    for combo in [("SR", SPIN, FIELD), ("SR", HO, FIELD), ("SA", FIELD, SPIN), ("SA", FIELD, HO),
                  ("ST", SPIN, SPIN), ("ST", SPIN, HO), ("ST", HO, SPIN), ("ST", HO, HO)]:
        assert combo in kinds
    # every degeneracy index of every spin label with N <= 6 appears as a donor
    donors = {(r["donor_N"], r["donor_l_or_R"], r["donor_m_or_d"], r["donor_index"])
              for r in rows if r["process"] == "SR" and r["donor_kind"] == SPIN}
    expected = {(lab.n_sites, lab.ladder, lab.excitations, i)
                for N in range(1, 7) for lab, i in valid_spin_labels(N)}
    assert donors >= expected
    assert elapsed < 60


@acceptance(3, "spin SR maxima (N/2)(N/2+1) for even N <= 8, HO unbounded")
@pytest.mark.parametrize("N", [2, 4, 6, 8])
def test_maxima(N):
    assert max_enhancement("SR", (SPIN, FIELD), (N, 1)) == (N / 2) * (N / 2 + 1)
    if N == 4:
        assert max_enhancement("SR", (SPIN, FIELD), (4, 1)) == 6
    assert max_enhancement("SR", (HO, FIELD), (N, 1)) == UNBOUNDED
    assert max_enhancement("SA", (FIELD, HO), (1, N)) == UNBOUNDED
    assert max_enhancement("ST", (HO, HO), (N, N)) == UNBOUNDED


LADDER_T = 2.0
LADDER_STEPS = 2000


@acceptance(4, "ladder dynamics: spin N=8 peak iff m0 > 4; HO <R> = R0 e^-Nt; conservation; < 5 s")
@pytest.mark.parametrize("m0", range(1, 9))
def test_spin_ladder_peak(m0):
    start = time.perf_counter()
    traj = evolve_cascade(ladder_rates(SPIN, 8), m0, LADDER_T, LADDER_STEPS)
    assert np.max(np.abs(traj.populations.sum(axis=1) - 1)) < 1e-8
    has_peak = peak_time(traj) is not None
    if m0 > 4:
        assert has_peak, f"m0={m0}: gamma(t) has no interior maximum"
    else:
        assert not has_peak
        assert np.all(np.diff(traj.gamma) <= 1e-12)
    assert time.perf_counter() - start < 5


@acceptance(4, "ladder dynamics: spin N=8 peak iff m0 > 4; HO <R> = R0 e^-Nt; conservation; < 5 s")
@pytest.mark.parametrize("N", [1, 2, 4, 8])
def test_ho_ladder(N):
    start = time.perf_counter()
    for R0 in range(1, 5):
        traj = evolve_cascade(ladder_rates(HO, N, 4 * R0), R0, LADDER_T, LADDER_STEPS)
        assert np.max(np.abs(traj.populations.sum(axis=1) - 1)) < 1e-8
        assert np.all(np.diff(traj.gamma) <= 1e-12)
        assert peak_time(traj) is None
        assert np.max(np.abs(traj.mean_level() - R0 * np.exp(-N * traj.times))) < 1e-6
    assert time.perf_counter() - start < 5


@acceptance(5, "OU paths: stationary RMS and exponential autocorrelation within 3 sigma, 1e4 paths, < 10 s")
def test_ou_statistics():
    start = time.perf_counter()
    params = OUParams(amplitude=5.0, correlation_time=0.33, dt=0.01)
    n_paths = 10_000
    paths = ou_path(params, 1.0, np.random.default_rng(2024), n_sites=n_paths)
    for k in (0, 50, 100):
        x = paths[:, k]
        var = np.mean(x**2)
        # sample second moment of a zero-mean Gaussian has sd sqrt(2) Lambda^2 / sqrt(n)
        assert abs(var - params.amplitude**2) < 3 * math.sqrt(2) * params.amplitude**2 / math.sqrt(n_paths)
    for lag in (1, 10, 33, 66):
        prod = paths[:, 0] * paths[:, lag]
        expected = stationary_autocorrelation(params, lag * params.dt)
        assert abs(prod.mean() - expected) < 3 * prod.std(ddof=1) / math.sqrt(n_paths)
    assert time.perf_counter() - start < 10


@acceptance(6, "noise-free half-filled N=4 Dicke state stays at enhancement 6 within 1e-8")
@pytest.mark.parametrize("V", [0.0, 0.5, 5.0, 50.0, 100.0])
def test_noise_free_stationarity(V):
    cfg = TrajectoryConfig(n_trajectories=3, t_final=1.0, seed=0)
    r = simulate_noisy_emission(4, SpinDickeLabel(4, 4, 2), V, OUParams(0.0, 0.33), cfg)
    assert abs(r.mean - 6.0) < 1e-8
    assert np.all(np.abs(r.samples - 6.0) < 1e-8)


V_GRID = [0.0, 1.0, 5.0, 10.0, 50.0, 100.0]
LAMBDA_GRID = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0]


@pytest.fixture(scope="module")
def robustness_grid():
    start = time.perf_counter()
    cfg = TrajectoryConfig(n_trajectories=200, t_final=1.0, seed=1)
    result = noise_sweep("lambda", V_GRID, LAMBDA_GRID, cfg, n_sites=4, excitations=2,
                         tau_c=0.33, workers=os.cpu_count() or 1)
    return result, time.perf_counter() - start


@acceptance(7, "robustness grid 6x6, N=4, m0=2, 200 trajectories: (a)-(d), < 10 min")
def test_robustness_protected_by_coupling(robustness_grid):
    res, elapsed = robustness_grid
    j = LAMBDA_GRID.index(5.0)
    for V in (50.0, 100.0):
        assert res.mean[V_GRID.index(V), j] >= 5.4
    assert elapsed < 600


@acceptance(7, "robustness grid 6x6, N=4, m0=2, 200 trajectories: (a)-(d), < 10 min")
def test_robustness_uncoupled_strong_noise(robustness_grid):
    res, _ = robustness_grid
    assert res.mean[0, LAMBDA_GRID.index(5.0)] <= 3


@acceptance(7, "robustness grid 6x6, N=4, m0=2, 200 trajectories: (a)-(d), < 10 min")
def test_robustness_uncoupled_weak_noise(robustness_grid):
    res, _ = robustness_grid
    assert res.mean[0, LAMBDA_GRID.index(0.1)] >= 5


@acceptance(7, "robustness grid 6x6, N=4, m0=2, 200 trajectories: (a)-(d), < 10 min")
def test_robustness_monotone_in_coupling(robustness_grid):
    res, _ = robustness_grid
    for j in range(len(LAMBDA_GRID)):
        for i in range(len(V_GRID) - 1):
            drop = res.mean[i, j] - res.mean[i + 1, j]
            tol = 2 * math.hypot(res.stderr[i, j], res.stderr[i + 1, j])
            assert drop <= tol + 1e-12, (V_GRID[i], LAMBDA_GRID[j])


@acceptance(8, "PR grid N=4, m=2, 100 realizations: >= 5.5 at V/Lambda=100, <= 1.2 at V=0, within [1, 6], < 1 min")
def test_participation_ratio_grid():
    start = time.perf_counter()
    v_grid = [0.0, 0.1, 1.0, 10.0, 100.0]
    lam_grid = [0.01, 0.1, 1.0, 10.0]
    res = disorder_pr_scan(4, 2, v_grid, lam_grid, 100, seed=0)
    elapsed = time.perf_counter() - start
    assert np.all(res.mean >= 1.0) and np.all(res.mean <= 6.0)
    ratio_cells = [(i, j) for i, v in enumerate(v_grid) for j, lam in enumerate(lam_grid)
                   if math.isclose(v / lam, 100.0)]
    assert len(ratio_cells) == 3
    for i, j in ratio_cells:
        assert res.mean[i, j] >= 5.5
    assert np.all(res.mean[0] <= 1.2)
    assert elapsed < 60


@acceptance(9, "anharmonic N=4, n=2: 8 at U=0, within 1% of 6 at U=1e4 V, monotone, < 5 s")
def test_anharmonic_interpolation():
    start = time.perf_counter()
    U = np.concatenate([[0.0], np.logspace(-3, 4, 60)])
    vals = np.array([anharmonic_sr_rate(4, u, 2).value for u in U])
    assert vals[0] == pytest.approx(8.0, abs=1e-10)
    assert abs(vals[-1] - 6.0) <= 0.01 * 6.0
    assert np.all(np.diff(vals) <= 0.0 + 1e-12)
    assert time.perf_counter() - start < 5


def _data_files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "run_manifest.json"}


@acceptance(10, "byte-identical outputs across reruns and worker counts 1 vs max")
@pytest.mark.parametrize(
    "experiment,config",
    [
        ("noise-sweep", "[params]\nv_grid = 0, 5, 50\nnoise_grid = 0.5, 5\nn_traj = 10\n"),
        ("disorder-pr", "[params]\nn_realizations = 20\n"),
        ("ladder", "[params]\nn_steps = 300\n"),
        ("table1", "[params]\nmax_spin_sites = 3\nmax_ho_sites = 2\nmax_bright = 2\nmax_dark = 1\n"),
        ("anharmonic", ""),
        ("example4site", ""),
    ],
)
def test_determinism(tmp_path, experiment, config):
    cfg = tmp_path / "c.ini"
    cfg.write_text(config)
    outputs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "0"), ("d", "2")):
        out = tmp_path / name
        assert main([experiment, "--config", str(cfg), "--seed", "3",
                     "--workers", workers, "--out", str(out)]) == 0
        outputs.append(_data_files(out))
    assert outputs[0]
    assert all(o == outputs[0] for o in outputs[1:])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
