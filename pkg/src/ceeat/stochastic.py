"""Ornstein-Uhlenbeck site-energy noise, noisy emission and disorder scans.

Noise amplitude ``amplitude`` (Lambda) is the RMS of each site detuning, so
the stationary variance is Lambda**2 and the SDE reads
d delta = -delta/tau_c dt + sqrt(2 Lambda**2 / tau_c) dW.

Every random draw comes from a stream keyed by (base seed, cell, trajectory,
site), so results do not depend on how cells are spread over workers.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import lfilter

from .dicke_states import SpinDickeLabel, spin_dicke_state
from .fockspace import SPIN, emission_operator, enumerate_sector, hopping_matrix

UNITS_HEADER = "# energies in gamma0, times in 1/gamma0\n"


class PropagationError(RuntimeError):
    pass


class DegenerateSpectrumWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OUParams:
    amplitude: float
    correlation_time: float
    dt: float | None = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"amplitude (Lambda) must be >= 0, got {self.amplitude}")
        if not self.correlation_time > 0:
            raise ValueError(f"tau_c must be > 0, got {self.correlation_time}")
        if self.dt is not None:
            if not self.dt > 0:
                raise ValueError(f"dt must be > 0, got {self.dt}")
            if self.dt > self.correlation_time / 10:
                warnings.warn(
                    f"dt={self.dt} exceeds tau_c/10={self.correlation_time / 10}",
                    stacklevel=2,
                )


@dataclass(frozen=True)
class TrajectoryConfig:
    n_trajectories: int = 200
    t_final: float = 1.0
    dt: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")


def site_streams(seed: int, cell: int, index: int, n_sites: int) -> list[np.random.Generator]:
    """Independent generators for each site of one trajectory in one cell."""
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(cell, index, s))))
        for s in range(n_sites)
    ]


def default_dt(coupling: float, amplitude: float, correlation_time: float, t_final: float) -> float:
    """min(tau_c, 1/V, 1/Lambda, t_final) / 20, shrunk to divide t_final evenly."""
    scales = [correlation_time, t_final]
    if coupling > 0:
        scales.append(1.0 / coupling)
    if amplitude > 0:
        scales.append(1.0 / amplitude)
    return _fit_step(min(scales) / 20, t_final)


def _fit_step(dt: float, t_final: float) -> float:
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    return t_final / n_steps


def ou_path(params: OUParams, t_final: float, rng, n_sites: int | None = None) -> np.ndarray:
    """Sample an OU path on the grid 0, dt, ..., t_final for each site.

    ``rng`` is one Generator (shared by all sites, drawn site after site) or
    a sequence with one Generator per site. Returns (n_sites, n_steps + 1).
    Uses the exact transition delta' = delta e^{-dt/tau_c} + Lambda
    sqrt(1 - e^{-2 dt/tau_c}) xi, starting from the stationary law.
    """
    if params.dt is None:
        raise ValueError("OUParams.dt must be set to sample a path")
    if isinstance(rng, np.random.Generator):
        rngs = [rng] * (n_sites or 1)
    else:
        rngs = list(rng)
        if n_sites is not None and n_sites != len(rngs):
            raise ValueError("need one generator per site")
    return _sample_ou(params.amplitude, params.correlation_time, params.dt, t_final, rngs)


def _sample_ou(amplitude, tau_c, dt, t_final, rngs) -> np.ndarray:
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    decay = math.exp(-dt / tau_c)
    kick = amplitude * math.sqrt(-math.expm1(-2 * dt / tau_c))
    out = np.empty((len(rngs), n_steps + 1))
    for s, g in enumerate(rngs):
        x0 = amplitude * g.standard_normal()
        xi = g.standard_normal(n_steps)
        out[s, 0] = x0
        out[s, 1:] = lfilter([kick], [1.0, -decay], xi, zi=[decay * x0])[0]
    return out


def stationary_autocorrelation(params: OUParams, lag: float) -> float:
    return params.amplitude**2 * math.exp(-abs(lag) / params.correlation_time)


# --------------------------------------------------------------------------- #
#                              noisy emission                                 #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class NoisyEmission:
    mean: float
    stderr: float
    samples: np.ndarray
    dt: float
    n_steps: int


def _all_to_all(n_sites: int, coupling: float) -> np.ndarray:
    return coupling * (np.ones((n_sites, n_sites)) - np.eye(n_sites))


def _propagate_batch(psi, hv, occ, paths, dt, emission):
    """Evolve a batch of states under hv + diag(occ @ delta_k), delta frozen per step.

    psi: (T, D); paths: (T, N, n_steps + 1). Returns <emission>(t) as (T, n_steps + 1).
    """
    T, D = psi.shape
    n_steps = paths.shape[2] - 1
    e = np.empty((T, n_steps + 1))
    e[:, 0] = np.einsum("ti,ij,tj->t", psi.conj(), emission, psi).real
    diag = np.arange(D)
    static = not np.any(paths)
    if static:
        w, U = np.linalg.eigh(hv)
        step = (U * np.exp(-1j * w * dt)) @ U.conj().T
    for k in range(n_steps):
        if static:
            psi = psi @ step.T
        else:
            H = np.broadcast_to(hv, (T, D, D)).copy()
            H[:, diag, diag] += paths[:, :, k] @ occ.T
            w, U = np.linalg.eigh(H)
            c = np.einsum("tji,tj->ti", U.conj(), psi) * np.exp(-1j * w * dt)
            psi = np.einsum("tij,tj->ti", U, c)
        e[:, k + 1] = np.einsum("ti,ij,tj->t", psi.conj(), emission, psi).real
    drift = np.max(np.abs(np.linalg.norm(psi, axis=1) - 1.0))
    if drift > 1e-8:
        raise PropagationError(f"norm drift {drift:.2e} exceeds 1e-8")
    return e


def simulate_noisy_emission(
    n_sites: int,
    initial: SpinDickeLabel,
    coupling: float,
    ou: OUParams,
    cfg: TrajectoryConfig,
    degeneracy_index: int = 0,
    cell: int = 0,
    chunk: int = 100,
) -> NoisyEmission:
    """Ensemble-averaged, time-averaged <J+J-> under OU site noise.

    Each trajectory starts in the given Dicke state and evolves under
    sum_i delta_i(t) n_i + V sum_{i<j} (hop + h.c.) with no decay back-action.
    """
    if initial.n_sites != n_sites:
        raise ValueError("initial label and n_sites disagree")
    if coupling < 0:
        raise ValueError("coupling must be >= 0")
    state = spin_dicke_state(initial, degeneracy_index)
    sector = state.sector
    dt = cfg.dt or ou.dt or default_dt(coupling, ou.amplitude, ou.correlation_time, cfg.t_final)
    dt = _fit_step(dt, cfg.t_final)
    n_steps = round(cfg.t_final / dt)

    hv = hopping_matrix(sector, _all_to_all(n_sites, coupling)).astype(complex)
    occ = sector.occupations.astype(float)
    emission = emission_operator(sector).toarray()

    averages = np.empty(cfg.n_trajectories)
    for start in range(0, cfg.n_trajectories, chunk):
        stop = min(start + chunk, cfg.n_trajectories)
        paths = np.stack(
            [
                _sample_ou(ou.amplitude, ou.correlation_time, dt, cfg.t_final,
                           site_streams(cfg.seed, cell, t, n_sites))
                for t in range(start, stop)
            ]
        )
        psi = np.tile(state.amplitudes, (stop - start, 1))
        e = _propagate_batch(psi, hv, occ, paths, dt, emission)
        averages[start:stop] = trapezoid(e, dx=dt, axis=1) / cfg.t_final
    n = averages.size
    stderr = float(averages.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return NoisyEmission(float(averages.mean()), stderr, averages, dt, n_steps)


# --------------------------------------------------------------------------- #
#                                 sweeps                                      #
# --------------------------------------------------------------------------- #

@dataclass(eq=False)
class SweepResult:
    axis1_name: str
    axis1: np.ndarray
    axis2_name: str
    axis2: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    count_name: str = "n_traj"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.axis1), len(self.axis2))
        for name in ("mean", "stderr", "counts"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} grid does not match axes {shape}")
        if np.any(np.asarray(self.stderr) < 0):
            raise ValueError("standard errors must be non-negative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(UNITS_HEADER)
            w = csv.writer(fh)
            w.writerow([self.axis1_name, self.axis2_name, "mean", "stderr", self.count_name])
            for i, a in enumerate(self.axis1):
                for j, b in enumerate(self.axis2):
                    w.writerow(
                        [repr(float(a)), repr(float(b)), repr(float(self.mean[i, j])),
                         repr(float(self.stderr[i, j])), int(self.counts[i, j])]
                    )

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True)


def _run_cells(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _noise_cell(n_sites, m, coupling, amplitude, tau_c, cfg, cell):
    label = SpinDickeLabel(n_sites, n_sites, m)
    r = simulate_noisy_emission(n_sites, label, coupling, OUParams(amplitude, tau_c), cfg, cell=cell)
    return r.mean, r.stderr, r.samples.size, r.dt


NOISE_MODES = ("lambda", "inv_tau")


def noise_sweep(
    mode: str,
    coupling_grid: Sequence[float],
    noise_grid: Sequence[float],
    cfg: TrajectoryConfig,
    n_sites: int = 4,
    excitations: int | None = None,
    tau_c: float = 0.33,
    amplitude: float = 5.0,
    workers: int = 1,
) -> SweepResult:
    """Grid of noisy-emission enhancements over (V_dd, noise parameter).

    mode ``lambda``: second axis is Lambda at fixed ``tau_c``.
    mode ``inv_tau``: second axis is 1/tau_c at fixed ``amplitude``.
    """
    if mode not in NOISE_MODES:
        raise ValueError(f"mode must be one of {NOISE_MODES}, got {mode!r}")
    if len(coupling_grid) == 0 or len(noise_grid) == 0:
        raise ValueError("grids must be non-empty")
    m = n_sites // 2 if excitations is None else excitations
    tasks = []
    for i, v in enumerate(coupling_grid):
        for j, x in enumerate(noise_grid):
            lam, tc = (x, tau_c) if mode == "lambda" else (amplitude, 1.0 / x)
            tasks.append((n_sites, m, float(v), float(lam), float(tc), cfg, i * len(noise_grid) + j))
    results = _run_cells(_noise_cell, tasks, workers)
    shape = (len(coupling_grid), len(noise_grid))
    mean = np.array([r[0] for r in results]).reshape(shape)
    stderr = np.array([r[1] for r in results]).reshape(shape)
    counts = np.array([r[2] for r in results]).reshape(shape)
    fixed = {"tau_c": tau_c} if mode == "lambda" else {"Lambda": amplitude}
    metadata = {
        "experiment": "noise-sweep",
        "mode": mode,
        "n_sites": n_sites,
        "excitations": m,
        "initial_state": [n_sites, n_sites, m],
        "fixed": fixed,
        "seed": cfg.seed,
        "n_trajectories": cfg.n_trajectories,
        "t_final": cfg.t_final,
        "dt": [[r[3] for r in results[i * shape[1] : (i + 1) * shape[1]]] for i in range(shape[0])],
        "lambda_convention": "RMS amplitude of site detunings",
    }
    return SweepResult(
        "V_dd", np.asarray(coupling_grid, float),
        "Lambda" if mode == "lambda" else "inv_tau_c", np.asarray(noise_grid, float),
        mean, stderr, counts, "n_traj", metadata,
    )


EIGENSTATE_SELECTIONS = ("bright", "all")


def _pr_cell(n_sites, m, coupling, amplitude, n_realizations, seed, cell, eigenstates):
    sector = enumerate_sector(SPIN, n_sites, m)
    hv = hopping_matrix(sector, _all_to_all(n_sites, coupling))
    occ = sector.occupations.astype(float)
    emission = emission_operator(sector).toarray().real
    delta = np.array(
        [[g.standard_normal() for g in site_streams(seed, cell, r, n_sites)] for r in range(n_realizations)]
    ) * amplitude
    H = np.broadcast_to(hv, (n_realizations,) + hv.shape).copy()
    idx = np.arange(sector.size)
    H[:, idx, idx] += delta @ occ.T
    _, U = np.linalg.eigh(H)
    weights = np.abs(U) ** 2
    pr = 1.0 / np.sum(weights**2, axis=1)  # (R, n_eigenstates)
    if eigenstates == "all":
        per_real = pr.mean(axis=1)
    else:
        emit = np.einsum("rij,ik,rkj->rj", U.conj(), emission, U).real
        per_real = pr[np.arange(n_realizations), np.argmax(emit, axis=1)]
    n = per_real.size
    stderr = float(per_real.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(per_real.mean()), stderr, n


def disorder_pr_scan(
    n_sites: int,
    n_excitations: int,
    coupling_grid: Sequence[float],
    amplitude_grid: Sequence[float],
    n_realizations: int,
    seed: int = 0,
    eigenstates: str = "bright",
    workers: int = 1,
    zero_disorder: float = 1e-8,
) -> SweepResult:
    """Mean participation ratio of eigenstates under static Gaussian site disorder.

    Detunings are drawn from the stationary OU law (RMS ``Lambda``). With
    ``eigenstates="bright"`` each realization contributes the PR of its most
    strongly emitting eigenstate; ``"all"`` averages over every eigenstate
    in the sector. Lambda = 0 is replaced by ``zero_disorder`` so the
    eigenbasis is well defined.
    """
    if eigenstates not in EIGENSTATE_SELECTIONS:
        raise ValueError(f"eigenstates must be one of {EIGENSTATE_SELECTIONS}")
    if len(coupling_grid) == 0 or len(amplitude_grid) == 0:
        raise ValueError("grids must be non-empty")
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    if any(a < 0 for a in amplitude_grid):
        raise ValueError("Lambda values must be >= 0")
    if any(a == 0 for a in amplitude_grid):
        warnings.warn(
            f"Lambda=0 has a degenerate spectrum; using Lambda={zero_disorder} instead",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    tasks = []
    for i, v in enumerate(coupling_grid):
        for j, lam in enumerate(amplitude_grid):
            lam_eff = float(lam) if lam > 0 else zero_disorder
            cell = i * len(amplitude_grid) + j
            tasks.append((n_sites, n_excitations, float(v), lam_eff, n_realizations, seed, cell, eigenstates))
    results = _run_cells(_pr_cell, tasks, workers)
    shape = (len(coupling_grid), len(amplitude_grid))
    mean = np.array([r[0] for r in results]).reshape(shape)
    stderr = np.array([r[1] for r in results]).reshape(shape)
    counts = np.array([r[2] for r in results]).reshape(shape)
    metadata = {
        "experiment": "disorder-pr",
        "n_sites": n_sites,
        "excitations": n_excitations,
        "eigenstates": eigenstates,
        "seed": seed,
        "n_realizations": n_realizations,
        "zero_disorder": zero_disorder,
        "pr_bounds": [1, comb(n_sites, n_excitations)],
        "lambda_convention": "RMS amplitude of site detunings",
    }
    return SweepResult(
        "V_dd", np.asarray(coupling_grid, float), "Lambda", np.asarray(amplitude_grid, float),
        mean, stderr, counts, "n_realizations", metadata,
    )
