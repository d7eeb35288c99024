"""Rate-equation cascades down the bright Dicke ladder.

Populations p_m obey dp_m/dt = g_{m+1} p_{m+1} - g_m p_m with per-step
rates g_m in units of gamma0 and time in units of 1/gamma0. The emitted
rate is gamma(t) = sum_m g_m p_m(t).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .fockspace import HO, SPIN


class IntegrationFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LadderSpec:
    kind: str
    n_sites: int
    max_level: int
    rates: np.ndarray  # rates[m - 1] is the rate out of level m, m = 1..max_level

    @property
    def level_rates(self) -> np.ndarray:
        """Rates indexed by level 0..max_level (level 0 does not emit)."""
        return np.concatenate([[0.0], self.rates])


def ladder_rates(kind: str, n_sites: int, max_level: int | None = None) -> LadderSpec:
    """Per-step emission rates: m(N-m+1) on the spin l=N ladder, N*R for HOs."""
    if n_sites < 1:
        raise ValueError(f"n_sites must be >= 1, got {n_sites}")
    if kind == SPIN:
        top = n_sites if max_level is None else max_level
        if not 0 <= top <= n_sites:
            raise ValueError(f"spin ladder has levels 0..{n_sites}, got max_level={top}")
        m = np.arange(1, top + 1)
        rates = m * (n_sites - m + 1)
    elif kind == HO:
        if max_level is None or max_level < 0:
            raise ValueError("an HO ladder needs an explicit max_level >= 0")
        top = max_level
        rates = n_sites * np.arange(1, top + 1)
    else:
        raise ValueError(f"kind must be spin or ho, got {kind!r}")
    return LadderSpec(kind, n_sites, top, rates.astype(float))


@dataclass(frozen=True, eq=False)
class PopulationTrajectory:
    spec: LadderSpec
    times: np.ndarray
    populations: np.ndarray  # (n_times, max_level + 1)
    gamma: np.ndarray

    def mean_level(self) -> np.ndarray:
        return self.populations @ np.arange(self.spec.max_level + 1)

    def to_csv(self, path) -> None:
        n = self.spec.max_level + 1
        with open(path, "w", newline="") as fh:
            fh.write("# energies in gamma0, times in 1/gamma0\n")
            w = csv.writer(fh)
            w.writerow(["t", "gamma_over_gamma0"] + [f"p_{k}" for k in range(n)])
            for t, g, p in zip(self.times, self.gamma, self.populations):
                w.writerow([repr(float(t)), repr(float(g))] + [repr(float(x)) for x in p])


def rate_matrix(spec: LadderSpec) -> np.ndarray:
    g = spec.level_rates
    M = -np.diag(g)
    M[np.arange(spec.max_level), np.arange(1, spec.max_level + 1)] = g[1:]
    return M


def evolve_cascade(
    spec: LadderSpec, initial_level: int, t_final: float, n_steps: int = 1000
) -> PopulationTrajectory:
    """Integrate the ladder populations from a single occupied level."""
    if not 0 <= initial_level <= spec.max_level:
        raise ValueError(f"initial level {initial_level} outside 0..{spec.max_level}")
    if t_final <= 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    M = rate_matrix(spec)
    p0 = np.zeros(spec.max_level + 1)
    p0[initial_level] = 1.0
    times = np.linspace(0.0, t_final, n_steps + 1)
    sol = solve_ivp(
        lambda t, p: M @ p,
        (0.0, t_final),
        p0,
        method="DOP853",
        t_eval=times,
        rtol=1e-10,
        atol=1e-10,
    )
    if not sol.success:
        raise IntegrationFailure(sol.message)
    pops = sol.y.T
    drift = np.max(np.abs(pops.sum(axis=1) - 1.0))
    if drift > 1e-8:
        raise IntegrationFailure(f"probability drift {drift:.2e} exceeds 1e-8")
    gamma = pops @ spec.level_rates
    return PopulationTrajectory(spec, times, pops, gamma)


def peak_time(traj: PopulationTrajectory, rtol: float = 1e-9) -> float | None:
    """Time of the rate maximum if it lies after t = 0, else None."""
    g = traj.gamma
    if g.size == 0:
        raise ValueError("empty trajectory")
    k = int(np.argmax(g))
    if k == 0 or g[k] <= g[0] * (1 + rtol):
        return None
    return float(traj.times[k])
