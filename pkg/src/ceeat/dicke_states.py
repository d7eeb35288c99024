"""Spin Dicke states |N, l, m> and HO collective-mode states |N, R, d>.

Spin labels use the shifted convention: l = l' + N/2 and m = m' + N/2,
where l'(l'+1) is the J^2 eigenvalue and m' the Jz eigenvalue. So l runs
from N/2 to N, m counts excitations, and l = N is the symmetric (bright)
ladder.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .fockspace import (
    HO,
    SPIN,
    BasisSector,
    StateVector,
    collective_op,
    enumerate_sector,
    total_spin_squared,
)


class NoSuchMultiplet(ValueError):
    pass


class TruncationOverflow(ValueError):
    pass


@dataclass(frozen=True)
class SpinDickeLabel:
    n_sites: int
    ladder: int
    excitations: int

    def __post_init__(self):
        N, l, m = self.n_sites, self.ladder, self.excitations
        if N < 1:
            raise ValueError(f"n_sites must be >= 1, got {N}")
        if not (2 * l >= N and l <= N):
            raise NoSuchMultiplet(f"ladder l={l} outside N/2 <= l <= N for N={N}")
        if not (N - l <= m <= l):
            raise NoSuchMultiplet(f"excitations m={m} outside N-l <= m <= l (N={N}, l={l})")

    @property
    def total_spin(self) -> float:
        """l' in J^2 = l'(l'+1)."""
        return self.ladder - self.n_sites / 2

    @property
    def multiplicity(self) -> int:
        return spin_multiplicity(self.n_sites, self.ladder)


@dataclass(frozen=True)
class HODickeLabel:
    n_sites: int
    bright: int
    dark: tuple[int, ...] = ()

    def __post_init__(self):
        dark = tuple(int(d) for d in self.dark) or (0,) * (self.n_sites - 1)
        object.__setattr__(self, "dark", dark)
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be >= 1, got {self.n_sites}")
        if len(dark) != self.n_sites - 1:
            raise ValueError(f"need {self.n_sites - 1} dark occupations, got {len(dark)}")
        if self.bright < 0 or any(d < 0 for d in dark):
            raise ValueError("occupations must be non-negative")

    @property
    def excitations(self) -> int:
        return self.bright + sum(self.dark)


def spin_multiplicity(n_sites: int, ladder: int) -> int:
    """Number of independent multiplets with the given l."""
    k = n_sites - ladder
    return comb(n_sites, k) - (comb(n_sites, k - 1) if k > 0 else 0)


def valid_spin_labels(n_sites: int):
    """Every (label, degeneracy index) pair for ``n_sites`` spins."""
    for l in range((n_sites + 1) // 2, n_sites + 1):
        if 2 * l < n_sites:
            continue
        for m in range(n_sites - l, l + 1):
            label = SpinDickeLabel(n_sites, l, m)
            for idx in range(label.multiplicity):
                yield label, idx


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the first nonzero amplitude is real and positive."""
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size == 0:
        return v
    a = v[nz[0]]
    return v * (abs(a) / a)


@lru_cache(maxsize=None)
def _multiplet_basis(n_sites: int, ladder: int, m: int) -> np.ndarray:
    """Orthonormal basis (columns) of the J^2 eigenspace with given l in sector m.

    Projects sector basis vectors onto the eigenspace in configuration order
    and Gram-Schmidts the survivors, which fixes the basis independently of
    the eigensolver's rotation inside the degenerate space.
    """
    sector = enumerate_sector(SPIN, n_sites, m)
    j2 = total_spin_squared(sector).toarray()
    w, U = np.linalg.eigh(j2)
    s = ladder - n_sites / 2
    target = s * (s + 1)
    cols = U[:, np.abs(w - target) < 1e-8]
    expected = spin_multiplicity(n_sites, ladder)
    if cols.shape[1] != expected:
        raise NoSuchMultiplet(
            f"found {cols.shape[1]} states with l={ladder} in sector m={m}, expected {expected}"
        )
    P = cols @ cols.conj().T
    basis: list[np.ndarray] = []
    for i in range(sector.size):
        v = P[:, i].astype(complex)
        for b in basis:
            v = v - np.vdot(b, v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(_fix_phase(v / norm))
        if len(basis) == expected:
            break
    out = np.array(basis).T
    out.setflags(write=False)
    return out


def spin_dicke_state(label: SpinDickeLabel, degeneracy_index: int = 0) -> StateVector:
    """Simultaneous J^2, Jz eigenvector |N, l, m> (member ``degeneracy_index``)."""
    if not 0 <= degeneracy_index < label.multiplicity:
        raise NoSuchMultiplet(
            f"degeneracy index {degeneracy_index} out of range for multiplicity "
            f"{label.multiplicity}"
        )
    sector = enumerate_sector(SPIN, label.n_sites, label.excitations)
    if label.ladder == label.n_sites:
        amps = np.full(sector.size, 1 / np.sqrt(sector.size), dtype=complex)
        return StateVector(sector, amps)
    basis = _multiplet_basis(label.n_sites, label.ladder, label.excitations)
    return StateVector(sector, basis[:, degeneracy_index])


@dataclass(frozen=True, eq=False)
class Multiplet:
    label: SpinDickeLabel
    degeneracy_index: int
    state: StateVector


def spin_multiplet(label: SpinDickeLabel) -> list[Multiplet]:
    return [
        Multiplet(label, i, spin_dicke_state(label, i)) for i in range(label.multiplicity)
    ]


def ho_collective_state(label: HODickeLabel, per_site_cutoff: int | None = None) -> StateVector:
    """(c_N^dag)^R / sqrt(R!) prod_i (c_i^dag)^{d_i} / sqrt(d_i!) |0>."""
    n = label.excitations
    cutoff = max(n, 1) if per_site_cutoff is None else per_site_cutoff
    if cutoff < n:
        raise TruncationOverflow(
            f"per-site cutoff {cutoff} would clip a state with {n} excitations"
        )
    sector = enumerate_sector(HO, label.n_sites, 0, cutoff)
    amps = np.ones(1, dtype=complex)
    modes = list(enumerate(label.dark, start=1)) + [(label.n_sites, label.bright)]
    for k, count in modes:
        for _ in range(count):
            op = collective_op(sector, "c_k_dagger", k)
            amps = op.matrix @ amps
            sector = op.codomain
        amps = amps / np.sqrt(factorial(count))
    return StateVector(sector, _fix_phase(amps))


def participation_ratio(state: StateVector) -> float:
    """(sum_alpha |C_alpha|^4)^-1 over site configurations."""
    p = np.abs(state.amplitudes) ** 2
    p = p / p.sum()
    return float(1.0 / np.sum(p**2))
