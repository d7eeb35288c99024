"""Fixed-excitation Fock sectors for spin and harmonic-oscillator aggregates.

Every quantity lives in a sector with a fixed number of excitations. Spin
sites hold 0 or 1 excitation; HO sites hold 0..per_site_cutoff. Configurations
are stored as occupation tuples in descending lexicographic order, so the
first configuration of a two-excitation, four-spin sector is ``(1, 1, 0, 0)``.

Energies are in units of gamma0 and the common site energy is removed
(rotating frame), so only detunings and couplings enter a Hamiltonian.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

SPIN = "spin"
HO = "ho"
KINDS = (SPIN, HO)


@dataclass(frozen=True)
class BasisSector:
    kind: str
    n_sites: int
    n_excitations: int
    per_site_cutoff: int
    configs: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.configs)

    @cached_property
    def _index(self) -> dict[tuple[int, ...], int]:
        return {c: i for i, c in enumerate(self.configs)}

    def index(self, config: Sequence[int]) -> int:
        """Position of ``config`` in the sector; KeyError if absent."""
        return self._index[tuple(config)]

    def __contains__(self, config) -> bool:
        return tuple(config) in self._index

    @cached_property
    def occupations(self) -> np.ndarray:
        """(size, n_sites) integer array of site occupations."""
        occ = np.array(self.configs, dtype=np.int64)
        return occ.reshape(self.size, self.n_sites)

    def neighbour(self, delta: int) -> "BasisSector":
        """Sector with ``delta`` more excitations and the same cutoff."""
        return enumerate_sector(
            self.kind, self.n_sites, self.n_excitations + delta, self.per_site_cutoff
        )


def _compositions(n_sites: int, total: int, cutoff: int) -> Iterator[tuple[int, ...]]:
    # first site runs from high to low, giving descending lexicographic order
    if n_sites == 1:
        if total <= cutoff:
            yield (total,)
        return
    for first in range(min(total, cutoff), -1, -1):
        rest = total - first
        if rest > (n_sites - 1) * cutoff:
            continue
        for tail in _compositions(n_sites - 1, rest, cutoff):
            yield (first,) + tail


@lru_cache(maxsize=None)
def enumerate_sector(
    kind: str, n_sites: int, n_excitations: int, per_site_cutoff: int | None = None
) -> BasisSector:
    """Enumerate all site configurations with ``n_excitations`` in total.

    For HOs the cutoff defaults to ``n_excitations``, which is exact for
    excitation-conserving dynamics. For spins the cutoff is always 1.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if n_sites < 1:
        raise ValueError(f"n_sites must be >= 1, got {n_sites}")
    if n_excitations < 0:
        raise ValueError(f"n_excitations must be >= 0, got {n_excitations}")
    if kind == SPIN:
        if n_excitations > n_sites:
            raise ValueError(
                f"a spin sector holds at most n_sites={n_sites} excitations, "
                f"got {n_excitations}"
            )
        configs = tuple(
            tuple(1 if i in chosen else 0 for i in range(n_sites))
            for chosen in combinations(range(n_sites), n_excitations)
        )
        return BasisSector(SPIN, n_sites, n_excitations, 1, configs)

    cutoff = max(n_excitations, 1) if per_site_cutoff is None else per_site_cutoff
    if cutoff < 1:
        raise ValueError(f"per_site_cutoff must be >= 1, got {cutoff}")
    if n_excitations > n_sites * cutoff:
        raise ValueError(
            f"{n_excitations} excitations exceed capacity n_sites*cutoff="
            f"{n_sites * cutoff}"
        )
    configs = tuple(_compositions(n_sites, n_excitations, cutoff))
    return BasisSector(HO, n_sites, n_excitations, cutoff, configs)


def sector_size(kind: str, n_sites: int, n_excitations: int) -> int:
    """Closed-form size of an untruncated sector."""
    if kind == SPIN:
        return comb(n_sites, n_excitations)
    return comb(n_sites + n_excitations - 1, n_excitations)


@dataclass(frozen=True, eq=False)
class StateVector:
    sector: BasisSector
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.sector.size:
            raise ValueError(
                f"amplitude vector has length {amps.shape[0]}, "
                f"sector size is {self.sector.size}"
            )
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized: norm={np.linalg.norm(amps)!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, sector: BasisSector, config: Sequence[int]) -> "StateVector":
        amps = np.zeros(sector.size, dtype=complex)
        amps[sector.index(config)] = 1.0
        return cls(sector, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.sector, self.amplitudes / n)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.sector != self.sector:
            raise ValueError("states live in different sectors")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_json(self) -> str:
        """Serialize as (config, re, im) triples plus sector metadata."""
        s = self.sector
        triples = [
            [list(c), float(a.real), float(a.imag)]
            for c, a in zip(s.configs, self.amplitudes)
        ]
        return json.dumps(
            {
                "kind": s.kind,
                "n_sites": s.n_sites,
                "n_excitations": s.n_excitations,
                "per_site_cutoff": s.per_site_cutoff,
                "amplitudes": triples,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StateVector":
        doc = json.loads(text)
        sector = enumerate_sector(
            doc["kind"], doc["n_sites"], doc["n_excitations"], doc["per_site_cutoff"]
        )
        amps = np.zeros(sector.size, dtype=complex)
        for config, re, im in doc["amplitudes"]:
            amps[sector.index(config)] = complex(re, im)
        return cls(sector, amps, normalized=False)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Linear map from ``domain`` to ``codomain``; matrix is codomain x domain."""

    domain: BasisSector
    codomain: BasisSector
    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        m.sum_duplicates()
        if m.shape != (self.codomain.size, self.domain.size):
            raise ValueError(
                f"matrix shape {m.shape} does not match sectors "
                f"({self.codomain.size}, {self.domain.size})"
            )
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_entries(cls, domain, codomain, entries) -> "SparseOperator":
        """Build from (row, col, value) triples; duplicates are summed."""
        if entries:
            rows, cols, vals = zip(*entries)
        else:
            rows, cols, vals = (), (), ()
        m = sp.coo_matrix(
            (np.asarray(vals, dtype=complex), (rows, cols)),
            shape=(codomain.size, domain.size),
        )
        return cls(domain, codomain, m.tocsr())

    def entries(self) -> list[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        return [(int(r), int(c), complex(v)) for r, c, v in zip(coo.row, coo.col, coo.data)]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.codomain, self.domain, self.matrix.conj().T.tocsr())

    def apply(self, state: StateVector) -> StateVector:
        """Unnormalized image of ``state``."""
        if state.sector != self.domain:
            raise ValueError("state sector does not match operator domain")
        return StateVector(self.codomain, self.matrix @ state.amplitudes, normalized=False)

    __call__ = apply

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, SparseOperator):
            if other.codomain != self.domain:
                raise ValueError("operator sectors do not chain")
            return SparseOperator(other.domain, self.codomain, self.matrix @ other.matrix)
        return NotImplemented

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        if (other.domain, other.codomain) != (self.domain, self.codomain):
            raise ValueError("cannot add operators on different sectors")
        return SparseOperator(self.domain, self.codomain, self.matrix + other.matrix)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "SparseOperator":
        return SparseOperator(self.domain, self.codomain, self.matrix * factor)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        if self.domain != self.codomain:
            return False
        diff = self.matrix - self.matrix.conj().T
        return diff.nnz == 0 or float(abs(diff).max()) <= atol


# --------------------------------------------------------------------------- #
#                           collective operators                              #
# --------------------------------------------------------------------------- #

_SPIN_OPS = ("J_minus", "J_plus")
_HO_OPS = ("A_lower", "A_raise", "c_k", "c_k_dagger")


def _site_lowering_entries(sector: BasisSector, target: BasisSector, weights):
    """Entries of sum_j weights[j] * (lowering on site j)."""
    entries = []
    for col, config in enumerate(sector.configs):
        for j, n in enumerate(config):
            if n == 0 or weights[j] == 0:
                continue
            new = config[:j] + (n - 1,) + config[j + 1 :]
            amp = np.sqrt(n) if sector.kind == HO else 1.0
            entries.append((target.index(new), col, weights[j] * amp))
    return entries


def _site_raising_entries(sector: BasisSector, target: BasisSector, weights):
    cutoff = sector.per_site_cutoff
    entries = []
    for col, config in enumerate(sector.configs):
        for j, n in enumerate(config):
            if n + 1 > cutoff or weights[j] == 0:
                continue
            new = config[:j] + (n + 1,) + config[j + 1 :]
            amp = np.sqrt(n + 1) if sector.kind == HO else 1.0
            entries.append((target.index(new), col, weights[j] * amp))
    return entries


def mode_weights(n_sites: int, k: int) -> np.ndarray:
    """Site weights exp(2 pi i j k / N) / sqrt(N) of mode c_k, sites j = 1..N."""
    j = np.arange(1, n_sites + 1)
    return np.exp(2j * np.pi * j * k / n_sites) / np.sqrt(n_sites)


def collective_op(sector: BasisSector, which: str, k: int | None = None) -> SparseOperator:
    """Collective ladder operator acting on ``sector``.

    ``J_minus``/``J_plus`` (spins) are sums of site lowering/raising operators.
    ``A_lower``/``A_raise`` (HOs) are sum_i a_i and its adjoint, equal to
    sqrt(N) c_N and sqrt(N) c_N^dagger. ``c_k``/``c_k_dagger`` are the Fourier
    modes with k in 1..N; mode N is the in-phase (bright) one.

    Raising operators on a truncated HO sector drop amplitude that would
    exceed the cutoff.
    """
    n = sector.n_excitations
    lowering = which in ("J_minus", "A_lower", "c_k")
    if sector.kind == SPIN and which not in _SPIN_OPS:
        raise ValueError(f"{which!r} is not a spin operator; use one of {_SPIN_OPS}")
    if sector.kind == HO and which not in _HO_OPS:
        raise ValueError(f"{which!r} is not an HO operator; use one of {_HO_OPS}")
    if lowering and n == 0:
        raise ValueError(f"{which} needs a sector with at least one excitation")
    if not lowering:
        cap = sector.n_sites * sector.per_site_cutoff
        if n + 1 > cap:
            raise ValueError(f"{which} would leave the sector (capacity {cap})")

    if which in ("c_k", "c_k_dagger"):
        if k is None or not 1 <= k <= sector.n_sites:
            raise ValueError(f"mode index k must lie in 1..{sector.n_sites}, got {k}")
        w = mode_weights(sector.n_sites, k)
        weights = w if lowering else w.conj()
    else:
        weights = np.ones(sector.n_sites)

    target = sector.neighbour(-1 if lowering else +1)
    build = _site_lowering_entries if lowering else _site_raising_entries
    return SparseOperator.from_entries(sector, target, build(sector, target, weights))


def number_op(sector: BasisSector) -> SparseOperator:
    """Total excitation number (diagonal, equals n_excitations)."""
    diag = np.full(sector.size, float(sector.n_excitations))
    return SparseOperator(sector, sector, sp.diags(diag).tocsr())


def emission_operator(sector: BasisSector) -> SparseOperator:
    """J+J- (spins) or A^dagger A (HOs) restricted to ``sector``."""
    lower = collective_op(sector, "J_minus" if sector.kind == SPIN else "A_lower")
    return lower.adjoint() @ lower


def spin_jz(sector: BasisSector) -> SparseOperator:
    """Jz = sum_i (n_i - 1/2); constant within a sector."""
    if sector.kind != SPIN:
        raise ValueError("Jz is defined for spin sectors")
    value = sector.n_excitations - sector.n_sites / 2
    return SparseOperator(sector, sector, sp.identity(sector.size, format="csr") * value)


def total_spin_squared(sector: BasisSector) -> SparseOperator:
    """J^2 = Jx^2 + Jy^2 + Jz^2 restricted to a spin sector.

    Jx and Jy are assembled on the direct sum of the neighbouring sectors
    (m-1, m, m+1) from J+ and J-, squared there, and the (m, m) block kept.
    """
    if sector.kind != SPIN:
        raise ValueError("J^2 is defined for spin sectors")
    m, N = sector.n_excitations, sector.n_sites
    blocks = [s for s in (m - 1, m, m + 1) if 0 <= s <= N]
    sectors = [enumerate_sector(SPIN, N, s) for s in blocks]
    pos = blocks.index(m)

    raise_blocks = [[None] * len(sectors) for _ in sectors]
    for i in range(len(sectors) - 1):
        raise_blocks[i + 1][i] = collective_op(sectors[i], "J_plus").matrix
    for i, s in enumerate(sectors):
        raise_blocks[i][i] = sp.csr_matrix((s.size, s.size))
    j_plus = sp.bmat(raise_blocks, format="csr")
    j_minus = j_plus.conj().T
    jx = (j_plus + j_minus) / 2
    jy = (j_plus - j_minus) / 2j
    square = jx @ jx + jy @ jy

    offsets = np.cumsum([0] + [s.size for s in sectors])
    lo, hi = offsets[pos], offsets[pos + 1]
    jz = m - N / 2
    block = square[lo:hi, lo:hi] + sp.identity(sector.size) * jz**2
    return SparseOperator(sector, sector, block.tocsr())


# --------------------------------------------------------------------------- #
#                        Hamiltonians and propagation                         #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Site detunings and symmetric couplings, both in units of gamma0.

    ``anharmonicity`` adds U/2 n_i (n_i - 1) on every HO site.
    """

    site_energies: np.ndarray
    coupling_matrix: np.ndarray
    anharmonicity: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.site_energies, dtype=float).reshape(-1)
        v = np.asarray(self.coupling_matrix, dtype=float)
        if v.shape != (d.size, d.size):
            raise ValueError(
                f"coupling matrix shape {v.shape} does not match {d.size} sites"
            )
        if not np.allclose(v, v.T, atol=1e-14):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("coupling matrix diagonal must be zero")
        object.__setattr__(self, "site_energies", d)
        object.__setattr__(self, "coupling_matrix", v)

    @property
    def n_sites(self) -> int:
        return self.site_energies.size

    @classmethod
    def all_to_all(cls, n_sites: int, coupling: float, site_energies=None, anharmonicity=0.0):
        v = coupling * (np.ones((n_sites, n_sites)) - np.eye(n_sites))
        d = np.zeros(n_sites) if site_energies is None else site_energies
        return cls(d, v, anharmonicity)


def hopping_matrix(sector: BasisSector, couplings: np.ndarray) -> np.ndarray:
    """Dense sum_{i<j} V_ij (hop_ij + hop_ji) on ``sector``."""
    N = sector.n_sites
    H = np.zeros((sector.size, sector.size))
    hop = sector.kind == HO
    cutoff = sector.per_site_cutoff
    for col, config in enumerate(sector.configs):
        for i in range(N):
            ni = config[i]
            if ni == 0:
                continue
            for j in range(N):
                v = couplings[i, j]
                if j == i or v == 0:
                    continue
                nj = config[j]
                if nj + 1 > cutoff:
                    continue
                new = list(config)
                new[i] -= 1
                new[j] += 1
                amp = np.sqrt(ni * (nj + 1)) if hop else 1.0
                H[sector.index(new), col] += v * amp
    return H


def build_hamiltonian(sector: BasisSector, spec: HamiltonianSpec) -> SparseOperator:
    """Rotating-frame Hamiltonian sum_i delta_i n_i + sum_{i<j} V_ij (hop + h.c.)."""
    if spec.n_sites != sector.n_sites:
        raise ValueError(
            f"Hamiltonian has {spec.n_sites} sites, sector has {sector.n_sites}"
        )
    occ = sector.occupations
    diag = occ @ spec.site_energies
    if spec.anharmonicity:
        if sector.kind != HO:
            raise ValueError("anharmonicity applies to HO sectors only")
        diag = diag + 0.5 * spec.anharmonicity * (occ * (occ - 1)).sum(axis=1)
    H = hopping_matrix(sector, spec.coupling_matrix) + np.diag(diag)
    return SparseOperator(sector, sector, sp.csr_matrix(H))


def propagator(hamiltonian: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) for a Hermitian (or stack of Hermitian) dense matrix."""
    w, U = np.linalg.eigh(hamiltonian)
    phases = np.exp(-1j * w * dt)
    return (U * phases[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))


def evolve_step(state: StateVector, hamiltonian: SparseOperator, dt: float) -> StateVector:
    """Exact one-step propagation exp(-i H dt)|psi>."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if hamiltonian.domain != state.sector or hamiltonian.codomain != state.sector:
        raise ValueError("Hamiltonian does not act on the state's sector")
    U = propagator(hamiltonian.toarray(), dt)
    out = U @ state.amplitudes
    # renormalize away round-off; the propagator is unitary to machine precision
    if state.normalized:
        drift = abs(np.linalg.norm(out) - 1.0)
        if drift > 1e-10:
            raise RuntimeError(f"norm drift {drift:.2e} exceeds 1e-10")
        out = out / np.linalg.norm(out)
    return StateVector(state.sector, out, normalized=state.normalized)


def expectation_emission(state: StateVector, which: str | None = None) -> float:
    """<J+J-> for spins or <A^dagger A> for HOs, computed as ||lowering psi||^2."""
    kind = state.sector.kind if which is None else which
    if kind != state.sector.kind:
        raise ValueError(f"asked for {kind} emission on a {state.sector.kind} state")
    if state.sector.n_excitations == 0:
        return 0.0
    lower = collective_op(state.sector, "J_minus" if kind == SPIN else "A_lower")
    image = lower.matrix @ state.amplitudes
    return float(np.vdot(image, image).real)
