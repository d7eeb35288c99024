"""Collective emission, absorption and transfer rates for spin and oscillator aggregates."""

__version__ = "0.1.0"

from .fockspace import (  # noqa: E402
    BasisSector,
    HamiltonianSpec,
    SparseOperator,
    StateVector,
    build_hamiltonian,
    collective_op,
    enumerate_sector,
    evolve_step,
    expectation_emission,
)
from .dicke_states import (  # noqa: E402
    HODickeLabel,
    SpinDickeLabel,
    ho_collective_state,
    participation_ratio,
    spin_dicke_state,
)
from .rates import (  # noqa: E402
    AggregateSpec,
    anharmonic_sr_rate,
    closed_form_enhancement,
    golden_rule_enhancement,
    max_enhancement,
    net_flux,
)
