"""Exact desk-scale laboratory for a nested two-lab thought experiment.

Six subsystems, 324 dimensions, five stage unitaries.  The package verifies
every quantum claim in the underlying argument exactly (state coefficients,
orthogonalities, the 1/12 joint probability), computes chained-projection
history probabilities and their joint-considerability, enumerates the exact
beable trajectory distribution over the agents' memories, and replays the
twelve-step certainty-chain argument under per-interpretation assumption
profiles.
"""

from .born import (
    Certainty,
    CertaintyResult,
    CollapsePolicy,
    Distribution,
    certainty_check,
    final_record_marginal,
    joint_certainty_check,
    joint_distribution,
    outcome_distribution,
)
from .bellbohm import (
    MemoryConfig,
    REFERENCE_TRAJECTORY,
    Trajectory,
    TrajectoryTable,
    config_projector,
    exact_chain,
    transition_kernel,
)
from .epistemics import (
    AssumptionId,
    InterpretationProfile,
    PROFILES,
    Verdict,
    build_argument,
    check,
    escape_rule_audit,
    render_tables,
)
from .histories import History, chain_consistency_report, history, history_probability
from .linalg import (
    Projector,
    ProjectiveDecomposition,
    SpaceDescriptor,
    StateVector,
    inner,
    project,
    tensor,
)
from .protocol import AgentId, MeasurementSpec, Protocol, StageId, StageUnitary, default_protocol

__version__ = "0.1.0"
