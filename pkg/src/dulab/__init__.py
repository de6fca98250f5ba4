"""Numerical lab for entanglement growth and dual unitarity in brickwork circuits."""

from .qinfo import (
    Bipartition,
    DensityMatrix,
    PureState,
    bell_state,
    entropy_vn,
    fidelity,
    mutual_information,
    purify,
    reduce,
    relative_entropy,
    sandwiched_renyi,
    trace_distance,
    trace_norm_distance,
    uhlmann_align,
)
from .gates import (
    CartanData,
    DefectReport,
    Gate,
    cartan_decompose,
    choi_output_state,
    defects,
    dual_matrix,
    haar_gate,
    haar_unitary,
    kicked_ising_first_gate,
    kicked_ising_gate,
    nearest_dual_q2,
    project_dual_iterative,
    swap_gate,
)
from .circuit import (
    BrickworkCircuit,
    EntanglementRecord,
    FourPartyReport,
    bond_entropies,
    dimer_state,
    estimate_vE,
    evolve,
    four_party_report,
    initial_state,
    reconstruct_distillable,
    zigzag_check,
)
from .mps import MPSPair, cut_entropies_exact, random_solvable, replica_purity, solvability_defect
from .ensemble import (
    EnsembleStats,
    EpsDeltaPoint,
    eps_delta_scan,
    haar_choi_fidelity,
    haar_purity_moment,
    haar_state_fidelity,
)

__version__ = "0.1.0"
