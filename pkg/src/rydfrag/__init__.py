"""rydfrag: fragmented constrained spin chains from detuned driven arrays.

Library layout:
    basis        bitstring configurations, charges, sector enumeration
    constraints  kinetic rules, Krylov fragments, fragmentation statistics
    model        exact and dressed Hamiltonians, analytic/numeric couplings
    spectral     diagonalization, gap-ratio statistics, entanglement
    dynamics     quench evolution, imbalance/QFI, thermalization predictor
    disorder     position disorder, ensemble sweeps, scaling collapse
    roots        named root-configuration presets
    cli          experiment orchestration (also the `rydfrag` entry point)
"""

from .basis import (
    InversionBasis,
    Regime,
    SectorKey,
    SpinConfig,
    charges,
    enumerate_sector,
    sector_sizes,
    symmetrize_inversion,
)
from .constraints import (
    BondMove,
    FragmentationStats,
    KrylovFragment,
    MoveRule,
    allowed_moves,
    build_fragment,
    derive_rule_chart,
    fragmentation_stats,
    frozen_count_closed_form,
    largest_fragment_of_sector,
    largest_sector_key,
)
from .disorder import (
    CollapseResult,
    DisorderRealization,
    SweepResult,
    disordered_hamiltonian,
    fss_collapse,
    sample_realization,
    sweep,
    synthetic_collapse_data,
)
from .dynamics import (
    QuenchResult,
    default_time_grid,
    eth_prediction,
    evolve,
    imbalance,
    imbalance_diagonal,
    quantum_fisher,
    time_averaged_imbalance,
)
from .model import (
    EffectiveCouplings,
    HamiltonianMatrix,
    InteractionProfile,
    ModelParams,
    analytic_couplings,
    build_effective_hamiltonian,
    build_exact_hamiltonian,
    numeric_sw_amplitude,
)
from .roots import cluster_root, root_template
from .spectral import (
    EigenData,
    RStatistics,
    SchmidtCut,
    diagonalize,
    eigenstate_entropy,
    r_statistics,
)

__version__ = "0.1.0"
