"""Numerical laboratory for measurement-powered engine cycles.

Layers, bottom up: :mod:`szilard.qop` (operators, states, partial traces,
entropies), :mod:`szilard.measurement` (premeasurement models, instruments,
objectification, energy and repeatability certificates),
:mod:`szilard.feedback` (outcome-conditioned work strokes),
:mod:`szilard.thermo` (free energy, work accounting, erasure),
:mod:`szilard.engine` (full cycles, feature scoring, scans, the scenario
library), and :mod:`szilard.cli` (scenario files and the command line).
"""

from .qop import (
    EPS_ALG,
    EPS_EIG,
    MAX_DIM,
    ConstructionError,
    DensityMatrix,
    ErasureError,
    Factor,
    HardAssertionError,
    Operator,
    PureState,
    SizeError,
    SubsystemLayout,
    SzilardError,
    basis_state,
    commutator_norm,
    dagger,
    operator_norm,
    partial_trace,
    projector_onto,
    relative_entropy,
    tensor_product,
    thermal_state,
    von_neumann_entropy,
)
from .measurement import (
    Branch,
    EnergyReport,
    Gemenge,
    Instrument,
    MeasurementModel,
    Observable,
    RepeatReport,
    Transition,
    WayReport,
    apply_instrument,
    build_degenerate_instrument,
    build_standard_premeasurement,
    build_transition_model,
    check_energy_conserving_measurement,
    check_repeatable,
    complete_unitary,
    instrument_from_model,
    premeasure_and_objectify,
    way_witness,
)
from .feedback import (
    FeedbackScheme,
    OscillatorWeight,
    build_oscillator_weight,
    build_shift_unitaries,
    build_shift_unitary,
    check_feedback_energy,
    check_feedback_form,
    compose_feedback_unitary,
    conditional_feedback_map,
    objectification_order_gap,
    random_energy_conserving_unitary,
)
from .thermo import (
    ChainReport,
    ErasureResult,
    ExplicitReservoir,
    Feature2Report,
    ThermoContext,
    WorkLedger,
    build_swap_erasure,
    erase_demon,
    feature2_test,
    free_energy,
    mean_energy_above_ground,
    reservoir_assisted_bound,
    work_energy_entropy_form,
    work_ledger,
    work_per_outcome,
    work_threshold,
)
from .engine import (
    BranchResult,
    Certification,
    CycleResult,
    EngineConfig,
    FeatureReport,
    GenericWeight,
    ReservoirSpec,
    SCAN_FAMILIES,
    SCENARIO_NAMES,
    ScanRecord,
    ScanReport,
    evaluate_features,
    impossibility_scan,
    run_cycle,
    scenario_library,
)

__version__ = "0.1.0"
