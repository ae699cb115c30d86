"""Flux-modulated transmon toolkit.

Simulation and planning for tunable transmons under one- and two-tone
flux modulation: time-averaged frequencies, dynamical sweet spots,
sideband spectra, parametric two-qubit gate plans, and closed-loop pulse
calibration against a virtual hardware model.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationOutcome,
    RamseyResult,
    Theta0Estimate,
    VirtualHardware,
    calibrate_and_verify,
    calibrate_theta0,
    calibrate_transfer_function,
    load_scenario,
    reference_transfer_function,
    save_scenario,
    virtual_ramsey,
)
from .errors import (
    AliasingRisk,
    CutoffTooSmall,
    DiagonalizationFailure,
    FitDivergence,
    FlatResponse,
    FluxmodError,
    InfeasibleError,
    InsufficientWindow,
    NoFeasiblePoint,
    NonMonotoneRegion,
    NonPositiveCoupling,
    NoRoot,
    NumericalError,
    OutOfBand,
    TruncationTooCoarse,
    ValidationError,
    WrongSideband,
)
from .gates import (
    ChevronMap,
    CollisionReport,
    GatePlan,
    GateType,
    PairSpec,
    check_collisions,
    chevron_simulate,
    effective_coupling,
    enumerate_resonances,
    gate_duration,
    optimize_weight,
    plan_gate,
    resonance_fm,
)
from .modulation import (
    SWEET_SPOT_THRESHOLD_GHZ_PER_PHI0,
    AtlasResult,
    NoiseModel,
    OperatingPoint,
    Sensitivities,
    SidebandSpectrum,
    avg_frequency_bessel,
    avg_frequency_timedomain,
    dephasing_proxy,
    operating_point,
    sensitivities,
    sideband_weights,
    sweet_spot_atlas,
    sweet_spot_solve,
)
from .pulses import (
    BichromaticPulse,
    EnvelopeSpec,
    ToneRatio,
    TransferFunction,
    Waveform,
    apply_transfer_compensation,
    compensate_pulse,
    distort_pulse,
    effective_theta_after_shift,
    precompensate_theta,
    scale_tones,
    synthesize,
    tone_ratio,
    wrap_angle,
)
from .transmon import (
    Device,
    DevicePair,
    FourierSeries,
    FrequencyCurve,
    TransmonSpec,
    ej_eff,
    fit_spec,
    fourier_coefficients,
    frequency_curve,
    load_device,
    transition_frequencies,
)
