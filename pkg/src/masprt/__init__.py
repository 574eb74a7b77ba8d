"""Sequential detection and sequence design for diffusive molecular links."""

from .analysis import (
    BoundInputs,
    kl_poisson,
    maximal_isi_means,
    mu_factor,
    prop1_bound,
    prop2_lhs,
    prop2_tail,
)
from .channel import (
    ChannelParams,
    SampleMatrix,
    TapVector,
    hitting_prob,
    mean_rate_at,
    simulate_packet,
    tap_vector,
)
from .detectors import (
    DecisionMemory,
    DetectorOutcome,
    Modulation,
    ReceiverModel,
    WaldThresholds,
    addf_detect,
    detect_packet,
    estimate_isi,
    llr_increment,
    masprt_detect,
    mlda_detect,
    mlda_threshold,
    wald_thresholds,
)
from .harness import (
    ExperimentSpec,
    TrialResult,
    calibrate_addf,
    emit_outputs,
    run_ber_trial,
    sweep_rate,
    sweep_sync,
)
from .optimizer import OptProblem, OptResult, load_sequence, p1_constraints, p1_objective, save_sequence, solve_p1

__version__ = "0.1.0"
