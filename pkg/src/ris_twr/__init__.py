"""Joint RIS phase-shift and relay-beamforming design for two-way relaying.

Modules:
  channels  random channel realizations (geometry, path loss, Rician links)
  system    combined channels, SNRs, relay power, closed-form amplification
  ipm       dense interior-point solver on the PSD cone
  sdp       trace-constrained SDP layer plus Gaussian randomization
  single    SUM and GSM phase design for a single-antenna relay
  multi     SUM/GSM x OB/MRB joint designs for a multi-antenna relay
  harness   Monte-Carlo sweeps, benchmarks, statistics, CSV output
  cli       command-line interface (`ris-twr`)
"""

from .channels import (
    ArrayConfig,
    ChannelSet,
    GeometryConfig,
    RicianConfig,
    path_loss_db,
    sample_channel_set,
    steering_vector_bs,
    steering_vector_ris,
)
from .harness import (
    ExperimentSpec,
    SweepResult,
    benchmark_no_ris,
    benchmark_random_phase,
    empirical_cdf,
    run_sweep,
)
from .multi import (
    BisectionConfig,
    JointDesign,
    LiftedMatrices,
    build_lifted,
    gsm_mrb,
    gsm_ob,
    mrr_mrt_beamformer,
    optimize_beamformer_ob,
    optimize_phase_upperbound,
    sum_mrb,
    sum_ob,
)
from .sdp import (
    SdpProblem,
    SdpSolution,
    TraceConstraint,
    extract_phases,
    gaussian_randomization,
    solve,
)
from .single import GsmConfig, SingleDesign, gsm_eta, gsm_single, sum_single
from .system import (
    Beamformer,
    PhaseShifts,
    PowerConfig,
    bs_power,
    combined_channel,
    min_snr_db,
    optimal_tau,
    snr_pair_multi,
    snr_upper_bounds,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
