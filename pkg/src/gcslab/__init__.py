"""Geometric constellation shaping robust to channel-condition uncertainty.

Learns constellation geometries by end-to-end gradient training on a
differentiable surrogate channel (additive noise + residual phase noise),
then benchmarks them on a realistic channel with Wiener laser phase noise
and blind-phase-search carrier recovery, reporting mutual-information
estimates against square-QAM baselines.
"""

from .autoencoder import (
    AdamState,
    DecoderWeights,
    EncoderWeights,
    SamplingRule,
    ScenarioSpec,
    TrainConfig,
    TrainResult,
    train,
)
from .bps import BpsConfig, run_bps
from .channel import (
    AwgnSpec,
    LinkParams,
    NlinCoefficients,
    RpnSpec,
    WienerSpec,
    awgn_variance,
    ase_variance,
    nlin_variance,
    test_channel_apply,
    total_noise_variance,
    training_channel_apply,
    wiener_phase_walk,
)
from .constellation import (
    Constellation,
    ConstellationMoments,
    load,
    make_square_qam,
    moments,
    normalize,
    save,
)
from .metrics import MiEstimate, entropy_uniform, mi_gaussian_receiver

__version__ = "0.1.0"
