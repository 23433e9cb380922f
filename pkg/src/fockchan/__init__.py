"""Noiseless loss suppression on truncated Fock spaces.

Noiseless attenuation before a pure-loss channel and noiseless amplification
after it turn the lossy channel into one arbitrarily close to the identity,
at the price of a lower heralding probability.
"""
from .channels import (
    ChannelParams,
    KrausChannel,
    apply_channel,
    loss_channel,
    qubit_success_probability,
    success_probability,
    suppressed_channel_direct,
    suppressed_channel_simplified,
)
from .choi import (
    ChoiMatrix,
    channel_fidelity,
    choi_of_channel,
    effective_transmittance,
    naive_strategy_fidelity,
)
from .fock import (
    DomainError,
    FockState,
    amplifier_filter,
    apply_filter,
    attenuator_filter,
    phase_shift,
)
from .protocol import SweepPlan, SweepRecord, optimize_nu, relative_success, run_protocol, run_sweep

__version__ = "0.1.0"
