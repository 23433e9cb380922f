"""Model of the two-photon-interference implementation and its imperfections.

Imperfect interference (Hong-Ou-Mandel visibility V < 1) is modeled as a
convex mixture of the ideal heralded filter and its fully dephased version:

    E(rho) = V G rho G^dag + (1 - V) D(G rho G^dag)

with D removing Fock-basis coherences. This is a modeling assumption with one
free parameter and the right V = 1 limit, not a derived description of the
optics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, loss_channel, qubit_success_probability, ChannelParams
from .choi import channel_fidelity, choi_of_channel
from .fock import DomainError, amplifier_filter, attenuator_filter

HOM_VISIBILITY = 0.947
IDENTITY_FIDELITY_BASELINE = 0.958  # measured, used only as a report overlay
ETA_CD_DEFAULT = 0.1


def gain_from_theta(theta: float) -> float:
    """Amplifier gain tan(theta) set by the idler polarization angle."""
    if not math.pi / 4 <= theta < math.pi / 2:
        raise DomainError(f"theta must lie in [pi/4, pi/2) for gain >= 1, got {theta}")
    if theta == math.pi / 4:
        return 1.0
    return math.tan(theta)


def theta_from_gain(g: float) -> float:
    if not g >= 1.0:
        raise DomainError(f"gain must be >= 1, got {g}")
    return math.atan(g)


@dataclass(frozen=True)
class ExperimentParams:
    theta: float
    visibility: float = HOM_VISIBILITY
    eta_cd: float = ETA_CD_DEFAULT
    nu: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        gain_from_theta(self.theta)
        if not 0.0 <= self.visibility <= 1.0:
            raise DomainError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not 0.0 < self.eta_cd <= 1.0:
            raise DomainError(f"eta_cd must lie in (0, 1], got {self.eta_cd}")
        ChannelParams(tau=self.tau, nu=self.nu)

    @classmethod
    def from_gain(cls, g: float, **kw) -> "ExperimentParams":
        return cls(theta=theta_from_gain(g), **kw)

    @property
    def gain(self) -> float:
        return gain_from_theta(self.theta)

    def channel_params(self) -> ChannelParams:
        return ChannelParams(tau=self.tau, nu=self.nu, g=self.gain, n_max=1)


def implementation_penalty(g: float) -> float:
    """Success of the interference amplifier relative to the optimal filter G_1(g)."""
    if not g >= 1.0:
        raise DomainError(f"gain must be >= 1, got {g}")
    return g * g / (2.0 * (1.0 + g * g))


def imperfect_amplifier_channel(g: float, V: float, n_max: int = 1) -> KrausChannel:
    """Heralded amplifier degraded by imperfect two-photon interference."""
    if not 0.0 <= V <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {V}")
    amp = amplifier_filter(g, n_max)
    ops = [math.sqrt(V) * amp]
    if V < 1.0:
        for n in range(n_max + 1):
            proj = np.zeros((n_max + 1, n_max + 1))
            proj[n, n] = 1.0
            ops.append(math.sqrt(1.0 - V) * proj @ amp)
    return KrausChannel(tuple(ops))


def imperfect_protocol_channel(tau: float, nu: float, g: float, V: float = HOM_VISIBILITY) -> KrausChannel:
    """Attenuation, loss, then the imperfect amplifier, on the qubit subspace."""
    att = KrausChannel.from_filter(attenuator_filter(nu, 2))
    return att.then(loss_channel(tau, 1)).then(imperfect_amplifier_channel(g, V))


def model_fidelity(tau: float, nu: float, g: float, V: float = HOM_VISIBILITY) -> float:
    """Channel fidelity of the imperfect protocol, from the Kraus pipeline."""
    return channel_fidelity(choi_of_channel(imperfect_protocol_channel(tau, nu, g, V)).normalize())


def model_matched_fidelity(tau: float, nu: float, V: float = HOM_VISIBILITY) -> float:
    """Closed form of :func:`model_fidelity` at matched gain.

    The dephased branch keeps the |10>, |01> populations and drops their
    coherence, so the signal overlap is (1 + V)/2 instead of 1.
    """
    return 0.5 * (1.0 + V) / (1.0 + nu**2 * (1.0 - tau**2) / 2.0)


def saturated_fidelity(V: float = HOM_VISIBILITY) -> float:
    """High-gain limit of the model fidelity along the matched policy."""
    return 0.5 * (1.0 + V)


def measured_rate(p: ExperimentParams, probe) -> float:
    """Absolute heralded-event probability per probe photon, before normalization.

    Attenuation is folded into state preparation, so its own success factor
    |c0|^2 + nu^2 |c1|^2 is absent from the measured rate.
    """
    c0, c1 = probe
    full = qubit_success_probability(c0, c1, p.channel_params())
    prep = abs(c0) ** 2 + p.nu**2 * abs(c1) ** 2
    return p.eta_cd * implementation_penalty(p.gain) * full / prep


def experimental_p_rel(p: ExperimentParams, probe, corrected: bool = True) -> float:
    """Relative success probability as it would be extracted from count rates.

    The identity-channel reference is taken with the same heralding
    configuration, so eta_cd and the interference penalty cancel in the ratio.
    With ``corrected`` the preparation factor (1/2)(1 + nu^2) for the balanced
    probe (generally |c0|^2 + nu^2 |c1|^2) is multiplied back in, which makes
    the value comparable with the ideal qubit success probability.
    """
    c0, c1 = probe
    reference = p.eta_cd * implementation_penalty(p.gain)
    raw = measured_rate(p, probe) / reference
    if not corrected:
        return raw
    return raw * (abs(c0) ** 2 + p.nu**2 * abs(c1) ** 2)
