"""Pure-loss channel and the attenuate -> loss -> amplify protocol channel.

Composition order is always attenuate, then loss, then amplify. The diagonal
filters commute with A_0 but not with the j >= 1 loss operators, so the order
matters.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, sqrt
from typing import Sequence

import numpy as np

from .fock import (
    MAX_TRUNCATION,
    DomainError,
    _frozen,
    amplifier_filter,
    attenuator_filter,
)

COMPLETENESS_TOL = 1e-12
TRACE_NONINCREASING_TOL = 1e-10
MATCHED_TOL = 1e-9


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive, trace-nonincreasing map rho -> sum_j K_j rho K_j^dag."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(k.shape != shape for k in ops):
            raise ValueError("Kraus operators must be square and share one dimension")
        object.__setattr__(self, "kraus_ops", ops)
        if self.max_gain() > 1.0 + TRACE_NONINCREASING_TOL:
            raise DomainError("Kraus operators increase the trace")

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def completeness(self) -> np.ndarray:
        """sum_j K_j^dag K_j."""
        return sum(k.conj().T @ k for k in self.kraus_ops)

    def max_gain(self) -> float:
        """Largest eigenvalue of the completeness operator."""
        return float(np.linalg.eigvalsh(self.completeness()).max())

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(self, rho)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Channel that applies ``self`` first and ``other`` second."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in channel composition")
        return KrausChannel(tuple(b @ a for a in self.kraus_ops for b in other.kraus_ops))

    @classmethod
    def from_filter(cls, op: np.ndarray) -> "KrausChannel":
        return cls((op,))

    @classmethod
    def identity(cls, dim: int) -> "KrausChannel":
        return cls((np.eye(dim),))


@dataclass(frozen=True)
class ChannelParams:
    """Amplitude transmittance ``tau``, attenuation ``nu``, gain ``g``, truncation ``n_max``."""

    tau: float
    nu: float = 1.0
    g: float = 1.0
    n_max: int = 1

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise DomainError(f"transmittance tau must lie in (0, 1], got {self.tau}")
        if not 0.0 < self.nu <= 1.0:
            raise DomainError(f"attenuation nu must lie in (0, 1], got {self.nu}")
        if not self.g >= 1.0:
            raise DomainError(f"gain g must be >= 1, got {self.g}")
        if int(self.n_max) != self.n_max or not 0 <= self.n_max <= MAX_TRUNCATION:
            raise DomainError(f"n_max must be an integer in [0, {MAX_TRUNCATION}], got {self.n_max!r}")

    @classmethod
    def matched(cls, tau: float, nu: float, n_max: int = 1) -> "ChannelParams":
        """Parameters with the loss-compensating gain g = 1/(nu tau)."""
        return cls(tau=tau, nu=nu, g=1.0 / (nu * tau), n_max=n_max)

    @property
    def is_matched(self) -> bool:
        return abs(self.g * self.nu * self.tau - 1.0) <= MATCHED_TOL

    @property
    def dim(self) -> int:
        return self.n_max + 1


def loss_operators(tau: float, n_max: int) -> list[np.ndarray]:
    """Kraus operators A_0..A_N of the pure-loss channel; A_j removes j photons."""
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"transmittance tau must lie in (0, 1], got {tau}")
    if int(n_max) != n_max or not 0 <= n_max <= MAX_TRUNCATION:
        raise DomainError(f"n_max must be an integer in [0, {MAX_TRUNCATION}], got {n_max!r}")
    n_max = int(n_max)
    dim = n_max + 1
    r2 = 1.0 - tau * tau
    ops = []
    for j in range(dim):
        a = np.zeros((dim, dim))
        for m in range(dim - j):
            a[m, m + j] = sqrt(comb(m + j, j)) * r2 ** (j / 2) * tau**m
        ops.append(a)
    return ops


def loss_channel(tau: float, n_max: int) -> KrausChannel:
    """Pure-loss channel with amplitude transmittance ``tau`` on n <= n_max."""
    ops = loss_operators(tau, n_max)
    if tau == 1.0:
        ops = ops[:1]
    return KrausChannel(tuple(ops))


def apply_channel(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.dim, ch.dim):
        raise ValueError(f"dimension mismatch: channel dim {ch.dim} vs state {rho.shape}")
    out = sum(k @ rho @ k.conj().T for k in ch.kraus_ops)
    return 0.5 * (out + out.conj().T)


def inverse_transmission(tau: float, n_max: int) -> np.ndarray:
    """Closed-form A_0^{-1} = sum_n tau**-n |n><n|."""
    return np.diag(float(tau) ** -np.arange(n_max + 1, dtype=float))


def reduced_loss_operators(tau: float, n_max: int) -> list[np.ndarray]:
    """B_j = A_0^{-1} A_j for j = 1..N."""
    a0_inv = inverse_transmission(tau, n_max)
    return [a0_inv @ a for a in loss_operators(tau, n_max)[1:]]


def protocol_kraus(p: ChannelParams) -> list[np.ndarray]:
    """K_j = G_N(g) A_j nu**n for every loss order j."""
    att = attenuator_filter(p.nu, p.dim)
    amp = amplifier_filter(p.g, p.n_max)
    return [amp @ a @ att for a in loss_operators(p.tau, p.n_max)]


def suppressed_channel_direct(p: ChannelParams) -> KrausChannel:
    """Attenuation, pure loss and amplification composed explicitly."""
    return KrausChannel(tuple(protocol_kraus(p)))


def _require_matched(p: ChannelParams) -> None:
    if not p.is_matched:
        raise DomainError(
            f"matched gain g = 1/(nu tau) required, got g*nu*tau = {p.g * p.nu * p.tau}"
        )


def suppressed_channel_simplified(p: ChannelParams) -> KrausChannel:
    """Matched-gain protocol as g**-N (identity + sum_j nu**j B_j).

    Only valid when g = 1/(nu tau); other gains raise :class:`DomainError`.
    """
    _require_matched(p)
    scale = p.g ** -p.n_max
    ops = [scale * np.eye(p.dim)]
    ops += [scale * p.nu**j * b for j, b in enumerate(reduced_loss_operators(p.tau, p.n_max), start=1)]
    return KrausChannel(tuple(ops))


def loss_term_weights(p: ChannelParams, rho_in: np.ndarray) -> np.ndarray:
    """Unnormalized weight of each j-photon loss term in the matched protocol output.

    Entry 0 is the undisturbed term g**-2N Tr[rho]; entry j >= 1 is
    g**-2N nu**2j Tr[B_j rho B_j^dag].
    """
    _require_matched(p)
    rho_in = np.asarray(rho_in, dtype=complex)
    scale = p.g ** (-2 * p.n_max)
    w = [scale * np.trace(rho_in).real]
    for j, b in enumerate(reduced_loss_operators(p.tau, p.n_max), start=1):
        w.append(scale * p.nu ** (2 * j) * np.trace(b @ rho_in @ b.conj().T).real)
    return np.array(w)


def success_probability(p: ChannelParams, rho_in: np.ndarray) -> float:
    """Heralding probability of the matched protocol for input ``rho_in``."""
    return float(loss_term_weights(p, rho_in).sum())


def qubit_success_probability(c0: complex, c1: complex, p: ChannelParams) -> float:
    """Success probability for a pure c0|0> + c1|1> input, valid for any gain."""
    w0, w1 = abs(c0) ** 2, abs(c1) ** 2
    if abs(w0 + w1 - 1.0) > 1e-12:
        raise DomainError(f"probe must be normalized, |c0|^2+|c1|^2 = {w0 + w1}")
    t2 = p.tau**2
    return w0 * p.g**-2 + w1 * p.nu**2 * (t2 + (1.0 - t2) * p.g**-2)


def compose(channels: Sequence[KrausChannel]) -> KrausChannel:
    """Apply ``channels`` left to right."""
    out = channels[0]
    for ch in channels[1:]:
        out = out.then(ch)
    return out
