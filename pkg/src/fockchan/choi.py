"""Choi matrices of single-rail qubit channels on the {|00>, |10>, |01>} support.

Two-mode kets are written |n_V n_H>: the first label is the photon number in
the channel mode (V), the second in the untouched reference mode (H). The
probe is |Psi+> = (|10> + |01>)/sqrt(2). Passive channels never create
photons, so |11> never appears and the Choi matrix lives on three states.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel
from .fock import NORM_TOL, DomainError, _frozen, is_density_matrix, phase_shift

BASIS_LABELS = ("00", "10", "01")
# positions of |00>, |10>, |01> in the two-mode product basis index 2*n_V + n_H
_SUPPORT = np.array([0, 2, 1])
PSI_PLUS = np.array([0.0, 1.0, 1.0], dtype=complex) / np.sqrt(2)
MIN_SUCCESS = 1e-15


@dataclass(frozen=True)
class ChoiMatrix:
    entries: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape != (3, 3):
            raise ValueError(f"Choi matrix must be 3x3, got {e.shape}")
        if not is_density_matrix(e, normalized=self.normalized):
            raise DomainError("Choi matrix must be Hermitian PSD with trace in (0, 1]")
        object.__setattr__(self, "entries", _frozen(e))

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def normalize(self) -> "ChoiMatrix":
        if self.normalized:
            return self
        return ChoiMatrix(self.entries / self.trace, normalized=True)

    def __getitem__(self, key) -> complex:
        """Entry lookup by basis labels, e.g. ``chi["01", "10"]``."""
        r, c = (BASIS_LABELS.index(k) for k in key)
        return complex(self.entries[r, c])


def choi_of_channel(ch: KrausChannel) -> ChoiMatrix:
    """Apply ``ch`` to the V half of |Psi+> and keep the three-state support.

    The trace of the (unnormalized) result is the channel's success
    probability on the probe.
    """
    if ch.dim != 2:
        raise DomainError(f"Choi matrices are defined for dim-2 channels, got dim {ch.dim}")
    probe = np.zeros(4, dtype=complex)
    probe[[1, 2]] = 1 / np.sqrt(2)
    eye = np.eye(2)
    full = np.zeros((4, 4), dtype=complex)
    for k in ch.kraus_ops:
        v = np.kron(k, eye) @ probe
        full += np.outer(v, v.conj())
    return ChoiMatrix(full[np.ix_(_SUPPORT, _SUPPORT)])


def channel_fidelity(chi: ChoiMatrix) -> float:
    """Overlap <Psi+|chi|Psi+> of a normalized Choi matrix with the identity channel."""
    if not chi.normalized or abs(chi.trace - 1.0) > NORM_TOL:
        raise DomainError("channel fidelity needs a normalized Choi matrix; call normalize() first")
    return float(np.vdot(PSI_PLUS, chi.entries @ PSI_PLUS).real)


def effective_transmittance(ch: KrausChannel) -> float:
    """Conditional probability that a single photon survives the channel."""
    if ch.dim != 2:
        raise DomainError(f"effective transmittance is defined for dim-2 channels, got dim {ch.dim}")
    out = ch(np.diag([0.0, 1.0]).astype(complex))
    p = float(np.trace(out).real)
    if p < MIN_SUCCESS:
        raise ZeroDivisionError("channel never succeeds on a single-photon input")
    return float(out[1, 1].real) / p


def with_real_coherence(chi: ChoiMatrix) -> ChoiMatrix:
    """Rotate the V-mode phase so that <01|chi|10> is real and non-negative."""
    c = chi.entries[2, 1]
    if c == 0:
        return chi
    # e^{i n phi} on V is diag(1, e^{i phi}, 1) over (|00>, |10>, |01>)
    u = np.diag([1.0, phase_shift(np.angle(c), 2)[1, 1], 1.0])
    rotated = u @ chi.entries @ u.conj().T
    rotated[2, 1] = rotated[1, 2] = abs(c)
    return ChoiMatrix(rotated, normalized=chi.normalized)


def matched_fidelity(tau: float, nu: float) -> float:
    """Closed-form channel fidelity of the matched protocol."""
    return 1.0 / (1.0 + nu**2 * (1.0 - tau**2) / 2.0)


def matched_transmittance(tau: float, nu: float) -> float:
    """Closed-form effective transmittance of the matched protocol."""
    return 1.0 / (1.0 + nu**2 * (1.0 - tau**2))


def naive_strategy_fidelity(tau: float, g):
    """Channel fidelity when losses are met by amplification alone (nu = 1).

    ``g`` may be an array of gains.
    """
    if not np.all(np.asarray(g) > 0):
        raise DomainError(f"gain must be positive, got {g}")
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"transmittance tau must lie in (0, 1], got {tau}")
    t2 = tau * tau
    return 0.25 * (1.0 / g + tau) ** 2 / (0.5 * (t2 + (2.0 - t2) / g**2))


def naive_optimum(tau: float) -> tuple[float, float]:
    """``(g_opt, F_max)`` of the amplification-only strategy."""
    t2 = tau * tau
    return (2.0 - t2) / tau, (3.0 - t2) / (4.0 - 2.0 * t2)
