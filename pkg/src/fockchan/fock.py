"""Truncated single-mode Fock space: states, diagonal filters and phase shifts.

Operators and density matrices are plain complex ``numpy`` arrays of shape
``(dim, dim)`` with ``dim = N + 1``. States are wrapped in :class:`FockState`
so the truncation travels with the amplitudes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12
PSD_FLOOR = -1e-10
NORM_TOL = 1e-12
MAX_TRUNCATION = 16


class DomainError(ValueError):
    """A parameter lies outside the physical domain of an operation."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 1:
        raise DomainError(f"dimension must be a positive integer, got {dim!r}")
    if dim > MAX_TRUNCATION + 1:
        raise DomainError(f"truncation N={dim - 1} exceeds the supported maximum {MAX_TRUNCATION}")
    return int(dim)


@dataclass(frozen=True)
class FockState:
    """Possibly subnormalized pure state sum_n c_n |n> of one mode."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        _check_dim(amps.size)
        n2 = float(np.vdot(amps, amps).real)
        if not 0.0 < n2 <= 1.0 + NORM_TOL:
            raise DomainError(f"squared norm must lie in (0, 1], got {n2}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def qubit(cls, c0: complex, c1: complex, dim: int = 2) -> "FockState":
        """Superposition c0|0> + c1|1> embedded in a space of dimension ``dim``."""
        if dim < 2:
            raise DomainError("a vacuum/single-photon superposition needs dim >= 2")
        amps = np.zeros(dim, dtype=complex)
        amps[:2] = c0, c1
        return cls(amps)

    @classmethod
    def number(cls, n: int, dim: int) -> "FockState":
        amps = np.zeros(dim, dtype=complex)
        amps[n] = 1.0
        return cls(amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "FockState":
        return FockState(self.amplitudes / np.sqrt(self.norm_squared))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def diagonal_filter(weights) -> np.ndarray:
    """Diagonal operator sum_n w_n |n><n|; off-diagonals are exactly zero."""
    w = np.asarray(weights, dtype=complex).ravel()
    _check_dim(w.size)
    return _frozen(np.diag(w))


def attenuator_filter(nu: float, dim: int) -> np.ndarray:
    """Noiseless attenuation |n> -> nu**n |n> on the first ``dim`` Fock states."""
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"attenuation nu must lie in (0, 1], got {nu}")
    dim = _check_dim(dim)
    return diagonal_filter(float(nu) ** np.arange(dim))


def amplifier_filter(g: float, n_max: int) -> np.ndarray:
    """Normalized noiseless amplifier G_N(g) = g**-N sum_n g**n |n><n|.

    The largest diagonal entry is exactly 1, so the filter is a valid
    heralded operation. Gains below one are rejected; use
    :func:`attenuator_filter` for that.
    """
    if not g >= 1.0:
        raise DomainError(f"amplifier gain must be >= 1, got {g}")
    if int(n_max) != n_max or n_max < 0:
        raise DomainError(f"n_max must be a non-negative integer, got {n_max!r}")
    dim = _check_dim(int(n_max) + 1)
    # g**(n - N) keeps the top entry at exactly 1.0
    return diagonal_filter(float(g) ** (np.arange(dim) - (dim - 1)))


def phase_shift(phi: float, dim: int) -> np.ndarray:
    """Photon-number phase shift exp(i n phi)."""
    dim = _check_dim(dim)
    phi = float(phi) % (2 * np.pi)
    return diagonal_filter(np.exp(1j * phi * np.arange(dim)))


def apply_filter(op: np.ndarray, rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(op @ rho @ op^dag, trace)`` for a single (filter) operator."""
    op = np.asarray(op)
    rho = np.asarray(rho)
    if op.shape != rho.shape or op.ndim != 2:
        raise ValueError(f"dimension mismatch: operator {op.shape} vs state {rho.shape}")
    out = op @ rho @ op.conj().T
    out = 0.5 * (out + out.conj().T)
    return out, float(np.trace(out).real)


def dephase(rho: np.ndarray) -> np.ndarray:
    """Remove all Fock-basis coherences."""
    return np.diag(np.diag(rho))


def embed(rho: np.ndarray, dim: int) -> np.ndarray:
    """Zero-pad a density matrix into a larger truncation."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] > dim:
        raise ValueError(f"cannot embed dim {rho.shape[0]} into dim {dim}")
    out = np.zeros((dim, dim), dtype=complex)
    out[: rho.shape[0], : rho.shape[1]] = rho
    return out


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def is_density_matrix(rho: np.ndarray, normalized: bool = False) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if hermiticity_error(rho) > HERMITIAN_TOL:
        return False
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < PSD_FLOOR:
        return False
    tr = float(np.trace(rho).real)
    if normalized:
        return abs(tr - 1.0) <= NORM_TOL
    return 0.0 < tr <= 1.0 + NORM_TOL


def check_density_matrix(rho: np.ndarray, normalized: bool = False) -> np.ndarray:
    """Validate a (possibly conditional) density matrix and return it as an array."""
    rho = np.asarray(rho, dtype=complex)
    if not is_density_matrix(rho, normalized=normalized):
        kind = "normalized density matrix" if normalized else "density matrix"
        raise DomainError(f"input is not a valid {kind}")
    return rho


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-ensemble random state; handy for property checks."""
    rank = dim if rank is None else rank
    x = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real
