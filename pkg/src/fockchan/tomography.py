"""Simulated coincidence tomography and maximum-likelihood Choi reconstruction.

Measurements are the six polarization projectors (Pauli eigenstates) on the
single-photon block {|10>, |01>} plus the lost-photon monitor |00><00|.
Photon counting cannot see coherences between |00> and the single-photon
block. Passive channels never produce them, so the reconstruction is
restricted to block-diagonal Choi matrices, and the iteration preserves that
structure when started from a block-diagonal state.

The estimator maximizes the Poisson likelihood with a free overall rate,
sum_k n_k log(p_k / sum_j p_j), with p_k = e_k Tr[Pi_k chi] and exposures
e_k. It uses a diluted R rho R fixed-point iteration in coordinates where
the weighted projectors sum to the identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choi import BASIS_LABELS, ChoiMatrix
from .fock import _frozen

DILUTION = 0.5
MIN_DILUTION = 1e-8
MAX_DILUTION = 1e6
GROWTH = 2.0
EXTRAPOLATION_FLOOR = 0.1
MAX_EXTRAPOLATION = 2.0**20
TOLERANCE = 1e-9
MAX_ITERATIONS = 10000
MIN_TOTAL_COUNTS = 100
WARM_START_SLACK = 1e-12
OPTIMALITY_TOL = 1e-9
STALL_WINDOW = 100
STALL_LL = 1e-14


class ReconstructionError(RuntimeError):
    """Data cannot determine the Choi matrix (rank deficient or empty)."""


class ConvergenceError(RuntimeError):
    """The fixed-point iteration hit its iteration cap."""

    def __init__(self, message: str, result: "MLResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class MeasurementSetting:
    label: str
    projector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "projector", _frozen(self.projector))


@dataclass(frozen=True)
class CountRecord:
    """Counts for one setting.

    ``counts`` is an integer for sampled data and a float for expected-value
    ("ideal") data.
    """

    setting: MeasurementSetting
    counts: float
    exposure: float = 1.0

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError(f"counts must be non-negative, got {self.counts}")
        if self.exposure <= 0:
            raise ValueError(f"exposure must be positive, got {self.exposure}")


def _proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def canonical_settings() -> list[MeasurementSetting]:
    """V, H, D, A, R, L polarization projectors plus the lost-photon monitor."""
    s = 1 / np.sqrt(2)
    kets = {
        "V": [0, 1, 0],
        "H": [0, 0, 1],
        "D": [0, s, s],
        "A": [0, s, -s],
        "R": [0, s, 1j * s],
        "L": [0, s, -1j * s],
        "loss": [1, 0, 0],
    }
    return [MeasurementSetting(label, _proj(k)) for label, k in kets.items()]


def settings_by_label() -> dict[str, MeasurementSetting]:
    return {s.label: s for s in canonical_settings()}


def expected_counts(chi: ChoiMatrix, settings, total_counts: float, exposures=None) -> np.ndarray:
    """Mean count total_counts * e_k * Tr[Pi_k chi] for each setting."""
    if exposures is None:
        exposures = np.ones(len(settings))
    rho = chi.normalize().entries
    probs = np.array([np.trace(s.projector @ rho).real for s in settings])
    return total_counts * np.asarray(exposures, dtype=float) * np.clip(probs, 0.0, None)


def ideal_records(chi: ChoiMatrix, settings=None, total_counts: float = 1.0, exposures=None) -> list[CountRecord]:
    """Noise-free records carrying the expected counts themselves."""
    settings = canonical_settings() if settings is None else settings
    exposures = np.ones(len(settings)) if exposures is None else np.asarray(exposures, dtype=float)
    mean = expected_counts(chi, settings, total_counts, exposures)
    return [CountRecord(s, float(m), float(e)) for s, m, e in zip(settings, mean, exposures)]


def simulate_counts(chi: ChoiMatrix, settings=None, total_counts: int = 100000, seed: int = 0,
                    exposures=None) -> list[CountRecord]:
    """Poisson-sampled coincidence counts; identical inputs give identical output."""
    settings = canonical_settings() if settings is None else settings
    exposures = np.ones(len(settings)) if exposures is None else np.asarray(exposures, dtype=float)
    if total_counts <= 0:
        raise ValueError(f"total_counts must be positive, got {total_counts}")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(expected_counts(chi, settings, total_counts, exposures))
    return [CountRecord(s, int(n), float(e)) for s, n, e in zip(settings, counts, exposures)]


def _inv_sqrt_psd(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v / np.sqrt(w)) @ v.conj().T


def _block_design(projectors) -> np.ndarray:
    """Linear map from block-diagonal Hermitian parameters to probabilities."""
    basis = []
    e = np.zeros((3, 3), dtype=complex)
    e[0, 0] = 1
    basis.append(e)
    for m in (
        np.array([[1, 0], [0, 0]]),
        np.array([[0, 0], [0, 1]]),
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
    ):
        b = np.zeros((3, 3), dtype=complex)
        b[1:, 1:] = m
        basis.append(b)
    return np.array([[np.trace(p @ b).real for b in basis] for p in projectors])


@dataclass
class MLResult:
    chi: ChoiMatrix
    iterations: int
    converged: bool
    log_likelihood: float
    history: list = field(default_factory=list)


def maximum_likelihood(records, tol: float = TOLERANCE, max_iterations: int = MAX_ITERATIONS,
                       dilution: float = DILUTION, check_monotone: bool = False) -> MLResult:
    """Diluted fixed-point maximum-likelihood estimate of a block-diagonal Choi matrix.

    Each step applies sigma -> M sigma M / Tr with M = (1 - d) I + d R,
    starting from d = ``dilution``. A step that would lower the likelihood is
    retried with half the dilution; accepted steps double it for the next
    iteration, which keeps convergence fast when the estimate sits on the
    boundary of the PSD cone. With ``check_monotone`` the likelihood history
    is asserted non-decreasing.

    The run converges when the diluted update moves chi by less than ``tol``
    in max norm, or when the likelihood has not grown by more than a few ulps
    over STALL_WINDOW iterations (flat directions, typically a setting with
    zero counts, where ``tol`` is below float64 resolution).

    When the least-squares fit of the frequencies is already PSD it is used
    as the first starting point and kept only if the iteration converges
    there with R <= I (the optimality condition); otherwise the iteration
    runs from the maximally mixed state. Exact data from a rank-deficient
    channel would otherwise converge only sublinearly.
    """
    records = list(records)
    n = np.array([r.counts for r in records], dtype=float)
    if n.sum() <= 0:
        raise ReconstructionError("no counts recorded")
    projectors = [r.exposure * r.setting.projector for r in records]
    if np.linalg.matrix_rank(_block_design(projectors), tol=1e-10) < 5:
        raise ReconstructionError("measurement settings do not determine the Choi matrix")

    w_half_inv = _inv_sqrt_psd(sum(projectors))
    # projectors in coordinates where they resolve the identity
    pis = np.array([w_half_inv @ p @ w_half_inv for p in projectors])
    f = n / n.sum()
    run = _FixedPoint(pis, f, w_half_inv, tol, max_iterations, dilution, check_monotone)

    warm = _linear_inversion(pis, f)
    if warm is not None:
        result, R = run(warm)
        if result.converged and np.linalg.eigvalsh(R)[-1] <= 1.0 + OPTIMALITY_TOL:
            return result
    return run(np.eye(3, dtype=complex) / 3)[0]


class _FixedPoint:
    def __init__(self, pis, f, w_half_inv, tol, max_iterations, dilution, check_monotone):
        self.pis, self.f, self.w_half_inv = pis, f, w_half_inv
        self.mask = f > 0
        self.tol, self.max_iterations = tol, max_iterations
        self.dilution, self.check_monotone = dilution, check_monotone

    def probs(self, s):
        return np.einsum("kij,ji->k", self.pis, s).real

    def loglik(self, q):
        m = self.mask
        if np.any(q[m] <= 0):
            return -np.inf
        return float(np.dot(self.f[m], np.log(q[m])))

    def to_chi(self, s):
        r = self.w_half_inv @ s @ self.w_half_inv
        r = 0.5 * (r + r.conj().T)
        return r / np.trace(r).real

    def r_operator(self, q):
        ratio = np.zeros_like(self.f)
        ratio[self.mask] = self.f[self.mask] / q[self.mask]
        return np.einsum("k,kij->ij", ratio, self.pis)

    @staticmethod
    def update(s, R, d):
        M = (1.0 - d) * np.eye(3) + d * R
        s = M @ s @ M.conj().T
        s = 0.5 * (s + s.conj().T)
        return s / np.trace(s).real

    def __call__(self, sigma) -> tuple[MLResult, np.ndarray]:
        probs, loglik, dilution = self.probs, self.loglik, self.dilution
        q = probs(sigma)
        ll = loglik(q)
        history = [ll]
        rho = self.to_chi(sigma)
        converged = False
        d = dilution
        it = 0
        R = self.r_operator(q)
        while it < self.max_iterations:
            it += 1
            R = self.r_operator(q)
            # convergence is judged on the plain diluted update
            base = self.update(sigma, R, dilution)
            if np.max(np.abs(self.to_chi(base) - rho)) < self.tol:
                converged = True
            d = max(d, dilution)
            while True:
                new = base if d == dilution else self.update(sigma, R, d)
                new_q = probs(new)
                new_ll = loglik(new_q)
                if new_ll >= ll:
                    break
                if d <= MIN_DILUTION:
                    # no ascent even for a vanishing step: stationary to float precision
                    new, new_q, new_ll = sigma, q, ll
                    converged = True
                    break
                d *= 0.5
            if not converged and new is not sigma:
                new, new_q, new_ll = _extrapolate(sigma, new, new_ll, probs, loglik)
            if self.check_monotone:
                assert new_ll >= ll, "likelihood decreased"
            sigma, q, ll = new, new_q, new_ll
            rho = self.to_chi(sigma)
            history.append(ll)
            if not converged and it >= STALL_WINDOW:
                # no representable likelihood gain left: the update tolerance is
                # unreachable along directions where the likelihood is flat
                converged = ll - history[-STALL_WINDOW - 1] <= STALL_LL * max(1.0, abs(ll))
            if converged:
                break
            d = min(d * GROWTH, MAX_DILUTION)
        result = MLResult(ChoiMatrix(rho, normalized=True), it, converged, ll, history)
        return result, self.r_operator(q)


def _linear_inversion(pis, f) -> np.ndarray | None:
    """Least-squares fit of the frequencies, or None if it is not PSD.

    For noise-free data this is the maximum-likelihood estimate itself.
    Eigenvalues within roundoff of zero are clipped.
    """
    x, *_ = np.linalg.lstsq(_block_design(pis), f, rcond=None)
    s = np.zeros((3, 3), dtype=complex)
    s[0, 0] = x[0]
    s[1:, 1:] = [[x[1], x[3] - 1j * x[4]], [x[3] + 1j * x[4], x[2]]]
    w, v = np.linalg.eigh(s)
    if w[0] < -WARM_START_SLACK:
        return None
    s = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return s / np.trace(s).real


def _extrapolate(prev, cur, cur_ll, probs, loglik):
    """Push further along the last update while the likelihood keeps rising.

    Multiplicative updates crawl when the optimum is close to the PSD
    boundary. The smallest eigenvalue may shrink by at most a factor
    EXTRAPOLATION_FLOOR per call, so the rank never collapses.
    """
    delta = cur - prev
    floor = EXTRAPOLATION_FLOOR * np.linalg.eigvalsh(cur)[0]
    best, best_q, best_ll = cur, probs(cur), cur_ll
    alpha = 2.0
    while alpha <= MAX_EXTRAPOLATION:
        trial = prev + alpha * delta
        trial = 0.5 * (trial + trial.conj().T)
        trial /= np.trace(trial).real
        if np.linalg.eigvalsh(trial)[0] < floor:
            break
        q = probs(trial)
        ll = loglik(q)
        if not ll > best_ll:
            break
        best, best_q, best_ll = trial, q, ll
        alpha *= 2.0
    return best, best_q, best_ll


def reconstruct_choi(records, tol: float = TOLERANCE, max_iterations: int = MAX_ITERATIONS) -> ChoiMatrix:
    """Maximum-likelihood Choi matrix from count records.

    Raises :class:`ReconstructionError` for empty or rank-deficient data and
    :class:`ConvergenceError` (carrying the partial result) if the iteration
    cap is reached.
    """
    result = maximum_likelihood(records, tol=tol, max_iterations=max_iterations)
    if not result.converged:
        raise ConvergenceError(f"no convergence after {result.iterations} iterations", result)
    return result.chi


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def state_fidelity(a: ChoiMatrix | np.ndarray, b: ChoiMatrix | np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))**2 between normalized states."""
    a = a.entries if isinstance(a, ChoiMatrix) else np.asarray(a)
    b = b.entries if isinstance(b, ChoiMatrix) else np.asarray(b)
    sa = _psd_sqrt(a)
    w = np.linalg.eigvalsh(sa @ b @ sa)
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def trace_distance(a: ChoiMatrix | np.ndarray, b: ChoiMatrix | np.ndarray) -> float:
    a = a.entries if isinstance(a, ChoiMatrix) else np.asarray(a)
    b = b.entries if isinstance(b, ChoiMatrix) else np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def records_to_dict(records, seed: int | None = None) -> dict:
    """Count dataset in the CLI's JSON layout."""
    return {
        "basis": list(BASIS_LABELS),
        "seed": seed,
        "records": [
            {"label": r.setting.label, "counts": r.counts, "exposure": r.exposure}
            for r in records
        ],
    }


def records_from_dict(data: dict) -> list[CountRecord]:
    """Inverse of :func:`records_to_dict`; labels must name canonical settings."""
    table = settings_by_label()
    out = []
    for item in data["records"]:
        label = item["label"]
        if label not in table:
            raise ValueError(f"unknown measurement label {label!r}")
        out.append(CountRecord(table[label], item["counts"], item.get("exposure", 1.0)))
    return out
