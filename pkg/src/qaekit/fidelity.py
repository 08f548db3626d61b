"""Fidelity estimation from QAE spectral read-outs, plus SSFB baselines.

``W_ij = sqrt(l_i l_j) <phi_i|kappa|phi_j>`` and ``F = Tr sqrt(W)``. Here and
throughout, fidelity means the root fidelity ``||sqrt(rho) sqrt(kappa)||_1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import TOL
from .errors import ConfigError, DegenerateCompressionError, DimensionError, ProtocolError
from .linalg import DensityOperator, PureState, as_matrix, num_qubits_of, trace_sqrt_psd, uhlmann_fidelity
from .qae import QaeConfig, Readout, compress, spectral_readout, train

log = logging.getLogger(__name__)

METHODS = ("qae", "qae-resource-efficient", "ssfb", "exact")


# --- noisy test states -------------------------------------------------------


def psi_zero(num_qubits: int) -> PureState:
    return PureState.basis(num_qubits, 0)


def psi_one(num_qubits: int, seed) -> PureState:
    """Random superposition of the ``N`` one-hot basis states ``|10..0>, ..., |0..01>``.

    Amplitudes are complex Gaussian, normalised.
    """
    rng = np.random.default_rng(seed)
    alpha = rng.normal(size=num_qubits) + 1j * rng.normal(size=num_qubits)
    alpha /= np.linalg.norm(alpha)
    amps = np.zeros(2**num_qubits, dtype=complex)
    for q in range(num_qubits):
        amps[1 << (num_qubits - 1 - q)] = alpha[q]
    return PureState(amps)


@dataclass(frozen=True, eq=False)
class NoisyStateSpec:
    base: PureState
    p: float
    r: int
    a: float
    seed: Optional[int] = None

    def __post_init__(self):
        d = self.base.amplitudes.shape[0]
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("must lie in [0, 1]", "p")
        if not 1 <= self.r <= d:
            raise ConfigError(f"need 1 <= r <= {d}", "r")


def diagonal_noise(dim: int, r: int, a: float) -> np.ndarray:
    """``V(r)``: ``V_ii ~ 1.5^(-a i)`` for ``i = 1..r`` (1-based), unit trace."""
    if not 1 <= r <= dim:
        raise ConfigError(f"need 1 <= r <= {dim}", "r")
    v = np.zeros(dim)
    v[:r] = 1.5 ** (-a * np.arange(1, r + 1))
    return np.diag(v / v.sum()).astype(complex)


def build_noisy_state(spec: NoisyStateSpec) -> DensityOperator:
    psi = spec.base.amplitudes
    m = spec.p * np.outer(psi, psi.conj()) + (1 - spec.p) * diagonal_noise(psi.shape[0], spec.r, spec.a)
    return DensityOperator(m)


def noisy_state(base: PureState, p: float, r: int, a: float) -> DensityOperator:
    return build_noisy_state(NoisyStateSpec(base, p, r, a))


# --- W matrix ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WMatrix:
    entries: np.ndarray

    @property
    def rank(self) -> int:
        return self.entries.shape[0]

    def fidelity(self) -> float:
        return trace_sqrt_psd(self.entries, clamp_tol=TOL.w_clamp)


def w_matrix(eigenvalues, vectors: np.ndarray, kappa) -> WMatrix:
    """``sqrt(l_i l_j) <v_i|kappa|v_j>`` for the columns ``v_i`` of ``vectors``."""
    k = as_matrix(kappa)
    if vectors.shape[0] != k.shape[0]:
        raise DimensionError("eigenvectors and kappa have different dimensions")
    a = vectors * np.sqrt(np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None))
    w = a.conj().T @ k @ a
    return WMatrix(0.5 * (w + w.conj().T))


def w_matrix_two_sided(readout_rho: Readout, readout_kappa: Readout) -> WMatrix:
    """``W~_ij = sum_k mu_k sqrt(l_i l_j) <phi_i|Phi_k><Phi_k|phi_j>`` using only overlaps."""
    overlaps = readout_rho.vectors.conj().T @ readout_kappa.vectors  # <phi_i|Phi_k>
    sl = np.sqrt(np.clip(np.asarray(readout_rho.eigenvalues, dtype=float), 0.0, None))
    w = (overlaps * np.clip(np.asarray(readout_kappa.eigenvalues, dtype=float), 0.0, None)) @ overlaps.conj().T
    w = sl[:, None] * w * sl[None, :]
    return WMatrix(0.5 * (w + w.conj().T))


# --- estimates ---------------------------------------------------------------


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    delta: float
    lower: float
    upper: float
    method: str
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= x <= self.upper + slack


def _clip_unit(x: float) -> float:
    return float(min(max(x, 0.0), 1.0))


def exact_estimate(rho, kappa) -> FidelityEstimate:
    f = uhlmann_fidelity(rho, kappa)
    return FidelityEstimate(f, 0.0, f, f, "exact")


def _check_pair(rho, kappa) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_matrix(rho), as_matrix(kappa)
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _readout(rho: np.ndarray, config: QaeConfig, init_params=None):
    model = train(rho, config, init_params=init_params)
    try:
        readout = spectral_readout(model, compress(model, rho))
    except DegenerateCompressionError as exc:
        raise ProtocolError(f"QAE compression failed: {exc}") from exc
    return model, readout


def estimate_fidelity_qae(rho, kappa, config: QaeConfig, *, init_params=None) -> FidelityEstimate:
    """Train a QAE on ``rho`` and estimate ``F(rho, kappa) = Tr sqrt(W^)``.

    The band is ``value -/+ sqrt(2 delta)`` with ``delta`` the achieved loss.
    """
    a, b = _check_pair(rho, kappa)
    model, ro = _readout(a, config, init_params)
    raw = w_matrix(ro.eigenvalues, ro.vectors, b).fidelity()
    value = _clip_unit(raw)
    delta = model.final_loss
    band = float(np.sqrt(2 * delta))
    info = {
        "raw_value": raw,
        "latent_qubits": config.latent_qubits,
        "sub_capacity": bool(DensityOperator(a, validate=False).rank() > 2**config.latent_qubits),
        "params": model.circuit.params.tolist(),
    }
    return FidelityEstimate(value, delta, value - band, value + band, "qae", info)


def estimate_fidelity_resource_efficient(
    rho, kappa, config_rho: QaeConfig, config_kappa: QaeConfig, *, init_rho=None, init_kappa=None
) -> FidelityEstimate:
    """Train QAEs on both states and combine the two read-outs via pure-state overlaps.

    The reported band is ``sqrt(2 max(d1, d2))``; ``info["provable_band"]`` holds
    ``sqrt(2 d1) + sqrt(2 d2)``, a band that follows from the triangle
    inequality for the Bures angle.
    """
    a, b = _check_pair(rho, kappa)
    m1, r1 = _readout(a, config_rho, init_rho)
    m2, r2 = _readout(b, config_kappa, init_kappa)
    raw = w_matrix_two_sided(r1, r2).fidelity()
    value = _clip_unit(raw)
    d1, d2 = m1.final_loss, m2.final_loss
    delta = max(d1, d2)
    band = float(np.sqrt(2 * delta))
    info = {
        "raw_value": raw,
        "delta_rho": d1,
        "delta_kappa": d2,
        "provable_band": float(np.sqrt(2 * d1) + np.sqrt(2 * d2)),
    }
    return FidelityEstimate(value, delta, value - band, value + band, "qae-resource-efficient", info)


# --- sub/super fidelity ------------------------------------------------------


def _safe_sqrt(x: float, what: str) -> float:
    if x < 0:
        if x < -TOL.radicand:
            raise ValueError(f"{what} radicand {x:.3e} is negative beyond roundoff")
        return 0.0
    return float(np.sqrt(x))


def sub_fidelity(rho, kappa) -> float:
    """``Tr(rk) + sqrt(2((Tr rk)^2 - Tr(rkrk)))``; a lower bound on ``F^2``."""
    a, b = _check_pair(rho, kappa)
    rk = a @ b
    t = float(np.real(np.trace(rk)))
    t2 = float(np.real(np.trace(rk @ rk)))
    return t + _safe_sqrt(2 * (t * t - t2), "sub-fidelity")


def super_fidelity(rho, kappa) -> float:
    """``Tr(rk) + sqrt((1 - Tr r^2)(1 - Tr k^2))``; an upper bound on ``F^2``."""
    a, b = _check_pair(rho, kappa)
    t = float(np.real(np.trace(a @ b)))
    pa = float(np.real(np.trace(a @ a)))
    pb = float(np.real(np.trace(b @ b)))
    return t + _safe_sqrt((1 - pa) * (1 - pb), "super-fidelity")


def ssfb_interval(rho, kappa) -> tuple[float, float]:
    """The SSFB bracket translated to root fidelity: ``(sqrt(F_L), sqrt(F_U))``."""
    lo, hi = sub_fidelity(rho, kappa), super_fidelity(rho, kappa)
    return float(np.sqrt(max(lo, 0.0))), float(np.sqrt(min(max(hi, 0.0), 1.0)))


def ssfb_estimate(rho, kappa) -> FidelityEstimate:
    lo, hi = ssfb_interval(rho, kappa)
    return FidelityEstimate(0.5 * (lo + hi), 0.0, lo, hi, "ssfb")


def state_num_qubits(rho) -> int:
    return num_qubits_of(as_matrix(rho).shape[0])
