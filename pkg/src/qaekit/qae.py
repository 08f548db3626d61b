"""Quantum auto-encoder: loss, training, compression and spectral read-out.

The first ``N - K`` qubits are the trash register that the encoder drives to
``|0>``; the last ``K`` qubits hold the latent state. With qubit 0 as the most
significant bit, the kept subspace ``|0>^(N-K) (x) C^(2^K)`` consists of the
first ``2^K`` basis indices.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .circuits import (
    ParamCircuit,
    build_hardware_efficient,
    evolve_matrix,
    expectation_and_gradient,
    random_params,
    unitary_fast,
)
from .constants import TOL
from .errors import ConfigError, DegenerateCompressionError, DimensionError
from .linalg import DensityOperator, PureState, SpectralDecomposition, as_matrix, eig_hermitian, num_qubits_of


@dataclass(frozen=True)
class QaeConfig:
    num_qubits: int
    latent_qubits: int
    layers: int = 5
    learning_rate: float = 0.8
    iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.latent_qubits < self.num_qubits:
            raise ConfigError(f"need 1 <= K < N, got K={self.latent_qubits}, N={self.num_qubits}", "latent_qubits")
        if self.layers < 1:
            raise ConfigError("must be >= 1", "layers")
        if not self.learning_rate > 0:
            raise ConfigError("must be > 0", "learning_rate")
        if self.iterations < 0:
            raise ConfigError("must be >= 0", "iterations")

    def replace(self, **changes) -> "QaeConfig":
        return QaeConfig(**{**asdict(self), **changes})


def projector_mg(num_qubits: int, latent_qubits: int) -> np.ndarray:
    """``I - (|0><0|)^(N-K) (x) I_K``: projector onto the discarded subspace."""
    if not 1 <= latent_qubits < num_qubits:
        raise ConfigError(f"need 1 <= K < N, got K={latent_qubits}, N={num_qubits}")
    diag = np.ones(2**num_qubits)
    diag[: 2**latent_qubits] = 0.0
    return np.diag(diag).astype(complex)


def kept_projector(num_qubits: int, latent_qubits: int) -> np.ndarray:
    return np.eye(2**num_qubits, dtype=complex) - projector_mg(num_qubits, latent_qubits)


def _loss_from_evolved(evolved: np.ndarray, latent_qubits: int) -> float:
    return float(np.clip(np.sum(np.real(np.diag(evolved)[2**latent_qubits:])), 0.0, 1.0))


def qae_loss(circ: ParamCircuit, rho, latent_qubits: int) -> float:
    """Weight of ``U rho U^H`` outside the kept subspace."""
    m = as_matrix(rho)
    if m.shape[0] != 2**circ.num_qubits:
        raise DimensionError(f"state dimension {m.shape[0]} does not match {circ.num_qubits} qubits")
    return _loss_from_evolved(evolve_matrix(circ, m), latent_qubits)


class GradientDescent:
    """Fixed-step descent ``theta <- theta - lr * grad``."""

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return params - self.learning_rate * grad


Optimizer = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class QaeModel:
    config: QaeConfig
    circuit: ParamCircuit
    final_loss: float
    loss_trace: tuple[float, ...] = field(default_factory=tuple)

    @property
    def latent_qubits(self) -> int:
        return self.config.latent_qubits

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "circuit": self.circuit.to_dict(),
            "final_loss": self.final_loss,
            "loss_trace": list(self.loss_trace),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QaeModel":
        return cls(
            QaeConfig(**data["config"]),
            ParamCircuit.from_dict(data["circuit"]),
            float(data["final_loss"]),
            tuple(float(x) for x in data["loss_trace"]),
        )

    def save(self, path) -> None:
        write_json_atomic(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "QaeModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def write_json_atomic(path, payload) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=1)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def train(
    rho,
    config: QaeConfig,
    *,
    init_params: Optional[np.ndarray] = None,
    optimizer: Optional[Optimizer] = None,
) -> QaeModel:
    """Minimise the QAE loss by parameter-shift gradient descent.

    ``init_params`` warm-starts the encoder; otherwise parameters are drawn
    uniformly from ``[0, 2*pi)`` with ``config.seed``.
    """
    m = as_matrix(rho)
    if m.shape[0] != 2**config.num_qubits:
        raise DimensionError(f"state has dimension {m.shape[0]}, config expects {config.num_qubits} qubits")
    circ = build_hardware_efficient(config.num_qubits, config.layers)
    if init_params is None:
        params = random_params(circ.num_params, config.seed)
    else:
        params = np.array(init_params, dtype=float)
    step = optimizer or GradientDescent(config.learning_rate).step
    obs = projector_mg(config.num_qubits, config.latent_qubits)
    trace = []
    for _ in range(config.iterations):
        loss, grad = expectation_and_gradient(circ.with_params(params), m, obs)
        trace.append(loss)
        params = step(params, grad)
    circ = circ.with_params(params)
    final = qae_loss(circ, m, config.latent_qubits)
    trace.append(final)
    return QaeModel(config, circ, final, tuple(trace))


@dataclass(frozen=True, eq=False)
class CompressedState:
    latent_qubits: int
    state: DensityOperator
    success_prob: float


def compress(model: QaeModel, rho) -> CompressedState:
    """Project the trash register onto ``|0>``, renormalise, trace it out."""
    m = as_matrix(rho)
    k = model.latent_qubits
    evolved = evolve_matrix(model.circuit, m)
    block = evolved[: 2**k, : 2**k]
    p = float(np.real(np.trace(block)))
    if p < TOL.success_prob:
        raise DegenerateCompressionError(f"kept-subspace weight {p:.3e} is numerically zero")
    block = block / p
    block = 0.5 * (block + block.conj().T)
    return CompressedState(k, DensityOperator(block, validate=False), p)


@dataclass(frozen=True, eq=False)
class Readout:
    """Spectrum of the compressed state plus the decoded ``N``-qubit eigenvectors."""

    spectrum: SpectralDecomposition
    vectors: np.ndarray  # columns are U^H |0>^(N-K) |w_i>

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def states(self) -> list[PureState]:
        return [PureState(self.vectors[:, i], validate=False) for i in range(self.vectors.shape[1])]


def decode_vectors(circ: ParamCircuit, latent_vectors: np.ndarray) -> np.ndarray:
    """``U^H (|0>^(N-K) (x) v)`` for every column ``v``."""
    d = 2**circ.num_qubits
    r = latent_vectors.shape[0]
    padded = np.zeros((d, latent_vectors.shape[1]), dtype=complex)
    padded[:r] = latent_vectors
    return unitary_fast(circ).conj().T @ padded


def spectral_readout(model: QaeModel, compressed: CompressedState) -> Readout:
    if compressed.latent_qubits != model.latent_qubits:
        raise DimensionError("compressed state and model disagree on the latent size")
    spectrum = eig_hermitian(compressed.state.matrix)
    w = np.clip(spectrum.eigenvalues, 0.0, None)
    w = w / np.sum(w)
    spectrum = SpectralDecomposition(w, spectrum.vectors)
    return Readout(spectrum, decode_vectors(model.circuit, spectrum.vectors))


def reconstructed_state(readout: Readout) -> DensityOperator:
    """``sum_i lambda_i |phi_i><phi_i|`` built from a read-out."""
    v = readout.vectors
    m = (v * readout.eigenvalues) @ v.conj().T
    return DensityOperator(0.5 * (m + m.conj().T), validate=False)


def readout_for(rho, config: QaeConfig, **train_kwargs) -> tuple[QaeModel, Readout]:
    """Train on ``rho`` and return the model with its spectral read-out."""
    model = train(rho, config, **train_kwargs)
    return model, spectral_readout(model, compress(model, rho))


def latent_qubits_for_rank(rank: int) -> int:
    return max(1, int(np.ceil(np.log2(max(rank, 1)))))


def state_num_qubits(rho) -> int:
    return num_qubits_of(as_matrix(rho).shape[0])
