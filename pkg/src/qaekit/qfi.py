"""Quantum Fisher information from a finite-difference fidelity surrogate.

``I_tau = 8 (1 - F(rho_t, rho_{t+tau})) / tau^2`` with ``rho_t = W(t) rho W(t)^H``
and ``W(t) = exp(-i t G)``. The probe is the pure state ``U(gamma)|0..0>``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .circuits import apply_to_state, build_hardware_efficient, expectation_and_gradient, random_params
from .errors import ConfigError, ProtocolError
from .fidelity import estimate_fidelity_qae, estimate_fidelity_resource_efficient
from .linalg import PureState, as_matrix, as_vector, eig_hermitian, uhlmann_fidelity
from .pauli import PauliHamiltonian, check_matches
from .qae import QaeConfig

log = logging.getLogger(__name__)

FIDELITY_METHODS = ("exact", "qae", "qae-resource-efficient")


def phase_unitary(g: PauliHamiltonian, theta: float) -> np.ndarray:
    """``exp(-i theta G)``."""
    m = g.matrix()
    if g.is_diagonal():
        return np.diag(np.exp(-1j * theta * np.real(np.diag(m))))
    spec = eig_hermitian(m)
    return (spec.vectors * np.exp(-1j * theta * spec.eigenvalues)) @ spec.vectors.conj().T


def encode_phase(rho, g: PauliHamiltonian, theta: float) -> np.ndarray:
    m = as_matrix(rho)
    check_matches(g, m.shape[0])
    w = phase_unitary(g, theta)
    out = w @ m @ w.conj().T
    return 0.5 * (out + out.conj().T)


def exact_qfi_pure(probe, g: PauliHamiltonian) -> float:
    """``4 Var(G)`` in the pure state ``probe``."""
    v = as_vector(probe)
    check_matches(g, v.shape[0])
    gv = g.matrix() @ v
    mean = float(np.real(np.vdot(v, gv)))
    second = float(np.real(np.vdot(gv, gv)))
    return max(4.0 * (second - mean * mean), 0.0)


@dataclass(frozen=True)
class QfiValue:
    value: float
    fidelity: float
    band: float
    delta: float
    clamped: bool
    method: str
    info: dict = field(default_factory=dict, compare=False)


def surrogate_from_fidelity(f: float, tau: float) -> float:
    return 8.0 * (1.0 - f) / tau**2


def qfi_surrogate(rho_theta, rho_theta_tau, tau: float, method: str = "exact", qae: Optional[QaeConfig] = None,
                  *, init_params=None) -> QfiValue:
    """Plug a fidelity estimate into the finite-difference surrogate.

    QAE methods attach the band ``8 sqrt(2 delta) / tau^2``. Estimates above 1
    are clamped to 1 so the surrogate stays non-negative.
    """
    if not tau > 0:
        raise ConfigError("must be > 0", "tau")
    if method not in FIDELITY_METHODS:
        raise ConfigError(f"must be one of {FIDELITY_METHODS}", "fidelity_method")
    info = {}
    if method == "exact":
        f_raw, delta = uhlmann_fidelity(rho_theta, rho_theta_tau), 0.0
    else:
        if qae is None:
            raise ConfigError("QAE config required", "qae")
        if method == "qae":
            est = estimate_fidelity_qae(rho_theta, rho_theta_tau, qae, init_params=init_params)
            info["params"] = est.info["params"]
        else:
            est = estimate_fidelity_resource_efficient(rho_theta, rho_theta_tau, qae, qae)
        f_raw, delta = est.info["raw_value"], est.delta
    clamped = f_raw > 1.0
    if clamped:
        log.info("fidelity estimate %.3e above 1 clamped before the surrogate", f_raw - 1.0)
    f = min(max(f_raw, 0.0), 1.0)
    band = 8.0 * np.sqrt(2.0 * delta) / tau**2 if method != "exact" else 0.0
    return QfiValue(surrogate_from_fidelity(f, tau), f, float(band), delta, bool(clamped), method, info)


# --- probe optimisation -------------------------------------------------------


@dataclass(frozen=True)
class QfiConfig:
    probe_qubits: int
    generator: PauliHamiltonian
    theta: float = 0.1
    tau: float = 1e-2
    outer_iterations: int = 75
    outer_lr: float = 0.01
    ansatz_layers: int = 5
    qae: Optional[QaeConfig] = None
    fidelity_method: str = "exact"
    seed: int = 1
    fd_step: float = 1e-3
    warm_start: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("must be > 0", "tau")
        if self.generator.num_qubits != self.probe_qubits:
            raise ConfigError("generator must act on the probe qubits", "generator")
        if self.outer_iterations < 0:
            raise ConfigError("must be >= 0", "outer_iterations")
        if not self.outer_lr > 0:
            raise ConfigError("must be > 0", "outer_lr")
        if self.fidelity_method not in FIDELITY_METHODS:
            raise ConfigError(f"must be one of {FIDELITY_METHODS}", "fidelity_method")
        if not self.fd_step > 0:
            raise ConfigError("must be > 0", "fd_step")
        if self.qae is None and self.probe_qubits > 1:
            object.__setattr__(self, "qae", QaeConfig(self.probe_qubits, min(2, self.probe_qubits - 1), 4, 0.1, 200, self.seed))
        if self.fidelity_method != "exact" and (self.qae is None or self.qae.num_qubits != self.probe_qubits):
            raise ConfigError(f"inner QAE must act on {self.probe_qubits} qubits", "qae.num_qubits")

    def replace(self, **changes) -> "QfiConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("generator", "qae")}
        d["generator"] = self.generator.to_dict()
        d["qae"] = None if self.qae is None else asdict(self.qae)
        return d


@dataclass
class QfiResult:
    params: np.ndarray
    rows: list[dict] = field(default_factory=list)
    status: str = "ok"

    @property
    def final_qfi(self) -> float:
        return self.rows[-1]["qfi_exact"]


def _probe(circ, params) -> np.ndarray:
    d = 2**circ.num_qubits
    zero = np.zeros(d, dtype=complex)
    zero[0] = 1.0
    return apply_to_state(circ, zero, params)


def _pair(config: QfiConfig, psi: np.ndarray):
    rho = np.outer(psi, psi.conj())
    a = encode_phase(rho, config.generator, config.theta)
    b = encode_phase(rho, config.generator, config.theta + config.tau)
    return a, b


def _surrogate_at(config: QfiConfig, circ, params, init_qae=None) -> QfiValue:
    a, b = _pair(config, _probe(circ, params))
    return qfi_surrogate(a, b, config.tau, config.fidelity_method, config.qae, init_params=init_qae)


def _oracle_gradient(config: QfiConfig, circ) -> np.ndarray:
    """Exact gradient of the surrogate with exact fidelity for a pure probe.

    ``F^2 = Tr(rho V rho V^H)`` with ``V = exp(-i tau G)`` (the phase ``W(theta)``
    commutes with ``V`` and drops out), so ``dF^2 = Tr(drho (V rho V^H + V^H rho V))``.
    """
    psi = _probe(circ, None)
    rho = np.outer(psi, psi.conj())
    v = phase_unitary(config.generator, config.tau)
    obs = v @ rho @ v.conj().T + v.conj().T @ rho @ v
    d = rho.shape[0]
    zero = np.zeros((d, d), dtype=complex)
    zero[0, 0] = 1.0
    _, dF2 = expectation_and_gradient(circ, zero, obs)
    f = max(abs(np.vdot(psi, v @ psi)), 1e-300)
    return -8.0 * dF2 / (2.0 * f) / config.tau**2


def _fd_component(args):
    config, params, index, init_qae = args
    circ = build_hardware_efficient(config.probe_qubits, config.ansatz_layers)
    h = config.fd_step
    up = params.copy()
    up[index] += h
    dn = params.copy()
    dn[index] -= h
    return (_surrogate_at(config, circ, up, init_qae).value - _surrogate_at(config, circ, dn, init_qae).value) / (2 * h)


def _fd_gradient(config: QfiConfig, params: np.ndarray, init_qae, pool) -> np.ndarray:
    jobs = [(config, params, i, init_qae) for i in range(params.size)]
    if pool is None:
        return np.array([_fd_component(j) for j in jobs])
    return np.array(list(pool.map(_fd_component, jobs)))


def optimize_probe(config: QfiConfig, *, init_params=None, callback=None) -> QfiResult:
    """Gradient ascent on the surrogate ``I_tau`` over the probe parameters.

    With exact fidelity the gradient is analytic. With a QAE estimator it is a
    central finite difference; every evaluation warm-starts the QAE from the
    same encoder so the estimate is a smooth function of the probe parameters.
    """
    circ = build_hardware_efficient(config.probe_qubits, config.ansatz_layers)
    gamma = random_params(circ.num_params, config.seed) if init_params is None else np.array(init_params, float)
    result = QfiResult(gamma)
    theta_qae = None
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 and config.fidelity_method != "exact" else None
    try:
        for t in range(config.outer_iterations + 1):
            c = circ.with_params(gamma)
            psi = _probe(c, None)
            init = theta_qae if config.warm_start else None
            try:
                val = _surrogate_at(config, c, None, init)
            except ProtocolError as exc:
                log.warning("iteration %d: estimator failed (%s); retrying with a fresh QAE seed", t, exc)
                retry = config.replace(qae=config.qae.replace(seed=config.qae.seed + 1000 + t))
                try:
                    val = _surrogate_at(retry, c, None, None)
                except ProtocolError as exc2:
                    log.error("iteration %d: estimator failed again (%s); aborting", t, exc2)
                    result.status = "aborted"
                    break
            if "params" in val.info and config.warm_start:
                theta_qae = np.array(val.info["params"])
            a, b = _pair(config, psi)
            i_exact_fid = surrogate_from_fidelity(min(uhlmann_fidelity(a, b), 1.0), config.tau)
            row = {
                "iteration": t,
                "qfi_surrogate": val.value,
                "qfi_surrogate_exact_fidelity": i_exact_fid,
                "qfi_exact": exact_qfi_pure(psi, config.generator),
                "delta": val.delta,
                "band": val.band,
                "clamped": val.clamped,
            }
            result.rows.append(row)
            if callback is not None:
                callback(row)
            if t == config.outer_iterations:
                break
            if config.fidelity_method == "exact":
                grad = _oracle_gradient(config, c)
            else:
                grad = _fd_gradient(config, gamma, theta_qae, pool)
            gamma = gamma + config.outer_lr * grad
    finally:
        if pool is not None:
            pool.shutdown()
    result.params = gamma
    return result


def ghz_state(num_qubits: int) -> PureState:
    v = np.zeros(2**num_qubits, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return PureState(v)
