"""Variational Gibbs-state preparation with QAE eigenvalue read-out.

The variational state is ``rho(gamma) = Tr_A U(gamma)|0..0><0..0|U(gamma)^H`` with
the ancilla register on the leading qubits. The objective is the truncated free
energy ``F_R = Tr(H rho) - S_R(rho) / beta`` with
``S_R = sum_j C_j Tr(rho^(j+1))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .circuits import ParamCircuit, build_hardware_efficient, evolve_matrix, expectation_and_gradient, random_params
from .errors import ConfigError, DegenerateCompressionError, DimensionError
from .linalg import DensityOperator, as_matrix, eig_hermitian, trace_out, uhlmann_fidelity
from .pauli import PauliHamiltonian, check_matches
from .qae import QaeConfig, compress, reconstructed_state, spectral_readout, train

log = logging.getLogger(__name__)

EIGEN_SOURCES = ("qae", "exact-oracle")


def exact_gibbs(h: PauliHamiltonian, beta: float) -> DensityOperator:
    """``exp(-beta H) / Tr exp(-beta H)`` by diagonalisation."""
    if not beta > 0:
        raise ConfigError("beta must be > 0", "beta")
    spec = eig_hermitian(h.matrix())
    e = spec.eigenvalues
    w = np.exp(-beta * (e - e.min()))
    w /= w.sum()
    m = (spec.vectors * w) @ spec.vectors.conj().T
    return DensityOperator(0.5 * (m + m.conj().T), validate=False)


def truncation_fractions(R: int) -> list[Fraction]:
    if R < 1:
        raise ConfigError("truncation order must be >= 1", "truncation")
    c = [sum(Fraction(1, k) for k in range(1, R + 1))]
    for j in range(1, R + 1):
        c.append(sum(Fraction(math.comb(k, j) * (-1) ** j, k) for k in range(j, R + 1)))
    return c


def truncation_coefficients(R: int) -> np.ndarray:
    """``C_0..C_R`` of the truncated entropy."""
    return np.array([float(x) for x in truncation_fractions(R)])


def c_max(R: int) -> float:
    """``max_{j>=1} |C_j|``; ``C_0`` multiplies ``Tr(rho) = 1`` and never contributes to errors."""
    return float(np.max(np.abs(truncation_coefficients(R)[1:])))


def trace_powers(eigenvalues, R: int) -> np.ndarray:
    """``Tr(rho^(j+1)) = sum_i l_i^(j+1)`` for ``j = 0..R``."""
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    return np.array([np.sum(lam ** (j + 1)) for j in range(R + 1)])


def truncated_entropy(rho, R: int) -> float:
    lam = np.linalg.eigvalsh(as_matrix(rho))
    return float(truncation_coefficients(R) @ trace_powers(lam, R))


def truncated_free_energy(rho, h: PauliHamiltonian, beta: float, R: int, powers=None) -> float:
    m = as_matrix(rho)
    check_matches(h, m.shape[0])
    if powers is None:
        powers = trace_powers(np.linalg.eigvalsh(m), R)
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (R + 1,):
        raise DimensionError(f"need {R + 1} trace powers, got {powers.shape}")
    energy = float(np.real(np.trace(h.matrix() @ m)))
    return energy - float(truncation_coefficients(R) @ powers) / beta


def free_energy_flipped_r2(rho, h: PauliHamiltonian, beta: float) -> float:
    """``Tr(H rho) - 2 Tr(rho^2)/beta - (Tr(rho^3) + 3)/(2 beta)``.

    An R=2 objective with the entropy signs flipped against the series form;
    kept for comparison only.
    """
    m = as_matrix(rho)
    p2 = float(np.real(np.trace(m @ m)))
    p3 = float(np.real(np.trace(m @ m @ m)))
    energy = float(np.real(np.trace(h.matrix() @ m)))
    return energy - 2 * p2 / beta - (p3 + 3) / (2 * beta)


def free_energy(rho, h: PauliHamiltonian, beta: float) -> float:
    """Untruncated ``Tr(H rho) - S(rho)/beta``."""
    m = as_matrix(rho)
    lam = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    lam = lam[lam > 0]
    s = float(-np.sum(lam * np.log(lam)))
    return float(np.real(np.trace(h.matrix() @ m))) - s / beta


def prepare_variational_state(circ: ParamCircuit, system_qubits: int, ancilla_qubits: int, params=None) -> DensityOperator:
    if circ.num_qubits != system_qubits + ancilla_qubits:
        raise DimensionError(f"circuit has {circ.num_qubits} qubits, expected {system_qubits}+{ancilla_qubits}")
    d = 2**circ.num_qubits
    zero = np.zeros((d, d), dtype=complex)
    zero[0, 0] = 1.0
    full = evolve_matrix(circ, zero, params)
    m = trace_out(full, range(ancilla_qubits, circ.num_qubits))
    return DensityOperator(0.5 * (m + m.conj().T), validate=False)


# --- bounds ------------------------------------------------------------------


def default_delta(R: int, iters: int = 200) -> float:
    """Largest ``D`` in ``(0, 1/e)`` with ``-D ln D < (1-D)^(R+1)/(R+1)``, by bisection."""

    def ok(x):
        return -x * math.log(x) < (1 - x) ** (R + 1) / (R + 1)

    lo, hi = 1e-300, math.exp(-1)
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def lemma4_lower_bound(epsilon1, delta, beta, r, R, Delta=None, Cmax=None, form: str = "split") -> float:
    """Fidelity lower bound for the prepared state. May be negative (vacuous).

    ``form="split"`` keeps the truncation and optimisation terms apart:
    ``1 - sqrt(2 beta r/(R+1) (1-D)^(R+1) + 2 beta eps1 + 4 Cmax delta/(1 - 2 delta))``.
    ``form="combined"`` folds them into one ``eps``: ``1 - sqrt(2 beta eps + Cmax delta/(1 - delta))`` with
    ``eps = eps1 + 2r/(R+1) (1-D)^(R+1)``.
    """
    if delta >= 1 or delta < 0:
        raise ConfigError("delta must lie in [0, 1)", "delta")
    Delta = default_delta(R) if Delta is None else Delta
    Cmax = c_max(R) if Cmax is None else Cmax
    tail = r / (R + 1) * (1 - Delta) ** (R + 1)
    if form == "split":
        if delta >= 0.5:
            return -math.inf
        radicand = 2 * beta * tail + 2 * beta * epsilon1 + 4 * Cmax * delta / (1 - 2 * delta)
    elif form == "combined":
        radicand = 2 * beta * (epsilon1 + 2 * tail) + Cmax * delta / (1 - delta)
    else:
        raise ValueError(f"unknown form {form!r}")
    return 1.0 - math.sqrt(max(radicand, 0.0))


def spectral_error_bound(delta: float, beta: float, R: int) -> float:
    """``2 Cmax delta / (beta (1 - 2 delta))``; infinite for ``delta >= 1/2``."""
    if delta >= 0.5:
        return math.inf
    return 2 * c_max(R) * delta / (beta * (1 - 2 * delta))


# --- solver ------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsConfig:
    hamiltonian: PauliHamiltonian
    beta: float
    truncation: int = 2
    outer_iterations: int = 200
    outer_lr: float = 0.2
    ansatz_layers: int = 5
    ancilla_qubits: int = 1
    qae: Optional[QaeConfig] = None
    eigen_source: str = "qae"
    seed: int = 1
    warm_start: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("must be > 0", "beta")
        if self.truncation < 1:
            raise ConfigError("must be >= 1", "truncation")
        if self.outer_iterations < 0:
            raise ConfigError("must be >= 0", "outer_iterations")
        if not self.outer_lr > 0:
            raise ConfigError("must be > 0", "outer_lr")
        if self.ancilla_qubits < 0:
            raise ConfigError("must be >= 0", "ancilla_qubits")
        if self.eigen_source not in EIGEN_SOURCES:
            raise ConfigError(f"must be one of {EIGEN_SOURCES}", "eigen_source")
        n = self.hamiltonian.num_qubits
        if self.qae is None and n > 1:
            object.__setattr__(self, "qae", QaeConfig(n, min(2, n - 1), 4, 0.2, 100, self.seed))
        if self.eigen_source == "qae":
            if self.qae is None or self.qae.num_qubits != n:
                raise ConfigError(f"inner QAE must act on {n} qubits", "qae.num_qubits")

    @property
    def system_qubits(self) -> int:
        return self.hamiltonian.num_qubits

    def replace(self, **changes) -> "GibbsConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("hamiltonian", "qae")}
        d["hamiltonian"] = self.hamiltonian.to_dict()
        d["qae"] = None if self.qae is None else asdict(self.qae)
        return d


@dataclass
class GibbsResult:
    params: np.ndarray
    rows: list[dict] = field(default_factory=list)

    @property
    def final_fidelity(self) -> float:
        return self.rows[-1]["fidelity"]

    def summary(self, config: GibbsConfig) -> dict:
        fr = [row["free_energy_est"] for row in self.rows]
        eps1 = fr[-1] - min(fr)
        last = self.rows[-1]
        r = 2 ** min(config.ancilla_qubits, config.system_qubits)
        delta = last["delta"]
        return {
            "final_fidelity": last["fidelity"],
            "max_fidelity": max(row["fidelity"] for row in self.rows),
            "final_free_energy": last["free_energy_exact"],
            "epsilon1_surrogate": eps1,
            "fidelity_bound_split": lemma4_lower_bound(eps1, delta, config.beta, r, config.truncation),
            "fidelity_bound_combined": lemma4_lower_bound(eps1, delta, config.beta, r, config.truncation, form="combined"),
            "spectral_error_violations": sum(not row["spectral_error_ok"] for row in self.rows),
            "fallbacks": sum(row["fallback"] for row in self.rows),
        }


def solve_gibbs(config: GibbsConfig, *, init_params=None, callback=None) -> GibbsResult:
    """Descend the truncated free energy; one row per evaluated iterate.

    Rows ``0..T`` cover the initial parameters and each update. The gradient is
    the exact chain rule through the linearised observable
    ``H - (1/beta) sum_j C_j (j+1) rho^j``, with ``rho`` replaced by the QAE
    reconstruction in QAE mode.
    """
    h = config.hamiltonian
    n_sys, n_anc = config.system_qubits, config.ancilla_qubits
    R, beta = config.truncation, config.beta
    coeffs = truncation_coefficients(R)
    hm = h.matrix()
    target = exact_gibbs(h, beta)
    circ = build_hardware_efficient(n_sys + n_anc, config.ansatz_layers)
    gamma = random_params(circ.num_params, config.seed) if init_params is None else np.array(init_params, float)
    d_full = 2 ** (n_sys + n_anc)
    zero = np.zeros((d_full, d_full), dtype=complex)
    zero[0, 0] = 1.0
    anc_eye = np.eye(2**n_anc)
    theta = None
    result = GibbsResult(gamma)

    for t in range(config.outer_iterations + 1):
        c = circ.with_params(gamma)
        rho = prepare_variational_state(c, n_sys, n_anc).matrix
        exact_spec = eig_hermitian(rho)
        f_exact = truncated_free_energy(rho, h, beta, R, trace_powers(exact_spec.eigenvalues, R))
        delta, fallback = 0.0, False
        rho_lin = rho
        f_est = f_exact
        if config.eigen_source == "qae":
            init = theta if (config.warm_start and theta is not None) else None
            model = train(rho, config.qae, init_params=init)
            theta = model.circuit.params
            delta = model.final_loss
            try:
                ro = spectral_readout(model, compress(model, rho))
                f_est = truncated_free_energy(rho, h, beta, R, trace_powers(ro.eigenvalues, R))
                rho_lin = reconstructed_state(ro).matrix
            except DegenerateCompressionError:
                log.warning("iteration %d: degenerate compression, using exact eigenvalues", t)
                fallback = True
        bound_eig = spectral_error_bound(delta, beta, R)
        row = {
            "iteration": t,
            "free_energy_est": f_est,
            "free_energy_exact": f_exact,
            "fidelity": uhlmann_fidelity(rho, target),
            "delta": delta,
            "spectral_error": abs(f_exact - f_est),
            "spectral_error_bound": bound_eig,
            "spectral_error_ok": bool(fallback or abs(f_exact - f_est) <= bound_eig + 1e-12),
            "fallback": fallback,
        }
        result.rows.append(row)
        if callback is not None:
            callback(row)
        if t == config.outer_iterations:
            break
        obs = hm.astype(complex).copy()
        power = np.eye(rho.shape[0], dtype=complex)
        for j in range(1, R + 1):
            power = power @ rho_lin
            obs -= coeffs[j] * (j + 1) * power / beta
        _, grad = expectation_and_gradient(c, zero, np.kron(anc_eye, obs))
        gamma = gamma - config.outer_lr * grad
    result.params = gamma
    return result
