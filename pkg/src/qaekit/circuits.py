"""Parameterized circuits built from RY, RZ and CZ gates.

Rotations use the half-angle convention ``R_P(t) = exp(-i t P / 2)`` so the
two-point parameter-shift rule with shifts of ``+-pi/2`` is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constants import TOL
from .errors import ConfigError, DimensionError
from .linalg import DensityOperator, as_matrix, as_vector

SHIFT = np.pi / 2
GATE_KINDS = ("RY", "RZ", "CZ")


@dataclass(frozen=True)
class GateSpec:
    kind: str
    target: int
    control: int | None = None
    param_index: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CZ":
            if self.control is None or self.control == self.target or self.param_index is not None:
                raise ConfigError("CZ needs a control distinct from its target and no parameter")
        elif self.control is not None or self.param_index is None:
            raise ConfigError(f"{self.kind} needs a parameter index and no control")

    @property
    def is_rotation(self) -> bool:
        return self.kind != "CZ"


@dataclass(frozen=True, eq=False)
class ParamCircuit:
    num_qubits: int
    layers: int
    gates: tuple[GateSpec, ...]
    params: np.ndarray

    def __post_init__(self):
        params = np.array(self.params, dtype=float).reshape(-1)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "gates", tuple(self.gates))
        used = []
        for g in self.gates:
            qubits = [g.target] + ([g.control] if g.control is not None else [])
            if any(q < 0 or q >= self.num_qubits for q in qubits):
                raise ConfigError(f"gate {g} acts outside {self.num_qubits} qubits")
            if g.param_index is not None:
                used.append(g.param_index)
        if sorted(used) != list(range(len(params))):
            raise ConfigError("every parameter must be referenced by exactly one gate")

    @property
    def num_params(self) -> int:
        return len(self.params)

    def with_params(self, params) -> "ParamCircuit":
        params = np.asarray(params, dtype=float)
        if params.shape != self.params.shape:
            raise DimensionError(f"expected {self.params.shape} parameters, got {params.shape}")
        return ParamCircuit(self.num_qubits, self.layers, self.gates, params)

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "layers": self.layers,
            "gates": [
                {k: v for k, v in vars(g).items() if v is not None} for g in self.gates
            ],
            "params": [float(p) for p in self.params],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParamCircuit":
        gates = [GateSpec(**g) for g in data["gates"]]
        return cls(int(data["num_qubits"]), int(data["layers"]), tuple(gates), np.array(data["params"], dtype=float))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ParamCircuit":
        return cls.from_dict(json.loads(text))


def random_params(count: int, seed) -> np.ndarray:
    """Uniform initialisation on ``[0, 2*pi)``."""
    return np.random.default_rng(seed).uniform(0.0, 2 * np.pi, size=count)


def build_hardware_efficient(num_qubits: int, layers: int, params=None, seed=None) -> ParamCircuit:
    """Layered RZ-RY-RZ + nearest-neighbour CZ ansatz with ``3 * N * L`` parameters.

    Parameters default to zeros unless ``params`` or ``seed`` is given.
    """
    if num_qubits < 1 or layers < 1:
        raise ConfigError("num_qubits and layers must both be >= 1")
    gates = []
    k = 0
    for _ in range(layers):
        for q in range(num_qubits):
            for kind in ("RZ", "RY", "RZ"):
                gates.append(GateSpec(kind, q, param_index=k))
                k += 1
        for q in range(num_qubits - 1):
            gates.append(GateSpec("CZ", q + 1, control=q))
    if params is None:
        params = np.zeros(k) if seed is None else random_params(k, seed)
    return ParamCircuit(num_qubits, layers, tuple(gates), np.asarray(params, dtype=float))


# --- gate matrices -------------------------------------------------------------


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


def _bits(n: int, q: int) -> np.ndarray:
    return (np.arange(2**n) >> (n - 1 - q)) & 1


def _embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full ``2^n`` matrix of ``op`` acting on ``qubits`` (in the given order)."""
    k = len(qubits)
    others = [q for q in range(n) if q not in qubits]
    full = np.kron(op, np.eye(2 ** (n - k)))
    t = full.reshape((2,) * (2 * n))
    order = list(qubits) + others
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def gate_matrix(gate: GateSpec, theta: float | None, n: int) -> np.ndarray:
    """Dense ``2^n x 2^n`` embedding of one gate (reference path)."""
    if gate.kind == "CZ":
        return _embed(CZ_MATRIX, [gate.control, gate.target], n)
    small = ry_matrix(theta) if gate.kind == "RY" else rz_matrix(theta)
    return _embed(small, [gate.target], n)


# --- fast kernels ---------------------------------------------------------------


def _diagonal(gate: GateSpec, theta: float | None, n: int) -> np.ndarray | None:
    if gate.kind == "RZ":
        b = _bits(n, gate.target)
        return np.exp(-0.5j * theta * (1 - 2 * b))
    if gate.kind == "CZ":
        return 1.0 - 2.0 * (_bits(n, gate.control) & _bits(n, gate.target))
    return None


def apply_rows(x: np.ndarray, gate: GateSpec, theta: float | None, n: int) -> np.ndarray:
    """``G @ x`` for a gate ``G`` and a ``2^n x m`` (or length ``2^n``) array."""
    diag = _diagonal(gate, theta, n)
    if diag is not None:
        return diag * x if x.ndim == 1 else diag[:, None] * x
    q = gate.target
    shape = x.shape
    y = x.reshape(2**q, 2, -1)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty_like(y, dtype=complex)
    out[:, 0] = c * y[:, 0] - s * y[:, 1]
    out[:, 1] = s * y[:, 0] + c * y[:, 1]
    return out.reshape(shape)


def conjugate(rho: np.ndarray, gate: GateSpec, theta: float | None, n: int) -> np.ndarray:
    """``G rho G^H``."""
    diag = _diagonal(gate, theta, n)
    if diag is not None:
        return rho * np.outer(diag, diag.conj())
    y = apply_rows(rho, gate, theta, n)
    return apply_rows(y.conj().T, gate, theta, n).conj().T


def conjugate_adjoint(obs: np.ndarray, gate: GateSpec, theta: float | None, n: int) -> np.ndarray:
    """``G^H O G``; every gate here satisfies ``G(t)^H = G(-t)``."""
    return conjugate(obs, gate, None if theta is None else -theta, n)


def _theta(circ: ParamCircuit, gate: GateSpec, params=None) -> float | None:
    if gate.param_index is None:
        return None
    p = circ.params if params is None else params
    return float(p[gate.param_index])


def unitary(circ: ParamCircuit) -> np.ndarray:
    """Circuit matrix from dense gate embeddings; later gates multiply on the left."""
    n = circ.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circ.gates:
        u = gate_matrix(g, _theta(circ, g), n) @ u
    return u


def unitary_fast(circ: ParamCircuit) -> np.ndarray:
    n = circ.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circ.gates:
        u = apply_rows(u, g, _theta(circ, g), n)
    return u


def _check_dim(circ: ParamCircuit, dim: int) -> None:
    if dim != 2**circ.num_qubits:
        raise DimensionError(f"circuit acts on {circ.num_qubits} qubits, operand has dimension {dim}")


def evolve_matrix(circ: ParamCircuit, rho, params=None) -> np.ndarray:
    m = as_matrix(rho)
    _check_dim(circ, m.shape[0])
    n = circ.num_qubits
    for g in circ.gates:
        m = conjugate(m, g, _theta(circ, g, params), n)
    return m


def evolve(circ: ParamCircuit, rho) -> DensityOperator:
    """``U rho U^H`` as a new density operator."""
    return DensityOperator(evolve_matrix(circ, rho), validate=False)


def apply_to_state(circ: ParamCircuit, state, params=None) -> np.ndarray:
    v = as_vector(state)
    _check_dim(circ, v.size)
    n = circ.num_qubits
    for g in circ.gates:
        v = apply_rows(v, g, _theta(circ, g, params), n)
    return v


def _rotation_gate(circ: ParamCircuit, index: int) -> GateSpec:
    if not 0 <= index < circ.num_params:
        raise DimensionError(f"parameter index {index} out of range [0, {circ.num_params})")
    for g in circ.gates:
        if g.param_index == index:
            return g
    raise DimensionError(f"no gate uses parameter {index}")  # unreachable for valid circuits


def _shifted(params: np.ndarray, index: int, delta: float) -> np.ndarray:
    p = np.array(params, dtype=float)
    p[index] += delta
    return p


def param_shift_gradient(scalar_fn: Callable[[np.ndarray], float], circ: ParamCircuit, index: int) -> float:
    """``[f(theta_i + pi/2) - f(theta_i - pi/2)] / 2``."""
    _rotation_gate(circ, index)
    plus = scalar_fn(_shifted(circ.params, index, SHIFT))
    minus = scalar_fn(_shifted(circ.params, index, -SHIFT))
    return 0.5 * (plus - minus)


def density_param_shift(circ: ParamCircuit, rho, index: int) -> np.ndarray:
    """Operator-valued shift rule: ``d(U rho U^H)/d theta_i``."""
    _rotation_gate(circ, index)
    plus = evolve_matrix(circ, rho, _shifted(circ.params, index, SHIFT))
    minus = evolve_matrix(circ, rho, _shifted(circ.params, index, -SHIFT))
    return 0.5 * (plus - minus)


def expectation_and_gradient(circ: ParamCircuit, rho, observable) -> tuple[float, np.ndarray]:
    """``Tr(O U rho U^H)`` and its full gradient by the parameter-shift rule.

    Both shifted circuits for every parameter are evaluated, reusing the
    forward states before a gate and the Heisenberg-picture observable after
    it, so the cost is linear in the number of gates.
    """
    m = as_matrix(rho)
    obs = as_matrix(observable)
    _check_dim(circ, m.shape[0])
    n = circ.num_qubits
    forward = [m]
    for g in circ.gates:
        forward.append(conjugate(forward[-1], g, _theta(circ, g), n))
    value = float(np.real(np.vdot(obs.conj().T, forward[-1])))
    grad = np.zeros(circ.num_params)
    o = obs
    for k in range(len(circ.gates) - 1, -1, -1):
        g = circ.gates[k]
        theta = _theta(circ, g)
        if g.param_index is not None:
            plus = np.vdot(o.conj().T, conjugate(forward[k], g, theta + SHIFT, n))
            minus = np.vdot(o.conj().T, conjugate(forward[k], g, theta - SHIFT, n))
            grad[g.param_index] = 0.5 * float(np.real(plus - minus))
        o = conjugate_adjoint(o, g, theta, n)
    return value, grad


def check_unitary(u: np.ndarray, tol: float = TOL.unitary) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)
