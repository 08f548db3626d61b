"""Real-coefficient Pauli-sum Hamiltonians.

Text format, one term per line: ``<coefficient> <pauli string>``, e.g. ``-1.0 ZZI``.
Blank lines and ``#`` comments are ignored. Character ``i`` of the string acts
on qubit ``i`` (qubit 0 is the most significant bit).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ConfigError, DimensionError

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


@dataclass(frozen=True)
class PauliHamiltonian:
    num_qubits: int
    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ConfigError("must be >= 1", "num_qubits")
        clean = []
        for coeff, word in self.terms:
            word = word.upper()
            if len(word) != self.num_qubits or set(word) - set(PAULI):
                raise ConfigError(f"bad Pauli string {word!r} for {self.num_qubits} qubits", "terms")
            clean.append((float(coeff), word))
        object.__setattr__(self, "terms", tuple(clean))

    def matrix(self) -> np.ndarray:
        d = 2**self.num_qubits
        out = np.zeros((d, d), dtype=complex)
        for coeff, word in self.terms:
            out += coeff * reduce(np.kron, (PAULI[c] for c in word))
        return out

    def is_diagonal(self) -> bool:
        return all(set(w) <= {"I", "Z"} for _, w in self.terms)

    def dumps(self) -> str:
        return "\n".join(f"{c!r} {w}" for c, w in self.terms) + "\n"

    @classmethod
    def loads(cls, text: str, num_qubits: int | None = None) -> "PauliHamiltonian":
        terms = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"line {lineno}: expected '<coeff> <paulis>', got {line!r}")
            try:
                coeff = float(parts[0])
            except ValueError:
                raise ConfigError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
            terms.append((coeff, parts[1]))
        if not terms:
            raise ConfigError("no terms")
        n = len(terms[0][1]) if num_qubits is None else num_qubits
        return cls(n, tuple(terms))

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "terms": [list(t) for t in self.terms]}

    @classmethod
    def from_dict(cls, data) -> "PauliHamiltonian":
        if isinstance(data, str):
            return cls.loads(data)
        return cls(int(data["num_qubits"]), tuple((float(c), str(w)) for c, w in data["terms"]))


def _word(n: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(q, "I") for q in range(n))


def ising_ring(num_spins: int, coupling: float = 1.0) -> PauliHamiltonian:
    """``-J sum_i Z_i Z_{i+1}`` with periodic boundary (``Z_{n+1} = Z_1``)."""
    if num_spins < 2:
        raise ConfigError("need at least 2 spins", "num_spins")
    pairs = [(i, (i + 1) % num_spins) for i in range(num_spins)]
    if num_spins == 2:
        pairs = pairs[:1]
    return PauliHamiltonian(num_spins, tuple((-coupling, _word(num_spins, {i: "Z", j: "Z"})) for i, j in pairs))


def z_sum(num_qubits: int, count: int | None = None) -> PauliHamiltonian:
    """``sum_{i<count} Z_i`` on ``num_qubits`` qubits (all qubits by default)."""
    count = num_qubits if count is None else count
    if not 1 <= count <= num_qubits:
        raise ConfigError(f"need 1 <= count <= {num_qubits}", "count")
    return PauliHamiltonian(num_qubits, tuple((1.0, _word(num_qubits, {i: "Z"})) for i in range(count)))


def check_matches(h: PauliHamiltonian, dim: int) -> None:
    if 2**h.num_qubits != dim:
        raise DimensionError(f"Hamiltonian on {h.num_qubits} qubits vs dimension {dim}")
