"""Dense complex linear algebra on small multi-qubit operators.

Conventions: matrices are dense ``complex128`` arrays in row-major order and
qubit 0 is the most significant bit of a basis index, so ``|q0 q1 ... q_{n-1}>``
has index ``q0 * 2**(n-1) + ... + q_{n-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .constants import TOL
from .errors import (
    ConvergenceError,
    DimensionError,
    NegativeSpectrumError,
    NotADensityOperatorError,
    NotHermitianError,
)

__all__ = [
    "DensityOperator",
    "PureState",
    "SpectralDecomposition",
    "as_matrix",
    "num_qubits_of",
    "eig_hermitian",
    "matrix_sqrt_psd",
    "trace_sqrt_psd",
    "partial_trace",
    "trace_out",
    "uhlmann_fidelity",
    "trace_distance",
    "purity",
    "von_neumann_entropy",
    "random_density_operator",
    "random_pure_state",
    "random_unitary",
]


def num_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def _max_asymmetry(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace operator on ``n`` qubits.

    The matrix is copied on construction and stored read-only.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix, *, validate: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        num_qubits_of(m.shape[0])
        if validate:
            asym = _max_asymmetry(m)
            if asym > TOL.hermitian:
                raise NotADensityOperatorError(f"not Hermitian (max asymmetry {asym:.3e})")
            tr = np.trace(m)
            if abs(tr - 1.0) > TOL.trace:
                raise NotADensityOperatorError(f"trace {tr.real:.12g} differs from 1")
            lo = float(np.linalg.eigvalsh(m)[0])
            if lo < -TOL.psd:
                raise NotADensityOperatorError(f"negative eigenvalue {lo:.3e}")
        m.setflags(write=False)
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @property
    def num_qubits(self) -> int:
        return num_qubits_of(self.dim)

    def __array__(self, dtype=None, copy=None):
        return self._matrix if dtype is None else self._matrix.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityOperator(num_qubits={self.num_qubits})"

    @classmethod
    def from_state(cls, state) -> "DensityOperator":
        v = as_vector(state)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "DensityOperator":
        m = np.zeros((2**num_qubits, 2**num_qubits), dtype=complex)
        m[index, index] = 1.0
        return cls(m, validate=False)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityOperator":
        d = 2**num_qubits
        return cls(np.eye(d, dtype=complex) / d, validate=False)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in descending order."""
        return np.linalg.eigvalsh(self._matrix)[::-1]

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.sum(self.eigenvalues() > tol))


class PureState:
    """Unit-norm state vector on ``n`` qubits."""

    __slots__ = ("_amplitudes",)

    def __init__(self, amplitudes, *, validate: bool = True):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        num_qubits_of(v.size)
        if validate:
            norm = np.linalg.norm(v)
            if abs(norm - 1.0) > TOL.unit_norm:
                raise NotADensityOperatorError(f"state norm {norm:.12g} differs from 1")
        v.setflags(write=False)
        self._amplitudes = v

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    @property
    def num_qubits(self) -> int:
        return num_qubits_of(self._amplitudes.size)

    def __array__(self, dtype=None, copy=None):
        return self._amplitudes if dtype is None else self._amplitudes.astype(dtype)

    def __repr__(self) -> str:
        return f"PureState(num_qubits={self.num_qubits})"

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "PureState":
        v = np.zeros(2**num_qubits, dtype=complex)
        v[index] = 1.0
        return cls(v, validate=False)

    def density(self) -> DensityOperator:
        return DensityOperator.from_state(self._amplitudes)


Operator = Union[np.ndarray, DensityOperator]


def as_matrix(a) -> np.ndarray:
    if isinstance(a, DensityOperator):
        return a.matrix
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def as_vector(v) -> np.ndarray:
    if isinstance(v, PureState):
        return v.amplitudes
    return np.asarray(v, dtype=complex).reshape(-1)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending with eigenvectors stored as columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def eigenvectors(self) -> list[PureState]:
        return [PureState(self.vectors[:, i], validate=False) for i in range(self.vectors.shape[1])]

    def reassemble(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors.conj().T


def eig_hermitian(a, tol: float = TOL.eig_hermitian_input) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Raises:
        NotHermitianError: if ``max|A - A^H| > tol``.
        ConvergenceError: if LAPACK fails to converge.
    """
    m = as_matrix(a)
    asym = _max_asymmetry(m)
    if asym > tol:
        raise NotHermitianError(asym, tol)
    h = 0.5 * (m + m.conj().T)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"Hermitian eigensolver hit its iteration limit: {exc}") from exc
    return SpectralDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def _clamped_spectrum(a, clamp_tol: float) -> SpectralDecomposition:
    dec = eig_hermitian(a)
    w = dec.eigenvalues
    if w.size and w[-1] < -clamp_tol:
        raise NegativeSpectrumError(float(w[-1]), clamp_tol)
    return SpectralDecomposition(np.clip(w, 0.0, None), dec.vectors)


def matrix_sqrt_psd(a, clamp_tol: float = TOL.clamp) -> np.ndarray:
    """Principal square root ``V diag(sqrt(max(w, 0))) V^H`` of a PSD matrix.

    Eigenvalues in ``[-clamp_tol, 0)`` are treated as zero; anything lower
    raises :class:`NegativeSpectrumError`.
    """
    dec = _clamped_spectrum(a, clamp_tol)
    return (dec.vectors * np.sqrt(dec.eigenvalues)) @ dec.vectors.conj().T


def _drop_roundoff(w: np.ndarray) -> np.ndarray:
    if not w.size:
        return w
    cut = TOL.rank_rtol * w.size * max(float(np.max(np.abs(w))), 1e-300)
    return np.where(w > cut, w, 0.0)


def trace_sqrt_psd(a, clamp_tol: float = TOL.clamp) -> float:
    """``Tr sqrt(A)`` for PSD ``A``.

    Roundoff-level eigenvalues are zeroed before the square root so that a
    rank-deficient ``A`` does not pick up spurious ``sqrt(eps)`` terms.
    """
    dec = _clamped_spectrum(a, clamp_tol)
    return float(np.sum(np.sqrt(_drop_roundoff(dec.eigenvalues))))


def _psd_factor(m: np.ndarray) -> np.ndarray:
    """Return ``A`` with ``A A^H = m`` keeping only the numerical support."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = _drop_roundoff(np.clip(w, 0.0, None))
    keep = w > 0
    return v[:, keep] * np.sqrt(w[keep])


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def uhlmann_fidelity(rho, kappa) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) kappa sqrt(rho)) = ||sqrt(rho) sqrt(kappa)||_1``.

    Evaluated as the nuclear norm of ``A^H B`` for support factors
    ``rho = A A^H`` and ``kappa = B B^H``, which is exact for low-rank inputs.
    """
    a, b = as_matrix(rho), as_matrix(kappa)
    _check_same_dim(a, b)
    fa, fb = _psd_factor(a), _psd_factor(b)
    if fa.shape[1] == 0 or fb.shape[1] == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(fa.conj().T @ fb, compute_uv=False)))


def trace_distance(a, b) -> float:
    """Trace norm ``Tr|a - b|`` (no factor 1/2)."""
    ma, mb = as_matrix(a), as_matrix(b)
    _check_same_dim(ma, mb)
    d = ma - mb
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def purity(rho) -> float:
    m = as_matrix(rho)
    return float(np.real(np.vdot(m, m)))


def von_neumann_entropy(rho) -> float:
    w = np.linalg.eigvalsh(as_matrix(rho))
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))


def trace_out(matrix, keep: Iterable[int]) -> np.ndarray:
    """Partial trace over every qubit not listed in ``keep``.

    Kept qubits appear in ascending order. An empty ``keep`` returns the
    1x1 matrix ``[[Tr(A)]]``.
    """
    m = as_matrix(matrix)
    n = num_qubits_of(m.shape[0])
    keep = sorted(set(int(q) for q in keep))
    if any(q < 0 or q >= n for q in keep):
        raise DimensionError(f"qubit index out of range for {n} qubits: {keep}")
    traced = [q for q in range(n) if q not in keep]
    dk, dt = 2 ** len(keep), 2 ** len(traced)
    t = m.reshape((2,) * (2 * n))
    perm = keep + traced
    t = t.transpose(perm + [n + q for q in perm]).reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def partial_trace(rho, keep: Sequence[int]) -> DensityOperator:
    """Reduced state on the qubits in ``keep``."""
    keep = list(keep)
    if not keep:
        raise DimensionError("keep must name at least one qubit")
    return DensityOperator(trace_out(rho, keep), validate=False)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_pure_state(num_qubits: int, rng: np.random.Generator) -> PureState:
    d = 2**num_qubits
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(v / np.linalg.norm(v))


def random_density_operator(num_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random state of the given rank (full rank by default), Hilbert-Schmidt style."""
    d = 2**num_qubits
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise DimensionError(f"rank must lie in [1, {d}], got {rank}")
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    m = 0.5 * (m + m.conj().T)
    return DensityOperator(m / np.trace(m).real)
