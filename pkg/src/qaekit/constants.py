"""Numerical tolerances shared by the operations and the test-suite."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-9
    unit_norm: float = 1e-10
    # inputs to the eigensolver may be looser than stored density operators
    eig_hermitian_input: float = 1e-8
    clamp: float = 1e-9
    w_clamp: float = 1e-8
    # eigenvalues below rank_rtol * max|eig| are treated as roundoff zeros
    rank_rtol: float = 1e-14
    unitary: float = 1e-9
    radicand: float = 1e-10
    success_prob: float = 1e-12


TOL = Tolerances()
