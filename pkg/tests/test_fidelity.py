import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qaekit.errors import ConfigError, DimensionError
from qaekit.fidelity import (
    FidelityEstimate,
    NoisyStateSpec,
    build_noisy_state,
    diagonal_noise,
    estimate_fidelity_qae,
    estimate_fidelity_resource_efficient,
    exact_estimate,
    psi_one,
    psi_zero,
    ssfb_estimate,
    ssfb_interval,
    sub_fidelity,
    super_fidelity,
    w_matrix,
    w_matrix_two_sided,
)
from qaekit.linalg import DensityOperator, PureState, eig_hermitian, random_density_operator, random_pure_state, uhlmann_fidelity
from qaekit.qae import QaeConfig, Readout

SLACK = 1e-9  # numerical slack for band checks
DELTA_FLOOR = 1e-15  # loss resolution of a float64 trace


def in_band(value, exact, delta, width=None):
    width = np.sqrt(2 * max(delta, DELTA_FLOOR)) if width is None else width + 2 * np.sqrt(2 * DELTA_FLOOR)
    return abs(value - exact) <= width + SLACK


# --- noisy states -------------------------------------------------------


def test_noisy_state_limits():
    base = psi_one(3, 4)
    pure = build_noisy_state(NoisyStateSpec(base, 1.0, 4, 2.0))
    assert_allclose(pure.matrix, np.outer(base.amplitudes, base.amplitudes.conj()), atol=1e-12)
    flat = build_noisy_state(NoisyStateSpec(psi_zero(3), 0.0, 4, 0.0))
    assert_allclose(np.diag(flat.matrix).real, [0.25] * 4 + [0] * 4)


def test_noisy_state_reference_rho():
    rho = build_noisy_state(NoisyStateSpec(psi_zero(8), 0.1, 8, 2.0))
    assert abs(np.trace(rho.matrix) - 1) < 1e-10
    assert rho.rank() <= 9


def test_noise_is_one_based():
    v = np.diag(diagonal_noise(4, 2, 1.0)).real
    # 1.5^-1 : 1.5^-2 normalised
    assert_allclose(v[:2], [1.5 / 2.5, 1 / 2.5])


def test_noisy_spec_validation():
    with pytest.raises(ConfigError):
        NoisyStateSpec(psi_zero(2), 1.5, 2, 1.0)
    with pytest.raises(ConfigError):
        NoisyStateSpec(psi_zero(2), 0.5, 5, 1.0)
    with pytest.raises(ConfigError):
        NoisyStateSpec(psi_zero(2), 0.5, 0, 1.0)


def test_psi_one_support():
    psi = psi_one(4, 0).amplitudes
    support = set(np.nonzero(np.abs(psi) > 0)[0])
    assert support <= {8, 4, 2, 1}
    assert np.allclose(psi_one(4, 0).amplitudes, psi)
    kappa = build_noisy_state(NoisyStateSpec(psi_one(6, 0), 0.5, 16, 5.0))
    assert 1 < kappa.rank() <= 17  # tiny tail weights fall below the rank tolerance


# --- W matrix ------------------------------------------------------------


def test_w_matrix_gives_exact_fidelity_with_true_spectrum(rng):
    rho = random_density_operator(3, rng, rank=3)
    kappa = random_density_operator(3, rng)
    dec = eig_hermitian(rho.matrix)
    w = w_matrix(dec.eigenvalues[:3], dec.vectors[:, :3], kappa)
    assert_allclose(w.entries, w.entries.conj().T, atol=1e-9)
    assert np.linalg.eigvalsh(w.entries).min() >= -1e-8
    assert np.trace(w.entries).real <= 1 + 1e-8
    assert abs(w.fidelity() - uhlmann_fidelity(rho, kappa)) < 1e-8


def test_w_matrix_dimension_check():
    with pytest.raises(DimensionError):
        w_matrix([1.0], np.eye(4)[:, :1], np.eye(2) / 2)


def test_two_sided_w_matches_one_sided(rng):
    rho = random_density_operator(2, rng, rank=2)
    kappa = random_density_operator(2, rng, rank=2)
    d1, d2 = eig_hermitian(rho.matrix), eig_hermitian(kappa.matrix)
    r1 = Readout(d1, d1.vectors)
    r2 = Readout(d2, d2.vectors)
    one = w_matrix(d1.eigenvalues, d1.vectors, kappa).entries
    two = w_matrix_two_sided(r1, r2).entries
    assert_allclose(one, two, atol=1e-10)


# --- estimators ----------------------------------------------------------


def test_estimate_self_fidelity():
    rho = build_noisy_state(NoisyStateSpec(psi_zero(3), 0.3, 2, 1.0))
    est = estimate_fidelity_qae(rho, rho, QaeConfig(3, 1, 3, 0.8, 150, 0))
    assert est.method == "qae"
    assert est.lower <= est.value <= est.upper
    assert in_band(est.value, 1.0, est.delta)


def test_estimate_orthogonal_supports():
    rho = np.diag([0.6, 0.4, 0, 0, 0, 0, 0, 0])
    kappa = np.diag([0, 0, 0, 0, 0, 0, 0.5, 0.5])
    est = estimate_fidelity_qae(rho, kappa, QaeConfig(3, 1, 2, 0.8, 100, 0))
    assert in_band(est.value, 0.0, est.delta)


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 2))
def test_theorem2_band_random_rank2(seed, k):
    rng = np.random.default_rng(seed)
    rho = random_density_operator(3, rng, rank=2)
    kappa = random_density_operator(3, rng, rank=2)
    est = estimate_fidelity_qae(rho, kappa, QaeConfig(3, k, 2, 0.8, 60, seed % 1000))
    assert in_band(est.value, uhlmann_fidelity(rho, kappa), est.delta)
    assert not est.info["sub_capacity"]


def test_sub_capacity_flag(rng):
    rho = random_density_operator(3, rng, rank=4)
    est = estimate_fidelity_qae(rho, rho, QaeConfig(3, 1, 1, 0.8, 3, 0))
    assert est.info["sub_capacity"]


def test_resource_efficient_self_and_agreement():
    rho = build_noisy_state(NoisyStateSpec(psi_zero(3), 0.5, 2, 1.0))
    cfg = QaeConfig(3, 1, 3, 0.8, 150, 0)
    est = estimate_fidelity_resource_efficient(rho, rho, cfg, cfg)
    assert est.method == "qae-resource-efficient"
    assert in_band(est.value, 1.0, 0.0, est.info["provable_band"])


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_resource_efficient_random_rank2(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_operator(3, rng, rank=2)
    kappa = random_density_operator(3, rng, rank=2)
    cfg = QaeConfig(3, 1, 2, 0.8, 60, seed % 1000)
    exact = uhlmann_fidelity(rho, kappa)
    re = estimate_fidelity_resource_efficient(rho, kappa, cfg, cfg.replace(seed=cfg.seed + 1))
    assert in_band(re.value, exact, 0.0, re.info["provable_band"])
    one = estimate_fidelity_qae(rho, kappa, cfg)
    assert in_band(re.value, one.value, 0.0, re.info["provable_band"] + np.sqrt(2 * max(one.delta, DELTA_FLOOR)))


def test_estimate_dimension_mismatch():
    with pytest.raises(DimensionError):
        estimate_fidelity_qae(np.eye(4) / 4, np.eye(8) / 8, QaeConfig(2, 1))


def test_estimate_record_invariants():
    with pytest.raises(ValueError):
        FidelityEstimate(0.5, 0, 0.5, 0.5, "magic")
    e = exact_estimate(np.eye(2) / 2, np.eye(2) / 2)
    assert e.lower == e.value == e.upper


# --- SSFB ---------------------------------------------------------------


def test_ssfb_pure_identical():
    psi = psi_one(2, 1).density()
    assert abs(sub_fidelity(psi, psi) - 1) < 1e-12
    assert abs(super_fidelity(psi, psi) - 1) < 1e-12


def test_ssfb_pure_pair_collapses_to_overlap(rng):
    a, b = random_pure_state(2, rng), random_pure_state(2, rng)
    f2 = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    ra, rb = a.density(), b.density()
    assert abs(sub_fidelity(ra, rb) - f2) < 1e-7
    assert abs(super_fidelity(ra, rb) - f2) < 1e-10
    lo, hi = ssfb_interval(ra, rb)
    assert abs(lo - np.sqrt(f2)) < 1e-6 and abs(hi - np.sqrt(f2)) < 1e-9


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_ssfb_brackets_squared_fidelity(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_density_operator(n, rng), random_density_operator(n, rng)
    f = uhlmann_fidelity(a, b)
    assert sub_fidelity(a, b) <= f**2 + 1e-8
    assert f**2 <= super_fidelity(a, b) + 1e-8
    lo, hi = ssfb_interval(a, b)
    assert lo - 1e-8 <= f <= hi + 1e-8
    assert ssfb_estimate(a, b).contains(f, 1e-8)


def test_super_fidelity_can_undercut_root_fidelity():
    """F_U bounds F^2, not F: with a pure rho, F_U = F^2 < F."""
    rho = np.diag([1.0, 0, 0, 0])
    kappa = np.diag([0.25, 0.25, 0.25, 0.25])
    f = uhlmann_fidelity(rho, kappa)
    assert abs(f - 0.5) < 1e-12
    assert abs(super_fidelity(rho, kappa) - 0.25) < 1e-12
