import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qaekit.errors import ConfigError, DimensionError
from qaekit.linalg import PureState, random_pure_state, uhlmann_fidelity
from qaekit.pauli import PauliHamiltonian, z_sum
from qaekit.qae import QaeConfig
from qaekit.qfi import (
    QfiConfig,
    encode_phase,
    exact_qfi_pure,
    ghz_state,
    optimize_probe,
    phase_unitary,
    qfi_surrogate,
    surrogate_from_fidelity,
)

X = np.array([[0, 1], [1, 0]])
Z1 = PauliHamiltonian(1, ((1.0, "Z"),))


def test_encode_phase_identity_and_bloch_rotation():
    plus = np.full((2, 2), 0.5, dtype=complex)
    assert_allclose(encode_phase(plus, Z1, 0.0), plus)
    for th in (0.0, 0.3, np.pi / 4, 1.1):
        out = encode_phase(plus, Z1, th)
        assert abs(np.trace(out @ X).real - np.cos(2 * th)) < 1e-12
    assert abs(np.trace(encode_phase(plus, Z1, np.pi / 4) @ X).real) < 1e-12


def test_encode_phase_invariants(rng):
    g = z_sum(2)
    basis = PureState.basis(2, 2).density()
    assert_allclose(encode_phase(basis, g, 0.8), basis, atol=1e-14)
    rho = random_pure_state(2, rng).density()
    out = encode_phase(rho, g, 0.4)
    assert_allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(rho), atol=1e-12)
    with pytest.raises(DimensionError):
        encode_phase(np.eye(8) / 8, g, 0.1)


def test_phase_unitary_non_diagonal():
    g = PauliHamiltonian(1, ((1.0, "X"),))
    u = phase_unitary(g, 0.3)
    assert_allclose(u, np.cos(0.3) * np.eye(2) - 1j * np.sin(0.3) * X, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_exact_qfi_oracle(n):
    g = z_sum(n)
    assert exact_qfi_pure(PureState.basis(n, 3 % 2**n), g) == 0.0
    assert abs(exact_qfi_pure(ghz_state(n), g) - 4 * n * n) < 1e-10


def test_qfi_invariant_under_commuting_transform(rng):
    g = z_sum(3)
    psi = random_pure_state(3, rng).amplitudes
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
    assert abs(exact_qfi_pure(psi, g) - exact_qfi_pure(phases * psi, g)) < 1e-10


def test_surrogate_identical_inputs_is_zero(rng):
    rho = random_pure_state(2, rng).density()
    val = qfi_surrogate(rho, rho, 1e-2)
    assert abs(val.value) < 1e-6
    assert val.band == 0.0 and val.delta == 0.0


def test_surrogate_rejects_bad_arguments():
    rho = np.eye(2) / 2
    with pytest.raises(ConfigError):
        qfi_surrogate(rho, rho, 0.0)
    with pytest.raises(ConfigError):
        qfi_surrogate(rho, rho, 0.1, method="magic")
    with pytest.raises(ConfigError):
        qfi_surrogate(rho, rho, 0.1, method="qae")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_surrogate_quadratic_order(n, seed):
    psi = random_pure_state(n, np.random.default_rng(seed))
    g = z_sum(n)
    target = exact_qfi_pure(psi, g)
    rho = psi.density()
    errs = []
    for tau in (1e-1, 1e-2):
        a, b = encode_phase(rho, g, 0.1), encode_phase(rho, g, 0.1 + tau)
        errs.append(abs(qfi_surrogate(a, b, tau).value - target))
    if errs[0] > 1e-6:
        assert 80 <= errs[0] / errs[1] <= 120


def test_surrogate_small_tau_close(rng):
    psi = random_pure_state(3, rng)
    g = z_sum(3)
    rho = psi.density()
    a, b = encode_phase(rho, g, 0.1), encode_phase(rho, g, 0.1 + 1e-3)
    assert abs(qfi_surrogate(a, b, 1e-3).value - exact_qfi_pure(psi, g)) < 1e-3


def test_qae_surrogate_band(rng):
    psi = random_pure_state(3, rng)
    g = z_sum(3)
    rho = psi.density()
    a, b = encode_phase(rho, g, 0.1), encode_phase(rho, g, 0.11)
    val = qfi_surrogate(a, b, 1e-2, "qae", QaeConfig(3, 1, 2, 0.8, 100, 0))
    ref = surrogate_from_fidelity(uhlmann_fidelity(a, b), 1e-2)
    assert val.value >= 0
    assert abs(val.value - ref) <= val.band + 1e-9 * 8 / 1e-4
    assert "params" in val.info


def test_clamp_is_logged(caplog, monkeypatch):
    import qaekit.qfi as mod

    monkeypatch.setattr(mod, "uhlmann_fidelity", lambda a, b: 1.0 + 1e-7)
    with caplog.at_level(logging.INFO, logger="qaekit.qfi"):
        val = qfi_surrogate(np.eye(2) / 2, np.eye(2) / 2, 1e-2)
    assert val.clamped and val.value == 0.0
    assert "clamped" in caplog.text


def test_config_validation():
    g = z_sum(3)
    with pytest.raises(ConfigError):
        QfiConfig(3, g, tau=0.0)
    with pytest.raises(ConfigError):
        QfiConfig(2, g)
    with pytest.raises(ConfigError):
        QfiConfig(3, g, fidelity_method="qae", qae=QaeConfig(2, 1))
    assert QfiConfig(3, g).to_dict()["generator"] == g.to_dict()


def test_optimize_probe_zero_iterations():
    res = optimize_probe(QfiConfig(3, z_sum(3), outer_iterations=0))
    assert len(res.rows) == 1
    assert res.status == "ok"


def test_optimize_probe_oracle_improves():
    res = optimize_probe(QfiConfig(3, z_sum(3), outer_iterations=40))
    q = [r["qfi_exact"] for r in res.rows]
    assert q[-1] > q[0]
    assert q[-1] >= 0.95 * 36
    for r in res.rows:
        assert abs(r["qfi_surrogate"] - r["qfi_surrogate_exact_fidelity"]) < 1e-9


def test_oracle_gradient_matches_finite_difference():
    cfg = QfiConfig(2, z_sum(2), ansatz_layers=2)
    from qaekit.circuits import build_hardware_efficient, random_params
    from qaekit.qfi import _oracle_gradient, _surrogate_at

    circ = build_hardware_efficient(2, 2)
    p = random_params(circ.num_params, 3)
    grad = _oracle_gradient(cfg, circ.with_params(p))
    h = 1e-5
    for i in range(p.size):
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        fd = (_surrogate_at(cfg, circ, up).value - _surrogate_at(cfg, circ, dn).value) / (2 * h)
        assert abs(fd - grad[i]) < 1e-3 * max(1.0, abs(grad[i]))


def test_optimize_probe_qae_mode_short():
    qae = QaeConfig(2, 1, 2, 0.8, 30, 0)
    cfg = QfiConfig(2, z_sum(2), outer_iterations=1, ansatz_layers=1, qae=qae, fidelity_method="qae", tau=0.1)
    res = optimize_probe(cfg)
    assert len(res.rows) == 2
    for r in res.rows:
        assert r["band"] > 0 or r["delta"] == 0
        assert abs(r["qfi_surrogate"] - r["qfi_surrogate_exact_fidelity"]) <= r["band"] + 1e-6
