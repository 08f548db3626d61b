import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qaekit.circuits import (
    GateSpec,
    ParamCircuit,
    apply_to_state,
    build_hardware_efficient,
    check_unitary,
    density_param_shift,
    evolve,
    evolve_matrix,
    expectation_and_gradient,
    param_shift_gradient,
    random_params,
    ry_matrix,
    rz_matrix,
    unitary,
    unitary_fast,
)
from qaekit.errors import ConfigError, DimensionError
from qaekit.linalg import DensityOperator, purity, random_density_operator

from conftest import random_hermitian

Z = np.diag([1.0, -1.0]).astype(complex)


def single_ry(theta=0.0):
    return ParamCircuit(1, 1, (GateSpec("RY", 0, param_index=0),), [theta])


def test_gate_spec_validation():
    with pytest.raises(ConfigError):
        GateSpec("RX", 0, param_index=0)
    with pytest.raises(ConfigError):
        GateSpec("CZ", 0, control=0)
    with pytest.raises(ConfigError):
        GateSpec("CZ", 1, control=0, param_index=0)
    with pytest.raises(ConfigError):
        GateSpec("RY", 0)
    with pytest.raises(ConfigError):
        GateSpec("RZ", 0, control=1, param_index=0)


def test_circuit_parameter_bookkeeping():
    g = (GateSpec("RY", 0, param_index=0), GateSpec("RZ", 0, param_index=0))
    with pytest.raises(ConfigError):
        ParamCircuit(1, 1, g, [0.0])
    with pytest.raises(ConfigError):
        ParamCircuit(1, 1, (GateSpec("RY", 1, param_index=0),), [0.0])
    with pytest.raises(ConfigError):
        ParamCircuit(1, 1, (GateSpec("RY", 0, param_index=0),), [0.0, 1.0])
    c = single_ry(0.3)
    with pytest.raises(DimensionError):
        c.with_params([1.0, 2.0])
    with pytest.raises(ValueError):
        c.params[0] = 1.0


@pytest.mark.parametrize(
    "n,layers,params,cz",
    [(1, 1, 3, 0), (8, 5, 120, 35), (4, 4, 48, 12)],
)
def test_hardware_efficient_counts(n, layers, params, cz):
    c = build_hardware_efficient(n, layers)
    assert c.num_params == params
    assert c.count("CZ") == cz
    assert c.count("RZ") == 2 * n * layers and c.count("RY") == n * layers


def test_parameter_count_grid():
    for n in range(1, 9):
        for layers in range(1, 7):
            assert build_hardware_efficient(n, layers).num_params == 3 * n * layers


def test_layer_order_is_rz_ry_rz():
    kinds = [g.kind for g in build_hardware_efficient(2, 1).gates]
    assert kinds == ["RZ", "RY", "RZ", "RZ", "RY", "RZ", "CZ"]


def test_random_params_range_and_determinism():
    p = random_params(1000, 7)
    assert p.min() >= 0 and p.max() < 2 * np.pi
    assert_allclose(p, random_params(1000, 7))
    assert not np.allclose(p, random_params(1000, 8))


def test_rotation_conventions():
    assert_allclose(rz_matrix(0.0), np.eye(2))
    assert_allclose(ry_matrix(0.0), np.eye(2))
    t = 0.7
    assert_allclose(rz_matrix(t), np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)]))
    psi = unitary(single_ry(np.pi)) @ np.array([1, 0])
    assert_allclose(np.abs(psi), [0, 1], atol=1e-12)


def test_zero_params_leaves_only_cz():
    c = build_hardware_efficient(2, 1)
    assert_allclose(unitary(c), np.diag([1, 1, 1, -1]), atol=1e-12)


def test_dense_and_fast_paths_agree(rng):
    for n in (1, 2, 3, 4):
        c = build_hardware_efficient(n, 2, seed=n)
        u = unitary(c)
        assert check_unitary(u)
        assert np.max(np.abs(u - unitary_fast(c))) <= 1e-10
        rho = random_density_operator(n, rng).matrix
        assert np.max(np.abs(evolve_matrix(c, rho) - u @ rho @ u.conj().T)) <= 1e-10
        v = rng.normal(size=2**n) + 0j
        assert_allclose(apply_to_state(c, v), u @ v, atol=1e-10)


def test_qubit_zero_is_msb():
    c = ParamCircuit(2, 1, (GateSpec("RY", 0, param_index=0),), [np.pi])
    out = unitary(c) @ np.array([1, 0, 0, 0])
    assert_allclose(np.abs(out), [0, 0, 1, 0], atol=1e-12)


def test_evolve_properties(rng):
    rho = random_density_operator(3, rng)
    assert_allclose(evolve(build_hardware_efficient(3, 1), DensityOperator.basis(3, 0)).matrix,
                    DensityOperator.basis(3, 0).matrix, atol=1e-12)
    c = build_hardware_efficient(3, 3, seed=1)
    out = evolve(c, rho)
    assert abs(np.trace(out.matrix) - 1) < 1e-9
    assert_allclose(out.eigenvalues(), rho.eigenvalues(), atol=1e-8)
    pure = DensityOperator.basis(3, 5)
    assert abs(purity(evolve(c, pure)) - 1) < 1e-9
    with pytest.raises(DimensionError):
        evolve(c, np.eye(4) / 4)


def test_shift_rule_on_cos():
    def f(p):
        v = unitary(single_ry(p[0])) @ np.array([1, 0])
        return float(np.real(v.conj() @ Z @ v))

    assert abs(param_shift_gradient(f, single_ry(0.0), 0)) < 1e-12
    assert abs(param_shift_gradient(f, single_ry(np.pi / 2), 0) + 1) < 1e-12
    with pytest.raises(DimensionError):
        param_shift_gradient(f, single_ry(0.0), 3)


def _fd(fn, params, i, h=1e-5):
    up, dn = params.copy(), params.copy()
    up[i] += h
    dn[i] -= h
    return (fn(up) - fn(dn)) / (2 * h)


def test_loss_gradient_matches_fd(rng):
    c = build_hardware_efficient(3, 2, seed=4)
    rho = random_density_operator(3, rng).matrix
    m = np.diag([0, 0, 1, 1, 1, 1, 1, 1]).astype(complex)

    def f(p):
        return float(np.real(np.trace(m @ evolve_matrix(c, rho, p))))

    for i in range(c.num_params):
        g = param_shift_gradient(f, c, i)
        assert abs(g - _fd(f, c.params.copy(), i)) < 1e-4


def test_density_shift_rule(rng):
    c = build_hardware_efficient(2, 2, seed=3)
    rho = random_density_operator(2, rng).matrix
    zz = np.kron(Z, np.eye(2))
    for i in (0, 4, 7, 11):
        d = density_param_shift(c, rho, i)
        assert abs(np.trace(d)) < 1e-9
        assert_allclose(d, d.conj().T, atol=1e-9)
        fd = (evolve_matrix(c, rho, c.params + 1e-5 * np.eye(c.num_params)[i])
              - evolve_matrix(c, rho, c.params - 1e-5 * np.eye(c.num_params)[i])) / 2e-5
        assert np.max(np.abs(d - fd)) < 1e-4

        def f(p):
            return float(np.real(np.trace(zz @ evolve_matrix(c, rho, p))))

        assert abs(np.real(np.trace(zz @ d)) - param_shift_gradient(f, c, i)) < 1e-10


def test_density_shift_trivial_parameter():
    # the first RZ acts on |0><0|, which commutes with Z
    c = build_hardware_efficient(1, 1, seed=2)
    d = density_param_shift(c, DensityOperator.basis(1, 0), 0)
    assert np.max(np.abs(d)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_full_gradient_matches_shift_rule(n, layers, seed):
    rng = np.random.default_rng(seed)
    c = build_hardware_efficient(n, layers, seed=seed)
    rho = random_density_operator(n, rng).matrix
    obs = random_hermitian(2**n, rng)

    def f(p):
        return float(np.real(np.trace(obs @ evolve_matrix(c, rho, p))))

    value, grad = expectation_and_gradient(c, rho, obs)
    assert abs(value - f(c.params)) < 1e-10
    k = int(rng.integers(c.num_params))
    assert abs(grad[k] - param_shift_gradient(f, c, k)) < 1e-9
    assert abs(grad[k] - _fd(f, c.params.copy(), k)) < 1e-4


def test_serialisation_round_trip():
    c = build_hardware_efficient(3, 2, seed=11)
    back = ParamCircuit.loads(c.dumps())
    assert back.gates == c.gates
    assert np.array_equal(back.params, c.params)
    assert back.num_qubits == 3 and back.layers == 2
