import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import I2, KET0, SX, SZ
from qmeter import sampling as smp
from qmeter.exceptions import DimensionError, IncompatibleError, ValidationError
from qmeter.grid import CyclicGrid, gaussian_state, position_measure, position_op
from qmeter.model import derive_povm
from qmeter.operators import ket_to_state, mean, spectral_from_basis, std_dev
from qmeter.povm import (
    Povm,
    constant_povm,
    distance,
    distance_via_naimark,
    estimated_distance_sq,
    first_moment,
    is_compatible,
    is_unbiased,
    kernel_noise,
    mean_noise_operator,
    naimark_extend,
    noise_from_compatible,
    output_mean,
    output_std,
    povm_close,
    resolution_kernel,
    second_moment,
)
from qmeter.uncertainty import triangle_report
from qmeter.zoo import von_neumann_model

SMEARED = Povm(np.array([-1.0, 1.0]), (I2 / 2, I2 / 2))


def distance_oracle(pi, a, rho):
    total = sum(np.trace((x * np.eye(pi.dim) - a) @ f @ (x * np.eye(pi.dim) - a) @ rho) for x, f in zip(pi.values, pi.effects))
    return np.sqrt(total.real)


def test_construction_errors():
    with pytest.raises(ValidationError):
        Povm(np.array([0.0, 1.0]), (I2, I2))
    with pytest.raises(ValidationError):
        Povm(np.array([1.0, 1.0]), (I2 / 2, I2 / 2))
    with pytest.raises(ValidationError):
        Povm(np.array([0.0, 1.0]), (np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])))
    with pytest.raises(DimensionError):
        Povm(np.array([0.0, 1.0]), (I2 / 2, np.eye(3) / 2))
    with pytest.raises(ValidationError):
        SMEARED.effect([3.0])


def test_moments():
    e = Povm.of_observable(SZ)
    assert np.abs(first_moment(e) - SZ).max() < 1e-15
    assert np.abs(second_moment(e) - I2).max() < 1e-15
    c = constant_povm(2.5, 2)
    assert np.abs(first_moment(c) - 2.5 * I2).max() == 0
    assert np.abs(second_moment(c) - 6.25 * I2).max() == 0
    assert np.abs(first_moment(SMEARED)).max() == 0
    assert np.abs(second_moment(SMEARED) - I2).max() == 0


def test_distance_examples(rng):
    a = smp.random_observable(rng, 3)
    rho = smp.random_state(rng, 3)
    assert distance(Povm.of_observable(a), a, rho) < 1e-7
    psi = smp.random_ket(rng, 3)
    vec = ket_to_state(psi)
    x0 = 0.7
    closed = np.sqrt(std_dev(a, vec) ** 2 + (x0 - mean(a, vec)) ** 2)
    assert abs(distance(constant_povm(x0, 3), a, vec) - closed) < 1e-12
    assert abs(distance(SMEARED, SX, I2 / 2) - np.sqrt(2)) < 1e-15


def test_distance_matches_oracle(rng):
    for _ in range(20):
        d = int(rng.integers(2, 5))
        pi, a, rho = smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d)
        assert abs(distance(pi, a, rho) - distance_oracle(pi, a, rho)) < 1e-12


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        distance(SMEARED, np.eye(3), I2 / 2)


def test_naimark_examples(rng):
    ext = naimark_extend(Povm.of_observable(SZ))
    v = ext.isometry
    for val, f in zip(ext.values, Povm.of_observable(SZ).effects):
        assert np.abs(v.conj().T @ ext.projector(val) @ v - f).max() < 1e-12
    ext = naimark_extend(SMEARED)
    assert ext.isometry.shape == (4, 2)
    assert np.abs(ext.isometry.conj().T @ ext.isometry - I2).max() < 1e-12
    pi = smp.random_povm(rng, 2, 3)
    ext = naimark_extend(pi)
    for val, f in zip(pi.values, pi.effects):
        assert np.abs(ext.isometry.conj().T @ ext.projector(val) @ ext.isometry - f).max() < 1e-10
    assert abs(distance_via_naimark(naimark_extend(SMEARED), SX, I2 / 2) - np.sqrt(2)) < 1e-12
    assert distance_via_naimark(naimark_extend(Povm.of_observable(SZ)), SZ, I2 / 2) < 1e-12


def test_output_statistics():
    e = Povm.of_observable(SZ)
    assert output_mean(e, KET0) == 1 and output_std(e, KET0) == 0
    assert output_mean(SMEARED, KET0) == 0 and output_std(SMEARED, KET0) == 1
    assert output_mean(e, I2 / 2) == 0 and output_std(e, I2 / 2) == 1


def test_compatibility():
    e = Povm.of_observable(SZ)
    assert is_compatible(e, SZ)
    assert is_compatible(SMEARED, SX)
    assert not is_compatible(e, SX)
    with pytest.raises(IncompatibleError):
        noise_from_compatible(e, SX, I2 / 2)


def test_compatible_noise_examples(rng):
    a = smp.random_observable(rng, 3)
    assert noise_from_compatible(Povm.of_observable(a), a, smp.random_state(rng, 3)) < 1e-12
    assert abs(noise_from_compatible(SMEARED, SX, I2 / 2) - np.sqrt(2)) < 1e-15
    diag = np.diag([1.0, -2.0, 0.5]).astype(complex)
    rho = smp.random_state(rng, 3)
    c = constant_povm(0.3, 3)
    assert abs(noise_from_compatible(c, diag, rho) - distance(c, diag, rho)) < 1e-12


def test_resolution_kernel_precise_and_smeared(rng):
    g = CyclicGrid(8)
    pos = position_measure(g)
    precise = Povm.from_spectral(pos)
    assert np.abs(resolution_kernel(precise, pos) - np.eye(8)).max() < 1e-15
    smear = np.array([[0.7, 0.2, 0.1], [0.2, 0.6, 0.3], [0.1, 0.2, 0.6]])
    sm = spectral_from_basis([-1.0, 0.0, 1.0], np.eye(3))
    pi = Povm(np.array([-1.0, 0.0, 1.0]), tuple(np.diag(row).astype(complex) for row in smear))
    kernel = resolution_kernel(pi, sm)
    assert np.abs(kernel - smear).max() < 1e-15
    rebuilt = [sum(kernel[i, j] * sm.projectors[j] for j in range(3)) for i in range(3)]
    assert all(np.abs(r - f).max() < 1e-15 for r, f in zip(rebuilt, pi.effects))
    rho = smp.random_state(rng, 3)
    x = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    assert abs(kernel_noise(pi, sm, rho) - distance(pi, x, rho)) < 1e-9
    with pytest.raises(ValidationError):
        resolution_kernel(Povm.of_observable(SX), spectral_from_basis([0.0, 1.0], np.eye(2)))


def test_resolution_kernel_of_von_neumann_grid_model():
    g = CyclicGrid(16)
    xi = gaussian_state(g, 0.0, 1.5)
    pi = derive_povm(von_neumann_model(g, xi))
    kernel = resolution_kernel(pi, position_measure(g))
    a_idx = np.array([g.index_of(a) for a in pi.values])
    x_idx = np.array([g.index_of(x) for x in position_measure(g).values])
    expected = np.abs(xi[(a_idx[:, None] - x_idx[None, :]) % g.n_points]) ** 2
    assert np.abs(kernel - expected).max() < 1e-10
    psi = gaussian_state(g, 0.5, 1.0)
    assert abs(kernel_noise(pi, position_measure(g), ket_to_state(psi)) - distance(pi, position_op(g), ket_to_state(psi))) < 1e-9


def test_mean_noise_operator(rng):
    a = smp.random_observable(rng, 3)
    assert np.abs(mean_noise_operator(Povm.of_observable(a), a)).max() < 1e-12
    assert is_unbiased(Povm.of_observable(a), a)
    assert np.abs(mean_noise_operator(constant_povm(2.0, 3), a) - (2 * np.eye(3) - a)).max() < 1e-15
    assert np.abs(mean_noise_operator(SMEARED, SZ) + SZ).max() == 0
    assert not is_unbiased(SMEARED, SZ)


def test_triangle_report_special_cases(rng):
    a, rho = smp.random_observable(rng, 3), smp.random_state(rng, 3)
    rep = triangle_report(Povm.of_observable(a), a, rho)
    assert all(r.satisfied for r in rep.values())
    assert abs(output_std(Povm.of_observable(a), rho) - std_dev(a, rho)) < 1e-12
    x0 = 1.3
    eps = distance(constant_povm(x0, 3), a, rho)
    assert eps <= std_dev(a, rho) + abs(x0 - mean(a, rho)) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_triangle_inequalities(seed, d):
    rng = np.random.default_rng(seed)
    rep = triangle_report(smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d))
    for r in rep.values():
        assert r.lhs >= r.rhs - 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_estimation_identity(seed, d):
    rng = np.random.default_rng(seed)
    pi, a, psi = smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_ket(rng, d)
    assert abs(estimated_distance_sq(pi, a, psi) - distance(pi, a, ket_to_state(psi)) ** 2) < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_naimark_distance(seed, d):
    rng = np.random.default_rng(seed)
    pi, a, rho = smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d)
    assert abs(distance_via_naimark(naimark_extend(pi), a, rho) - distance(pi, a, rho)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_second_moment_dominates_square(seed, d):
    pi = smp.random_povm(np.random.default_rng(seed), d)
    o = first_moment(pi)
    assert np.linalg.eigvalsh(second_moment(pi) - o @ o)[0] >= -1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_zero_distance_on_a_basis_means_precise(seed, d):
    rng = np.random.default_rng(seed)
    a = smp.random_observable(rng, d, degenerate=True)
    e_a = Povm.of_observable(a)
    basis = smp.random_unitary(rng, d)
    states = [np.outer(basis[:, k], basis[:, k].conj()) for k in range(d)]
    assert max(distance(e_a, a, s) for s in states) < 1e-6
    assert povm_close(e_a, Povm.of_observable(a), 1e-8)
    if len(e_a) > 1:  # a scalar A has only the trivial POVM at zero distance
        blur = smp.random_povm(rng, d, len(e_a))
        mixed = Povm(e_a.values, tuple(0.7 * f + 0.3 * g for f, g in zip(e_a.effects, blur.effects)))
        assert max(distance(mixed, a, s) for s in states) > 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_compatible_noise_equals_distance(seed, d):
    rng = np.random.default_rng(seed)
    a = smp.random_observable(rng, d, degenerate=bool(seed % 2))
    pi, rho = smp.random_compatible_povm(rng, a), smp.random_state(rng, d)
    assert is_compatible(pi, a)
    assert abs(noise_from_compatible(pi, a, rho) - distance(pi, a, rho)) < 1e-9
