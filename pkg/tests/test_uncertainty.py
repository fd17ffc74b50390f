import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import I2, PLUS_Y, SX, SY, SZ
from qmeter import sampling as smp
from qmeter.exceptions import DimensionError
from qmeter.grid import CyclicGrid, gaussian_state, momentum_op, position_op
from qmeter.instrument import luders_instrument
from qmeter.model import IndirectModel, realize_instrument
from qmeter.operators import commutator_bound, ket_to_state, mean, std_dev
from qmeter.povm import Povm, constant_povm
from qmeter.uncertainty import (
    THEOREMS,
    Relation,
    classify_hur_conditions,
    evaluate,
    mean_disturbance_operator,
    mean_noise_operator,
    triangle_report,
)
from qmeter.zoo import noiseless_position_model, von_neumann_model

G64 = CyclicGrid(64)


def seam_free_subspace(g, centers=(-2.0, 0.0, 2.0), width=2.0):
    """Orthonormal basis of a few localized Gaussians, far from the grid seam."""
    return np.linalg.qr(np.stack([gaussian_state(g, c, width) for c in centers], axis=1))[0]


def relation_case(rng):
    """Random apparatus: generic, precise for A, or nondisturbing for every B."""
    kind = rng.integers(3)
    d = int(rng.integers(2, 5))
    a, b, rho = smp.random_observable(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d)
    if kind == 0:
        m = smp.random_model(rng, d, int(rng.integers(2, 4)))
    elif kind == 1:
        m = realize_instrument(luders_instrument(a))
    else:
        r = int(rng.integers(2, 4))
        m = IndirectModel(d, r, smp.random_state(rng, r), np.kron(np.eye(d), smp.random_unitary(rng, r)), smp.random_observable(rng, r))
    return m, a, b, rho


def test_relation_check():
    assert Relation.check(1.0, 1.0 + 5e-10).satisfied
    assert not Relation.check(1.0, 1.0 + 2e-9).satisfied
    r = Relation.check(2.0, 0.5)
    assert r.margin == 1.5 and r.lhs == 2.0 and r.rhs == 0.5


def test_luders_report_brute_force():
    m = realize_instrument(luders_instrument(SZ))
    rep = evaluate(m, SZ, SX, PLUS_Y)
    assert rep.epsilon < 1e-12
    # dephasing in z sends <x> to 0: eta^2 = <(0 - sigma_x)^2> = 2
    assert abs(rep.eta - np.sqrt(2)) < 1e-12
    assert abs(rep.sigma_a - 1) < 1e-12 and abs(rep.rhs - 1) < 1e-12
    assert rep.precise and not rep.nondisturbing
    assert abs(rep.relations["precise"].lhs - np.sqrt(2)) < 1e-12
    assert rep.relations["precise"].satisfied
    assert not rep.relations["heisenberg"].satisfied
    assert rep.violations() == []


def test_von_neumann_grid_report():
    probe = gaussian_state(G64, 0.0, 4.0)
    m = von_neumann_model(G64, probe)
    x, p = position_op(G64), momentum_op(G64)
    rho = ket_to_state(gaussian_state(G64, 0.0, 2.0))
    rep = evaluate(m, x, p, rho)
    sigma = ket_to_state(probe)
    assert abs(rep.epsilon * rep.eta - std_dev(x, sigma) * std_dev(p, sigma)) < 1e-8
    assert rep.relations["heisenberg"].satisfied
    assert all(rep.relations[name].satisfied for name in THEOREMS)
    flags = classify_hur_conditions(m, x, p, subspace=seam_free_subspace(G64))
    assert flags.independent_noise and flags.independent_disturbance and flags.condition_ii


def test_noiseless_position_grid_report():
    m = noiseless_position_model(G64, gaussian_state(G64, 0.0, 4.0))
    x, p = position_op(G64), momentum_op(G64)
    rho = ket_to_state(gaussian_state(G64, 0.0, 2.0))
    rep = evaluate(m, x, p, rho)
    assert rep.epsilon < 1e-10 and rep.precise
    assert not rep.relations["heisenberg"].satisfied
    assert abs(rep.rhs - 0.5) < 1e-3
    assert rep.relations["uvur"].satisfied and rep.relations["gur"].satisfied
    assert rep.relations["precise"].satisfied
    flags = classify_hur_conditions(m, x, p, subspace=seam_free_subspace(G64))
    assert not flags.independent_disturbance and not flags.any_holds
    assert rep.violations() == []


def test_trivial_model_conditions():
    # with U = I the meter part of N(A) never sees the object; D(B) vanishes
    m = IndirectModel(2, 2, I2 / 2, np.eye(4), SZ)
    flags = classify_hur_conditions(m, SX, 2 * SX + I2)
    assert flags.noise_commutes_b_in and flags.disturbance_commutes_a_in and flags.model_condition_i
    flags = classify_hur_conditions(m, SX, SY)
    assert not flags.noise_commutes_b_in and flags.disturbance_commutes_a_in
    assert flags.unbiased_disturbance and flags.disturbance_in_probe and not flags.noise_in_probe
    assert not flags.independent_noise


def test_mean_operators(rng):
    m = smp.random_model(rng, 2, 3)
    a = smp.random_observable(rng, 2)
    lud = realize_instrument(luders_instrument(a))
    assert np.abs(mean_noise_operator(lud, a)).max() < 1e-12
    assert np.abs(mean_disturbance_operator(IndirectModel(2, 2, I2 / 2, np.eye(4), SZ), a)).max() < 1e-12
    assert mean_noise_operator(m, a).shape == (2, 2)


def test_evaluate_dimension_errors(rng):
    m = smp.random_model(rng, 2, 2)
    with pytest.raises(DimensionError):
        evaluate(m, np.eye(3), SX, I2 / 2)
    with pytest.raises(DimensionError):
        evaluate(m, SX, SX, np.eye(3) / 3)


def test_report_serializes(rng):
    m, a, b, rho = relation_case(rng)
    doc = evaluate(m, a, b, rho).to_dict()
    again = json.loads(json.dumps(doc))
    assert set(again["relations"]) >= {"heisenberg", *THEOREMS}
    assert {"condition_i", "condition_ii", "condition_iii"} <= set(again["conditions"])


def test_triangle_report_examples(rng):
    rho = smp.random_state(rng, 3)
    a = smp.random_observable(rng, 3)
    rep = triangle_report(Povm.of_observable(a), a, rho)
    assert all(r.satisfied for r in rep.values())
    assert abs(rep["abs_difference"].rhs) < 1e-9
    x0 = 0.7
    const = triangle_report(constant_povm(x0, 3), a, rho)
    assert const["epsilon"].satisfied
    assert abs(const["epsilon"].rhs - np.sqrt(std_dev(a, rho) ** 2 + (x0 - mean(a, rho)) ** 2)) < 1e-12
    assert const["epsilon"].rhs <= std_dev(a, rho) + abs(x0 - mean(a, rho)) + 1e-12


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_universal_relations_and_specializations(seed):
    rng = np.random.default_rng(seed)
    m, a, b, rho = relation_case(rng)
    rep = evaluate(m, a, b, rho)
    for name in THEOREMS:
        assert rep.relations[name].margin >= -1e-9, name
    assert rep.violations() == []
    if rep.conditions.any_holds:
        assert rep.relations["heisenberg"].margin >= -1e-9
    if rep.nondisturbing:
        assert rep.epsilon * rep.sigma_b >= rep.rhs - 1e-9
    if rep.precise:
        assert rep.sigma_a * rep.eta >= rep.rhs - 1e-9
    assert min(rep.epsilon, rep.eta, rep.sigma_a, rep.sigma_b, rep.sigma_x, rep.sigma_b_post) >= 0
    assert abs(rep.rhs - commutator_bound(a, b, rho)) < 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_triangle_report_random(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    rep = triangle_report(smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d))
    assert all(r.satisfied for r in rep.values())
