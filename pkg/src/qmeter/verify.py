"""Seeded property suites covering every library invariant.

Each suite draws ``count`` random cases and returns one nonnegative residual
per case (how far the case is from satisfying the property). A suite passes
when its worst residual is within tolerance. ``run_suites`` accepts a
tolerance override so that tests can confirm failures are reported.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from qmeter import sampling as smp
from qmeter.grid import CyclicGrid, momentum_op, position_op
from qmeter.instrument import (
    apply_selective,
    channel_residual,
    disturbance,
    choi_matrix,
    dual_apply,
    instrument_residual,
    is_repeatable,
    joint_probability,
    luders_instrument,
    outcome_choi,
    povm_of,
    repetition_error,
)
from qmeter.model import (
    IndirectModel,
    derive_channel,
    derive_instrument,
    derive_povm,
    dilate_channel,
    dilate_povm,
    meter_out_moments,
    realize_instrument,
    rms_disturbance,
    rms_noise,
)
from qmeter.operators import (
    commutator_bound,
    conditional_expectation,
    expect,
    mean,
    partial_trace_probe,
    spectral_measure,
    std_dev,
    tensor,
)
from qmeter.povm import (
    Povm,
    distance,
    distance_via_naimark,
    estimated_distance_sq,
    first_moment,
    naimark_extend,
    noise_from_compatible,
    povm_distance,
    second_moment,
)
from qmeter.uncertainty import THEOREMS, evaluate, triangle_report
from qmeter.zoo import factorized_noiseless_position, noiseless_position_model, noiseless_position_source, permutation_unitary, von_neumann_source


@dataclass(frozen=True)
class Suite:
    name: str
    run: Callable[[np.random.Generator, int], list[float]]
    count: int
    tol: float


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    worst: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


ZERO_DISTANCE = 1e-6


def _dim(rng, lo=2, hi=4) -> int:
    return int(rng.integers(lo, hi + 1))


def _violation(lhs: float, rhs: float) -> float:
    """How much ``lhs >= rhs`` fails by (0 when it holds)."""
    return max(rhs - lhs, 0.0)


def _subsets(values) -> list[list[float]]:
    vals = [float(v) for v in values]
    return [list(c) for r in range(1, len(vals) + 1) for c in itertools.combinations(vals, r)]


def _min_eig(x) -> float:
    x = np.asarray(x)
    return float(np.linalg.eigvalsh((x + x.conj().T) / 2)[0])


# -- elementary operators ---------------------------------------------------

def robertson(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        a, b, rho = smp.random_observable(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d)
        out.append(_violation(std_dev(a, rho) * std_dev(b, rho), commutator_bound(a, b, rho)))
    return out


def conditional_expectation_positive(rng, count):
    out = []
    for _ in range(count):
        d, r = _dim(rng, 2, 3), _dim(rng, 2, 3)
        g = smp.ginibre(rng, d * r, d * r)
        out.append(max(-_min_eig(conditional_expectation(g @ g.conj().T, smp.random_state(rng, r), d)), 0.0))
    return out


def spectral_resolution(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        sm = spectral_measure(smp.random_observable(rng, d, degenerate=bool(rng.random() < 0.5)))
        worst = float(np.max(np.abs(sum(sm.projectors) - np.eye(d))))
        for i, j in itertools.permutations(range(len(sm)), 2):
            worst = max(worst, float(np.max(np.abs(sm.projectors[i] @ sm.projectors[j]))))
        out.append(worst)
    return out


def partial_trace_of_product(rng, count):
    out = []
    for _ in range(count):
        d, r = _dim(rng), _dim(rng)
        rho = smp.random_state(rng, d)
        back = partial_trace_probe(tensor(rho, smp.random_state(rng, r)), d, r)
        out.append(float(np.max(np.abs(back - rho))))
    return out


# -- POVMs ------------------------------------------------------------------

def povm_triangles(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        rep = triangle_report(smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d))
        out.append(max(_violation(r.lhs, r.rhs) for r in rep.values()))
    return out


def estimation_identity(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        pi, a, psi = smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_ket(rng, d)
        rho = np.outer(psi, psi.conj())
        out.append(abs(estimated_distance_sq(pi, a, psi) - distance(pi, a, rho) ** 2))
    return out


def zero_distance_precise(rng, count):
    """Zero distance on every basis state forces the POVM to be the spectral measure.

    The squared distance is the mean of a positive operator, so vanishing on
    one basis means the operator has zero trace and hence vanishes. "Zero"
    means a squared distance at roundoff level, i.e. a distance below 1e-6.
    """
    out = []
    for _ in range(count):
        d = _dim(rng)
        a = smp.random_observable(rng, d, degenerate=bool(rng.random() < 0.5))
        e_a = Povm.of_observable(a)
        blur = smp.random_povm(rng, d, len(e_a))
        t = float(rng.choice([0.0, 0.3]))
        pi = Povm(e_a.values, tuple((1 - t) * f + t * g for f, g in zip(e_a.effects, blur.effects)))
        basis = smp.random_unitary(rng, d)
        zero = max(distance(pi, a, np.outer(basis[:, k], basis[:, k].conj())) for k in range(d)) <= ZERO_DISTANCE
        if t == 0.0 and not zero:
            out.append(np.inf)
        else:
            out.append(povm_distance(pi, e_a) if zero else 0.0)
    return out


def output_variance_positive(rng, count):
    out = []
    for _ in range(count):
        pi = smp.random_povm(rng, _dim(rng))
        o1 = first_moment(pi)
        out.append(max(-_min_eig(second_moment(pi) - o1 @ o1), 0.0))
    return out


def naimark_consistency(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        pi, a, rho = smp.random_povm(rng, d), smp.random_observable(rng, d), smp.random_state(rng, d)
        out.append(abs(distance_via_naimark(naimark_extend(pi), a, rho) - distance(pi, a, rho)))
    return out


def compatible_noise(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        a = smp.random_observable(rng, d, degenerate=bool(rng.random() < 0.5))
        pi, rho = smp.random_compatible_povm(rng, a), smp.random_state(rng, d)
        out.append(abs(noise_from_compatible(pi, a, rho) - distance(pi, a, rho)))
    return out


# -- instruments ------------------------------------------------------------

def instrument_duality(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        ins, rho = smp.random_instrument(rng, d), smp.random_state(rng, d)
        x = smp.ginibre(rng, d, d)
        out.append(
            max(
                abs(expect(x, apply_selective(ins, s, rho)) - expect(dual_apply(ins, s, x), rho))
                for s in _subsets(ins.values)
            )
        )
    return out


def mixing_law(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        ins, r1, r2, p = smp.random_instrument(rng, d), smp.random_state(rng, d), smp.random_state(rng, d), rng.random()
        out.append(
            max(
                float(np.max(np.abs(
                    apply_selective(ins, s, p * r1 + (1 - p) * r2)
                    - p * apply_selective(ins, s, r1)
                    - (1 - p) * apply_selective(ins, s, r2)
                )))
                for s in _subsets(ins.values)
            )
        )
    return out


def choi_positivity(rng, count):
    out = []
    for _ in range(count):
        d = _dim(rng)
        ins, ch = smp.random_instrument(rng, d), smp.random_channel(rng, d)
        worst = -_min_eig(choi_matrix(ch.apply, d))
        for v in ins.values:
            worst = max(worst, -_min_eig(outcome_choi(ins, [v])))
        out.append(max(worst, 0.0))
    return out


def luders_statistics(rng, count):
    out = []
    for _ in range(count):
        a = smp.random_observable(rng, _dim(rng), degenerate=bool(rng.random() < 0.5))
        out.append(povm_distance(povm_of(luders_instrument(a)), Povm.of_observable(a)))
    return out


def luders_repetition(rng, count):
    """Ten states per random observable; Lueders instruments must be repeatable."""
    out = []
    ins = None
    for k in range(count):
        if k % 10 == 0:
            ins = luders_instrument(smp.random_observable(rng, _dim(rng), degenerate=bool(rng.random() < 0.5)))
        if not is_repeatable(ins):
            out.append(np.inf)
            continue
        out.append(repetition_error(ins, smp.random_state(rng, ins.dim)))
    return out


def luders_joint_probability(rng, count):
    """Measuring twice: ``Pr{x in D, y in D'} = Pr{x in D and D'}``."""
    out = []
    for _ in range(count):
        ins = luders_instrument(smp.random_observable(rng, _dim(rng), degenerate=bool(rng.random() < 0.5)))
        rho = smp.random_state(rng, ins.dim)
        pi = povm_of(ins)
        worst = 0.0
        for s1 in _subsets(ins.values):
            for s2 in _subsets(ins.values):
                both = [v for v in s1 if v in s2]
                target = mean(pi.effect(both), rho) if both else 0.0
                worst = max(worst, abs(joint_probability(ins, pi, rho, s1, s2) - target))
        out.append(worst)
    return out


def nonrepeatable_detected(rng, count):
    """Random instruments with two or more outcomes are almost surely not repeatable,
    and their repetition error is then positive for some state."""
    out = []
    for _ in range(count):
        ins = smp.random_instrument(rng, _dim(rng), outcomes=2)
        if is_repeatable(ins):
            out.append(np.inf)
            continue
        out.append(0.0 if max(repetition_error(ins, smp.random_state(rng, ins.dim)) for _ in range(5)) > 0 else np.inf)
    return out


# -- indirect models --------------------------------------------------------

def model_noise_is_distance(rng, count):
    out = []
    for _ in range(count):
        m = smp.random_model(rng)
        a, b, rho = (smp.random_observable(rng, m.dim_object), smp.random_observable(rng, m.dim_object),
                     smp.random_state(rng, m.dim_object))
        out.append(max(
            abs(rms_noise(m, a, rho) - distance(derive_povm(m), a, rho)),
            abs(rms_disturbance(m, b, rho) - disturbance(derive_channel(m), b, rho)),
        ))
    return out


def model_triangle(rng, count):
    out = []
    for _ in range(count):
        m = smp.random_model(rng)
        a, rho = smp.random_observable(rng, m.dim_object), smp.random_state(rng, m.dim_object)
        mu, sx = meter_out_moments(m, rho)
        eps, sa, bias = rms_noise(m, a, rho), std_dev(a, rho), abs(mu - mean(a, rho))
        out.append(max(
            _violation(eps + bias, abs(sx - sa)),
            _violation(eps + sa + bias, sx),
            _violation(eps + sx + bias, sa),
            _violation(sa + sx + bias, eps),
        ))
    return out


def realization_equivalence(rng, count):
    out = []
    for _ in range(count):
        m = smp.random_model(rng, dim_object=_dim(rng, 2, 3), dim_probe=_dim(rng, 2, 3))
        ins = derive_instrument(m)
        again = derive_instrument(realize_instrument(ins))
        second = smp.random_povm(rng, m.dim_object)
        rho = smp.random_state(rng, m.dim_object)
        out.append(max(
            abs(joint_probability(ins, second, rho, s1, s2) - joint_probability(again, second, rho, s1, s2))
            for s1 in _subsets(ins.values)
            for s2 in _subsets(second.values)
        ))
    return out


def realize_instrument_roundtrip(rng, count):
    out = []
    for _ in range(count):
        ins = smp.random_instrument(rng, _dim(rng, 2, 3))
        out.append(instrument_residual(derive_instrument(realize_instrument(ins)), ins))
    return out


def dilate_povm_roundtrip(rng, count):
    out = []
    for _ in range(count):
        pi = smp.random_povm(rng, _dim(rng, 2, 3))
        out.append(povm_distance(derive_povm(dilate_povm(pi)), pi))
    return out


def dilate_channel_roundtrip(rng, count):
    out = []
    for _ in range(count):
        ch = smp.random_channel(rng, _dim(rng, 2, 3))
        out.append(channel_residual(derive_channel(dilate_channel(ch)), ch))
    return out


# -- uncertainty relations ----------------------------------------------------

def _relation_case(rng):
    """Random model and observables; a third of the cases use structured
    apparatuses so that the special-case hypotheses are exercised."""
    d = _dim(rng)
    kind = int(rng.integers(0, 3))
    a, b = smp.random_observable(rng, d, bool(rng.random() < 0.3)), smp.random_observable(rng, d, bool(rng.random() < 0.3))
    if kind == 0:
        m = smp.random_model(rng, dim_object=d, dim_probe=_dim(rng, 2, 3))
    elif kind == 1:
        m = realize_instrument(luders_instrument(a))  # precise for A
    else:
        r = _dim(rng, 2, 3)
        # the object is left alone, so every B is undisturbed
        m = IndirectModel(d, r, smp.random_state(rng, r), np.kron(np.eye(d), smp.random_unitary(rng, r)),
                          smp.random_observable(rng, r))
    return m, a, b, smp.random_state(rng, d)


def universal_relations(rng, count):
    out = []
    for _ in range(count):
        rep = evaluate(*_relation_case(rng))
        out.append(max(_violation(rep.relations[n].lhs, rep.relations[n].rhs) for n in THEOREMS))
    return out


def heisenberg_sufficient_conditions(rng, count):
    out = []
    for _ in range(count):
        rep = evaluate(*_relation_case(rng))
        h = rep.relations["heisenberg"]
        out.append(_violation(h.lhs, h.rhs) if rep.conditions.any_holds else 0.0)
    return out


def special_case_relations(rng, count):
    out = []
    for _ in range(count):
        rep = evaluate(*_relation_case(rng))
        rows = [rep.relations[n] for n in ("nondisturbing", "precise") if n in rep.relations]
        out.append(max((_violation(r.lhs, r.rhs) for r in rows), default=0.0))
    return out


# -- grid models --------------------------------------------------------------

def _fold(g: CyclicGrid, idx):
    return g.positions[np.asarray(idx) % g.n_points]


def grid_permutations(rng, count):
    """Permutation structure and exact Heisenberg-picture relabelling of position operators."""
    out = []
    for _ in range(count):
        n = int(rng.choice([4, 8, 16]))
        g = CyclicGrid(n)
        ix, iq = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ix, iq = ix.ravel(), iq.ravel()
        worst = 0.0
        for src, x_out, q_out in (
            (von_neumann_source(n), _fold(g, ix), _fold(g, ix + iq)),
            (noiseless_position_source(n), _fold(g, ix - iq), _fold(g, ix)),
        ):
            u = permutation_unitary(src).toarray()
            ones = (np.abs(u) == 1).sum(axis=0), (np.abs(u) == 1).sum(axis=1)
            if not (np.all(ones[0] == 1) and np.all(ones[1] == 1) and np.count_nonzero(u) == n * n):
                return [np.inf]
            for op, expected in ((np.kron(position_op(g), np.eye(n)), x_out), (np.kron(np.eye(n), position_op(g)), q_out)):
                conj = u.conj().T @ op @ u
                worst = max(worst, float(np.max(np.abs(conj - np.diag(expected)))))
        out.append(worst)
    return out


def factorization_identity(rng, count):
    out = []
    for n in [4, 8, 64][:count] + [int(rng.choice([4, 8, 16])) for _ in range(max(count - 3, 0))]:
        diff = factorized_noiseless_position(CyclicGrid(n)) - permutation_unitary(noiseless_position_source(n))
        out.append(float(np.max(np.abs(diff.data))) if diff.nnz else 0.0)
    return out


def noiseless_position_precise(rng, count):
    """Precise position measurement on random states: zero noise, a valid
    precise-case bound, and a Heisenberg violation whenever the bound is nonzero."""
    out = []
    g = CyclicGrid(16)
    x, p = position_op(g), momentum_op(g)
    for _ in range(count):
        m = noiseless_position_model(g, smp.random_ket(rng, g.n_points))
        rho = smp.random_state(rng, g.n_points, 1)
        rep = evaluate(m, x, p, rho)
        worst = max(rep.epsilon, 0.0 if rep.precise else np.inf)
        worst = max(worst, _violation(rep.relations["precise"].lhs, rep.rhs) if rep.precise else 0.0)
        if rep.rhs > 1e-6:
            worst = max(worst, rep.epsilon * rep.eta)
        out.append(worst)
    return out


SUITES: tuple[Suite, ...] = (
    Suite("robertson", robertson, 200, 1e-10),
    Suite("conditional_expectation_positive", conditional_expectation_positive, 50, 1e-10),
    Suite("spectral_resolution", spectral_resolution, 50, 1e-10),
    Suite("partial_trace_of_product", partial_trace_of_product, 50, 1e-12),
    Suite("povm_triangles", povm_triangles, 100, 1e-9),
    Suite("estimation_identity", estimation_identity, 100, 1e-8),
    Suite("zero_distance_precise", zero_distance_precise, 50, 1e-8),
    Suite("output_variance_positive", output_variance_positive, 50, 1e-10),
    Suite("naimark_consistency", naimark_consistency, 100, 1e-9),
    Suite("compatible_noise", compatible_noise, 100, 1e-9),
    Suite("instrument_duality", instrument_duality, 50, 1e-12),
    Suite("mixing_law", mixing_law, 50, 1e-12),
    Suite("choi_positivity", choi_positivity, 50, 1e-9),
    Suite("luders_statistics", luders_statistics, 50, 1e-10),
    Suite("luders_repetition", luders_repetition, 50, 1e-10),
    Suite("luders_joint_probability", luders_joint_probability, 50, 1e-12),
    Suite("nonrepeatable_detected", nonrepeatable_detected, 20, 0.0),
    Suite("model_noise_is_distance", model_noise_is_distance, 100, 1e-9),
    Suite("model_triangle", model_triangle, 100, 1e-9),
    Suite("realization_equivalence", realization_equivalence, 30, 1e-9),
    Suite("realize_instrument_roundtrip", realize_instrument_roundtrip, 50, 1e-9),
    Suite("dilate_povm_roundtrip", dilate_povm_roundtrip, 50, 1e-9),
    Suite("dilate_channel_roundtrip", dilate_channel_roundtrip, 50, 1e-9),
    Suite("universal_relations", universal_relations, 500, 1e-9),
    Suite("heisenberg_sufficient_conditions", heisenberg_sufficient_conditions, 200, 1e-9),
    Suite("special_case_relations", special_case_relations, 200, 1e-9),
    Suite("grid_permutations", grid_permutations, 3, 1e-12),
    Suite("factorization_identity", factorization_identity, 3, 0.0),
    Suite("noiseless_position_precise", noiseless_position_precise, 20, 1e-9),
)


def suite_names() -> list[str]:
    return [s.name for s in SUITES]


def run_suite(suite: Suite, seed: int, count: int | None = None, tolerance: float | None = None) -> SuiteResult:
    n = suite.count if count is None else count
    # Each suite gets its own stream so results do not depend on which suites run.
    rng = np.random.default_rng([seed, suite_names().index(suite.name)])
    residuals = suite.run(rng, n) if n > 0 else []
    worst = float(max(residuals, default=0.0))
    return SuiteResult(suite.name, len(residuals), worst, suite.tol if tolerance is None else tolerance)


def run_suites(
    seed: int = 0, count: int | None = None, tolerance: float | None = None, names=None
) -> list[SuiteResult]:
    """Run the selected suites (all by default). ``count`` overrides every
    suite's case count; ``tolerance`` overrides every suite's tolerance."""
    chosen = SUITES if names is None else [s for s in SUITES if s.name in set(names)]
    unknown = set(names or ()) - set(suite_names())
    if unknown:
        raise KeyError(f"unknown suites {sorted(unknown)}")
    return [run_suite(s, seed, count, tolerance) for s in chosen]
