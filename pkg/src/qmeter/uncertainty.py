"""Noise-disturbance uncertainty relations evaluated as explicit (lhs, rhs) pairs."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from qmeter.model import (
    DENSE_JOINT_LIMIT,
    IndirectModel,
    derive_povm,
    disturbance_commutator_mean,
    disturbance_operator,
    dual_channel,
    first_moment,
    noise_commutator_mean,
    noise_operator,
    rms_disturbance,
    rms_noise,
    second_moment,
    _check_object,
)
from qmeter.operators import commutator, commutator_bound, expect, mean, spectral_measure, std_dev, tensor
from qmeter.povm import Povm, povm_distance, triangle_bounds

MARGIN_TOL = 1e-9
FLAG_TOL = 1e-8

# Relations that hold for every apparatus and state.
THEOREMS = ("uvur_model", "uvur", "gur", "sigma_x", "post_measurement")


@dataclass(frozen=True)
class Relation:
    lhs: float
    rhs: float
    satisfied: bool
    margin: float

    @classmethod
    def check(cls, lhs: float, rhs: float, tol: float = MARGIN_TOL) -> "Relation":
        return cls(float(lhs), float(rhs), bool(lhs >= rhs - tol), float(lhs - rhs))


@dataclass(frozen=True)
class HurConditions:
    """Sufficient conditions for Heisenberg's product relation.

    Mean-level flags use the mean noise ``n(A)`` and mean disturbance ``d(B)``;
    model-level flags use the joint operators and are ``None`` when the joint
    space is too large to form them densely.
    """

    n_commutes_b: bool
    d_commutes_a: bool
    independent_noise: bool
    independent_disturbance: bool
    unbiased_noise: bool
    unbiased_disturbance: bool
    noise_commutes_b_in: bool | None = None
    disturbance_commutes_a_in: bool | None = None
    noise_in_probe: bool | None = None
    disturbance_in_probe: bool | None = None
    tol: float = FLAG_TOL

    @property
    def condition_i(self) -> bool:
        return self.n_commutes_b and self.d_commutes_a

    @property
    def condition_ii(self) -> bool:
        return self.independent_noise and self.independent_disturbance

    @property
    def condition_iii(self) -> bool:
        return self.unbiased_noise and self.unbiased_disturbance

    @property
    def model_condition_i(self) -> bool:
        return bool(self.noise_commutes_b_in and self.disturbance_commutes_a_in)

    @property
    def model_condition_ii(self) -> bool:
        return bool(self.noise_in_probe and self.disturbance_in_probe)

    @property
    def any_holds(self) -> bool:
        return (
            self.condition_i
            or self.condition_ii
            or self.condition_iii
            or self.model_condition_i
            or self.model_condition_ii
        )


@dataclass
class UncertaintyReport:
    epsilon: float
    eta: float
    sigma_a: float
    sigma_b: float
    sigma_x: float
    sigma_b_post: float
    cross_term_uvur: float
    cross_term_uvur_model: float
    cross_term_sigma_x: float
    cross_term_post: float
    rhs: float
    conditions: HurConditions
    nondisturbing: bool
    precise: bool
    relations: dict[str, Relation] = field(default_factory=dict)

    def violations(self) -> list[str]:
        """Names of relations that are guaranteed by a theorem but fail here."""
        bad = [name for name in THEOREMS if not self.relations[name].satisfied]
        for name in ("nondisturbing", "precise"):
            if name in self.relations and not self.relations[name].satisfied:
                bad.append(name)
        if self.conditions.any_holds and not self.relations["heisenberg"].satisfied:
            bad.append("heisenberg")
        return bad

    def to_dict(self) -> dict:
        out = asdict(self)
        out["conditions"] = asdict(self.conditions)
        out["conditions"].update(
            condition_i=self.conditions.condition_i,
            condition_ii=self.conditions.condition_ii,
            condition_iii=self.conditions.condition_iii,
        )
        return out


def _is_scalar(x: np.ndarray, tol: float) -> bool:
    d = x.shape[0]
    return float(np.max(np.abs(x - np.trace(x) / d * np.eye(d)))) <= tol


def _compress(x: np.ndarray, subspace) -> np.ndarray:
    return x if subspace is None else subspace.conj().T @ x @ subspace


def _max_abs(x) -> float:
    return float(np.max(np.abs(x)))


def mean_noise_operator(m: IndirectModel, a) -> np.ndarray:
    """``n(A) = O(Pi) - A``."""
    a = _check_object(m, a)
    return first_moment(m) - a


def mean_disturbance_operator(m: IndirectModel, b) -> np.ndarray:
    """``d(B) = T^*(B) - B``."""
    b = _check_object(m, b)
    return dual_channel(m, b) - b


def classify_hur_conditions(m: IndirectModel, a, b, *, tol: float = FLAG_TOL, subspace=None) -> HurConditions:
    """Evaluate the sufficient conditions for Heisenberg's relation.

    ``subspace`` (an isometry whose columns span an object subspace) restricts
    the mean-level tests to compressed operators, e.g. to stay clear of the
    seam of a cyclic grid.
    """
    a = _check_object(m, a)
    b = _check_object(m, b)
    n_a = mean_noise_operator(m, a)
    d_b = mean_disturbance_operator(m, b)
    flags = dict(
        n_commutes_b=_max_abs(_compress(commutator(n_a, b), subspace)) <= tol,
        d_commutes_a=_max_abs(_compress(commutator(d_b, a), subspace)) <= tol,
        independent_noise=_is_scalar(_compress(n_a, subspace), tol),
        independent_disturbance=_is_scalar(_compress(d_b, subspace), tol),
        unbiased_noise=_max_abs(_compress(n_a, subspace)) <= tol,
        unbiased_disturbance=_max_abs(_compress(d_b, subspace)) <= tol,
    )
    if subspace is None and m.joint_dim <= DENSE_JOINT_LIMIT:
        big_n = noise_operator(m, a)
        big_d = disturbance_operator(m, b)
        eye_p = np.eye(m.dim_probe)
        eye_s = np.eye(m.dim_object)

        def in_probe(x):
            # x = I (x) X_K  iff  x equals I (x) (Tr_H x / dim_object)
            reduced = np.einsum("ipiq->pq", x.reshape(m.dim_object, m.dim_probe, m.dim_object, m.dim_probe))
            return _max_abs(x - tensor(eye_s, reduced / m.dim_object)) <= tol

        flags.update(
            noise_commutes_b_in=_max_abs(commutator(big_n, tensor(b, eye_p))) <= tol,
            disturbance_commutes_a_in=_max_abs(commutator(big_d, tensor(a, eye_p))) <= tol,
            noise_in_probe=in_probe(big_n),
            disturbance_in_probe=in_probe(big_d),
        )
    return HurConditions(**flags, tol=tol)


def _is_nondisturbing(m: IndirectModel, b, d_b, tol: float) -> bool:
    # T^* E^B = E^B implies T^*(B) = B, which is cheap to test first.
    if _max_abs(d_b) > tol:
        return False
    return all(_max_abs(dual_channel(m, p) - p) <= tol for p in spectral_measure(b).projectors)


def _is_precise(m: IndirectModel, a, n_a, tol: float) -> bool:
    if _max_abs(n_a) > tol:
        return False
    return povm_distance(derive_povm(m), Povm.of_observable(a)) <= tol


def evaluate(m: IndirectModel, a, b, rho, *, tol: float = MARGIN_TOL) -> UncertaintyReport:
    """Evaluate every noise-disturbance relation for apparatus ``m`` on state ``rho``."""
    a, rho = _check_object(m, a, rho)
    b = _check_object(m, b)
    eps = rms_noise(m, a, rho)
    eta = rms_disturbance(m, b, rho)
    sigma_a = std_dev(a, rho)
    sigma_b = std_dev(b, rho)

    o1, o2 = first_moment(m), second_moment(m)
    mu_x = mean(o1, rho)
    sigma_x = float(np.sqrt(max(mean(o2, rho) - mu_x**2, 0.0)))
    tb, tb2 = dual_channel(m, b), dual_channel(m, b @ b)
    mu_b_post = mean(tb, rho)
    sigma_b_post = float(np.sqrt(max(mean(tb2, rho) - mu_b_post**2, 0.0)))

    n_a = o1 - a
    d_b = tb - b
    tr_nb = expect(commutator(n_a, b), rho)
    tr_ad = expect(commutator(a, d_b), rho)
    cross_uvur = abs(tr_nb + tr_ad) / 2
    cross_model = abs(noise_commutator_mean(m, a, b, rho) + disturbance_commutator_mean(m, a, b, rho)) / 2
    cross_sx = abs(tr_nb) / 2
    cross_post = abs(tr_ad) / 2
    rhs = commutator_bound(a, b, rho)

    conditions = classify_hur_conditions(m, a, b)
    nondisturbing = _is_nondisturbing(m, b, d_b, FLAG_TOL)
    precise = _is_precise(m, a, n_a, FLAG_TOL)

    rel = {
        "heisenberg": Relation.check(eps * eta, rhs, tol),
        "uvur_model": Relation.check(eps * eta + cross_model, rhs, tol),
        "uvur": Relation.check(eps * eta + cross_uvur, rhs, tol),
        "gur": Relation.check(eps * eta + eps * sigma_b + sigma_a * eta, rhs, tol),
        "sigma_x": Relation.check(sigma_x * eta + cross_sx, rhs, tol),
        "post_measurement": Relation.check(eps * sigma_b_post + cross_post, rhs, tol),
    }
    if nondisturbing:
        rel["nondisturbing"] = Relation.check(eps * sigma_b, rhs, tol)
    if precise:
        rel["precise"] = Relation.check(sigma_a * eta, rhs, tol)

    return UncertaintyReport(
        epsilon=eps,
        eta=eta,
        sigma_a=sigma_a,
        sigma_b=sigma_b,
        sigma_x=sigma_x,
        sigma_b_post=sigma_b_post,
        cross_term_uvur=cross_uvur,
        cross_term_uvur_model=cross_model,
        cross_term_sigma_x=cross_sx,
        cross_term_post=cross_post,
        rhs=rhs,
        conditions=conditions,
        nondisturbing=nondisturbing,
        precise=precise,
        relations=rel,
    )


def triangle_report(pi: Povm, a, rho, tol: float = MARGIN_TOL) -> dict[str, Relation]:
    """The four triangle bounds on output spread, target spread and noise.

    Each entry is phrased as ``rhs >= lhs``, i.e. ``Relation(upper, value)``.
    """
    return {name: Relation.check(upper, value, tol) for name, (value, upper) in triangle_bounds(pi, a, rho).items()}
