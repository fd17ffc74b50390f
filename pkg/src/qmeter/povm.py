"""POVMs with finite outcome sets: moments, noise as a distance, Naimark extension."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from qmeter.exceptions import DimensionError, IncompatibleError, ValidationError
from qmeter.operators import (
    TOL_PROB,
    TOL_PSD,
    SpectralMeasure,
    check_observable,
    commutator,
    mean,
    psd_sqrt,
    spectral_measure,
)

UNBIASED_TOL = 1e-8


@dataclass(frozen=True)
class Povm:
    """Real outcome values paired with positive effects summing to the identity."""

    values: np.ndarray
    effects: tuple[np.ndarray, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        effects = tuple(check_observable(f) for f in self.effects)
        if len(values) != len(effects) or not effects:
            raise ValidationError("a POVM needs one effect per outcome value")
        if len(set(values.tolist())) != len(values):
            raise ValidationError("POVM outcome values must be distinct")
        d = effects[0].shape[0]
        if any(f.shape != (d, d) for f in effects):
            raise DimensionError("POVM effects differ in dimension")
        for f in effects:
            if np.linalg.eigvalsh(f)[0] < -TOL_PSD:
                raise ValidationError("POVM effect is not positive")
        if np.max(np.abs(sum(effects) - np.eye(d))) > TOL_PROB:
            raise ValidationError("POVM effects do not sum to the identity")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, np.ndarray]]) -> "Povm":
        pairs = list(pairs)
        return cls(np.array([v for v, _ in pairs], dtype=float), tuple(f for _, f in pairs))

    @classmethod
    def from_spectral(cls, sm: SpectralMeasure) -> "Povm":
        return cls(sm.values.copy(), sm.projectors)

    @classmethod
    def of_observable(cls, a) -> "Povm":
        """The projection-valued measure ``E^A``."""
        return cls.from_spectral(spectral_measure(a))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.values)

    def effect(self, subset: Iterable[float]) -> np.ndarray:
        """``Pi(Delta)`` for a subset of outcome values."""
        wanted = set(float(x) for x in subset)
        unknown = wanted - set(self.values.tolist())
        if unknown:
            raise ValidationError(f"unknown outcome values {sorted(unknown)}")
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for v, f in zip(self.values, self.effects):
            if v in wanted:
                out += f
        return out

    def probabilities(self, rho) -> np.ndarray:
        return np.array([mean(f, rho) for f in self.effects])


def first_moment(pi: Povm) -> np.ndarray:
    return sum(x * f for x, f in zip(pi.values, pi.effects))


def second_moment(pi: Povm) -> np.ndarray:
    return sum(x * x * f for x, f in zip(pi.values, pi.effects))


def output_mean(pi: Povm, rho) -> float:
    return mean(first_moment(pi), rho)


def output_std(pi: Povm, rho) -> float:
    m = output_mean(pi, rho)
    return float(np.sqrt(max(mean(second_moment(pi), rho) - m * m, 0.0)))


def _check_dims(pi: Povm, a, rho=None):
    a = check_observable(a)
    if a.shape[0] != pi.dim or (rho is not None and np.shape(rho)[0] != pi.dim):
        raise DimensionError("POVM, observable and state must share a dimension")
    return a


def distance(pi: Povm, a, rho) -> float:
    """Root-mean-square noise of ``pi`` as a measurement of ``a`` in state ``rho``."""
    a = _check_dims(pi, a, rho)
    o1 = first_moment(pi)
    sq = mean(second_moment(pi) - o1 @ a - a @ o1 + a @ a, rho)
    if sq < -1e-9:
        raise ValidationError(f"negative squared distance {sq:.3e}; inconsistent inputs")
    return float(np.sqrt(max(sq, 0.0)))


def estimated_distance_sq(pi: Povm, a, psi) -> float:
    """Squared distance assembled from five experimentally accessible means.

    Uses output means in the states ``psi``, ``A psi`` and ``(A + I) psi``
    (normalized, then reweighted by their squared norms) together with
    ``<A^2>`` and the mean squared output.
    """
    a = _check_dims(pi, a)
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    psi = psi / np.linalg.norm(psi)

    def weighted_output_mean(phi):
        n2 = float(np.vdot(phi, phi).real)
        if n2 == 0.0:
            return 0.0
        rho = np.outer(phi, phi.conj()) / n2
        return n2 * output_mean(pi, rho)

    rho = np.outer(psi, psi.conj())
    a_psi = a @ psi
    return (
        mean(a @ a, rho)
        + mean(second_moment(pi), rho)
        + output_mean(pi, rho)
        + weighted_output_mean(a_psi)
        - weighted_output_mean(a_psi + psi)
    )


@dataclass(frozen=True)
class NaimarkExtension:
    """Isometry ``V`` and a sharp observable ``C`` with ``V^dag E^C V = Pi``."""

    isometry: np.ndarray
    extended_observable: np.ndarray
    values: np.ndarray
    block_dim: int

    def projector(self, value: float) -> np.ndarray:
        """Spectral projector of the extended observable for one outcome value."""
        diag = np.repeat(self.values == value, self.block_dim).astype(float)
        return np.diag(diag).astype(np.complex128)


def naimark_extend(pi: Povm) -> NaimarkExtension:
    """Canonical block dilation ``V psi = (+)_i sqrt(F_i) psi``."""
    d = pi.dim
    v = np.vstack([psd_sqrt(f) for f in pi.effects])
    c = np.diag(np.repeat(pi.values, d)).astype(np.complex128)
    return NaimarkExtension(v, c, pi.values.copy(), d)


def distance_via_naimark(ext: NaimarkExtension, a, rho) -> float:
    """``|| C V sqrt(rho) - V A sqrt(rho) ||_HS`` for a Naimark extension."""
    a = check_observable(a)
    sr = psd_sqrt(rho)
    v = ext.isometry
    return float(np.linalg.norm(ext.extended_observable @ v @ sr - v @ a @ sr))


def is_compatible(pi: Povm, a, tol: float = 1e-9) -> bool:
    a = _check_dims(pi, a)
    sm = spectral_measure(a)
    return all(
        np.max(np.abs(commutator(f, p))) <= tol for f in pi.effects for p in sm.projectors
    )


def noise_from_compatible(pi: Povm, a, rho, tol: float = 1e-9) -> float:
    """Noise as the rms deviation from a simultaneous precise measurement of ``a``."""
    if not is_compatible(pi, a, tol):
        raise IncompatibleError("POVM does not commute with the spectral measure of A")
    sm = spectral_measure(a)
    rho = np.asarray(rho, dtype=np.complex128)
    sq = 0.0
    for x, f in zip(pi.values, pi.effects):
        for y, p in zip(sm.values, sm.projectors):
            sq += (x - y) ** 2 * mean(f @ p, rho)
    return float(np.sqrt(max(sq, 0.0)))


def resolution_kernel(pi: Povm, position: SpectralMeasure, tol: float = 1e-9) -> np.ndarray:
    """Kernel ``G[a, x]`` with ``F_a = sum_x G[a, x] P_x`` over a nondegenerate basis.

    Rows follow the POVM outcomes, columns the branches of ``position``.
    """
    if any(v.shape[1] != 1 for v in position.eigvecs):
        raise ValidationError("resolution kernel needs a nondegenerate position measure")
    basis = np.hstack(position.eigvecs)
    g = np.empty((len(pi), len(position)))
    for i, f in enumerate(pi.effects):
        fb = basis.conj().T @ f @ basis
        off = fb - np.diag(np.diag(fb))
        if np.max(np.abs(off), initial=0.0) > tol:
            raise ValidationError("POVM effect is not diagonal in the position basis")
        g[i] = np.diag(fb).real
    return g


def kernel_noise(pi: Povm, position: SpectralMeasure, rho) -> float:
    """``sqrt(sum_{a,x} (a - x)^2 G(a, x) <P_x>)`` from the resolution kernel."""
    g = resolution_kernel(pi, position)
    px = np.array([mean(p, rho) for p in position.projectors])
    diff2 = (pi.values[:, None] - position.values[None, :]) ** 2
    return float(np.sqrt(max(np.sum(diff2 * g * px[None, :]), 0.0)))


def mean_noise_operator(pi: Povm, a) -> np.ndarray:
    a = _check_dims(pi, a)
    return first_moment(pi) - a


def is_unbiased(pi: Povm, a, tol: float = UNBIASED_TOL) -> bool:
    return float(np.max(np.abs(mean_noise_operator(pi, a)))) <= tol


def povm_close(p: Povm, q: Povm, tol: float = 1e-9) -> bool:
    """Same outcome values (as sets) and matching effects within ``tol``."""
    if sorted(p.values.tolist()) != sorted(q.values.tolist()):
        return False
    return all(np.max(np.abs(p.effect([v]) - q.effect([v]))) <= tol for v in p.values)


def povm_distance(p: Povm, q: Povm) -> float:
    """Largest entrywise effect difference; outcome sets are merged, missing ones count as 0."""
    vals = sorted(set(p.values.tolist()) | set(q.values.tolist()))
    worst = 0.0
    for v in vals:
        fp = p.effect([v]) if v in p.values else 0.0
        fq = q.effect([v]) if v in q.values else 0.0
        worst = max(worst, float(np.max(np.abs(np.asarray(fp - fq)))))
    return worst


def constant_povm(value: float, dim: int) -> Povm:
    return Povm(np.array([float(value)]), (np.eye(dim, dtype=np.complex128),))


def triangle_bounds(pi: Povm, a, rho) -> dict[str, tuple[float, float]]:
    """Each inequality as ``(lhs, rhs)`` with ``lhs <= rhs`` expected."""
    a = _check_dims(pi, a, rho)
    eps = distance(pi, a, rho)
    sx = output_std(pi, rho)
    m = mean(a, rho)
    sa = float(np.sqrt(max(mean(a @ a, rho) - m * m, 0.0)))
    bias = abs(output_mean(pi, rho) - m)
    return {
        "sigma_x": (sx, eps + sa + bias),
        "sigma_a": (sa, eps + sx + bias),
        "epsilon": (eps, sa + sx + bias),
        "abs_difference": (abs(sx - sa), eps + bias),
    }

