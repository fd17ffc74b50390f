"""CP instruments and channels in Kraus form."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from qmeter.exceptions import DimensionError, ValidationError, ZeroProbabilityError
from qmeter.operators import (
    TOL_PROB,
    TOL_PSD,
    check_observable,
    check_state,
    expect,
    mean,
    spectral_measure,
)
from qmeter.povm import Povm, distance


def _kraus_stack(ops) -> np.ndarray:
    arr = np.asarray([np.asarray(k, dtype=np.complex128) for k in ops])
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionError("Kraus operators must be square matrices of one size")
    return arr


def _sandwich(kraus: np.ndarray, rho) -> np.ndarray:
    d = kraus.shape[1]
    if len(kraus) == 0:
        return np.zeros((d, d), dtype=np.complex128)
    return (kraus @ np.asarray(rho, dtype=np.complex128) @ kraus.conj().transpose(0, 2, 1)).sum(axis=0)


def _dual_sandwich(kraus: np.ndarray, x) -> np.ndarray:
    d = kraus.shape[1]
    if len(kraus) == 0:
        return np.zeros((d, d), dtype=np.complex128)
    return (kraus.conj().transpose(0, 2, 1) @ np.asarray(x, dtype=np.complex128) @ kraus).sum(axis=0)


@dataclass(frozen=True)
class Channel:
    """Trace-preserving CP map ``rho -> sum_k K rho K^dag``."""

    kraus: np.ndarray

    def __post_init__(self):
        k = _kraus_stack(self.kraus)
        d = k.shape[1]
        total = np.einsum("kji,kjl->il", k.conj(), k)
        if np.max(np.abs(total - np.eye(d))) > TOL_PROB:
            raise ValidationError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus", k)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    def apply(self, rho) -> np.ndarray:
        return _sandwich(self.kraus, rho)

    def dual(self, x) -> np.ndarray:
        """Heisenberg-picture map ``X -> sum_k K^dag X K``."""
        return _dual_sandwich(self.kraus, x)


def identity_channel(dim: int) -> Channel:
    return Channel(np.eye(dim, dtype=np.complex128)[None])


def unitary_channel(u) -> Channel:
    return Channel(np.asarray(u, dtype=np.complex128)[None])


@dataclass(frozen=True)
class Instrument:
    """Outcome values, each with its own Kraus family; the total is trace preserving."""

    values: np.ndarray
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        kraus = tuple(_kraus_stack(k) for k in self.kraus)
        if len(values) != len(kraus) or not kraus:
            raise ValidationError("an instrument needs one Kraus family per outcome value")
        if len(set(values.tolist())) != len(values):
            raise ValidationError("instrument outcome values must be distinct")
        d = kraus[0].shape[1]
        if any(k.shape[1] != d for k in kraus):
            raise DimensionError("Kraus families differ in dimension")
        total = sum(np.einsum("kji,kjl->il", k.conj(), k) for k in kraus)
        if np.max(np.abs(total - np.eye(d))) > TOL_PROB:
            raise ValidationError("instrument is not trace preserving")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kraus", kraus)

    @classmethod
    def from_pairs(cls, pairs) -> "Instrument":
        pairs = list(pairs)
        return cls(np.array([v for v, _ in pairs], dtype=float), tuple(k for _, k in pairs))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[1]

    def __len__(self) -> int:
        return len(self.values)

    def indices(self, subset: Iterable[float]) -> list[int]:
        wanted = set(float(x) for x in subset)
        lookup = {v: i for i, v in enumerate(self.values.tolist())}
        unknown = wanted - set(lookup)
        if unknown:
            raise ValidationError(f"unknown outcome values {sorted(unknown)}")
        return sorted(lookup[v] for v in wanted)

    def kraus_for(self, subset: Iterable[float]) -> np.ndarray:
        idx = self.indices(subset)
        if not idx:
            return np.zeros((0, self.dim, self.dim), dtype=np.complex128)
        return np.concatenate([self.kraus[i] for i in idx])


def apply_selective(ins: Instrument, subset, rho) -> np.ndarray:
    """Unnormalized post-measurement state ``I(Delta) rho``."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (ins.dim, ins.dim):
        raise DimensionError("state and instrument differ in dimension")
    return _sandwich(ins.kraus_for(subset), rho)


def output_state(ins: Instrument, subset, rho) -> np.ndarray:
    """State conditioned on the outcome lying in ``subset``."""
    out = apply_selective(ins, subset, rho)
    p = float(np.trace(out).real)
    if p <= TOL_PROB:
        raise ZeroProbabilityError(f"outcome set has probability {p:.3e}")
    return out / p


def posterior_family(ins: Instrument, rho) -> list[tuple[float, float, np.ndarray | None]]:
    """``(value, probability, posterior state)`` per outcome; the state is ``None``
    when the outcome cannot occur."""
    family = []
    for v, k in zip(ins.values, ins.kraus):
        out = _sandwich(k, rho)
        p = float(np.trace(out).real)
        family.append((float(v), p, out / p if p > TOL_PROB else None))
    return family


def povm_of(ins: Instrument) -> Povm:
    return Povm(ins.values.copy(), tuple(np.einsum("kji,kjl->il", k.conj(), k) for k in ins.kraus))


def dual_apply(ins: Instrument, subset, x) -> np.ndarray:
    """``I(Delta)^* X = sum K^dag X K`` over the Kraus operators of ``subset``."""
    return _dual_sandwich(ins.kraus_for(subset), x)


def nonselective(ins: Instrument) -> Channel:
    return Channel(np.concatenate(ins.kraus))


def instrument_with_channel(channel: Channel, values, weights) -> Instrument:
    """Outcome drawn from a fixed distribution independently of the input,
    followed by ``channel``: ``I(Delta) rho = mu(Delta) T rho``."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1) > TOL_PROB:
        raise ValidationError("weights must form a probability distribution")
    return Instrument(np.asarray(values, dtype=float), tuple(np.sqrt(w) * channel.kraus for w in weights))


def joint_probability(first: Instrument, second: Povm, rho, d1, d2) -> float:
    """``Pr{x in d1, y in d2}`` for a measurement of ``first`` followed by ``second``."""
    return mean(dual_apply(first, d1, second.effect(d2)), rho)


def sequential_probability(instruments: Sequence[Instrument], subsets: Sequence, rho) -> float:
    """``Tr[I_n(D_n) ... I_1(D_1) rho]`` for a chain of measurements."""
    out = np.asarray(rho, dtype=np.complex128)
    for ins, sub in zip(instruments, subsets):
        out = apply_selective(ins, sub, out)
    return float(np.trace(out).real)


def choi_matrix(linear_map: Callable[[np.ndarray], np.ndarray], dim: int) -> np.ndarray:
    """``sum_ij |i><j| (x) L(|i><j|)`` built from the map's action on matrix units."""
    blocks = []
    for i in range(dim):
        row = []
        for j in range(dim):
            unit = np.zeros((dim, dim), dtype=np.complex128)
            unit[i, j] = 1.0
            row.append(np.asarray(linear_map(unit), dtype=np.complex128))
        blocks.append(row)
    return np.block(blocks)


def choi_psd_check(choi, tol: float = TOL_PSD) -> bool:
    choi = np.asarray(choi, dtype=np.complex128)
    if np.max(np.abs(choi - choi.conj().T)) > 1e-9:
        return False
    return bool(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0] >= -tol)


def is_completely_positive(linear_map: Callable[[np.ndarray], np.ndarray], dim: int, tol: float = TOL_PSD) -> bool:
    return choi_psd_check(choi_matrix(linear_map, dim), tol)


def outcome_choi(ins: Instrument, subset) -> np.ndarray:
    kraus = ins.kraus_for(subset)
    return choi_matrix(lambda x: _sandwich(kraus, x), ins.dim)


def instrument_residual(a: Instrument, b: Instrument) -> float:
    """Largest Choi-matrix difference per outcome value; the instruments must
    act on the same space. Outcomes missing on one side count as zero maps."""
    if a.dim != b.dim:
        raise DimensionError("instruments act on different spaces")
    worst = 0.0
    for v in sorted(set(a.values.tolist()) | set(b.values.tolist())):
        ca = outcome_choi(a, [v]) if v in a.values else 0.0
        cb = outcome_choi(b, [v]) if v in b.values else 0.0
        worst = max(worst, float(np.max(np.abs(np.asarray(ca - cb)))))
    return worst


def channel_residual(a: Channel, b: Channel) -> float:
    ca = choi_matrix(a.apply, a.dim)
    cb = choi_matrix(b.apply, b.dim)
    return float(np.max(np.abs(ca - cb)))


def tensor_extend(ins: Instrument, extra_dim: int) -> Instrument:
    """``I (x) id`` on ``H (x) C^extra_dim``."""
    eye = np.eye(extra_dim, dtype=np.complex128)
    return Instrument(
        ins.values.copy(),
        tuple(np.stack([np.kron(k, eye) for k in fam]) for fam in ins.kraus),
    )


def luders_instrument(a) -> Instrument:
    """Projection-postulate instrument: one projector per spectral branch."""
    sm = spectral_measure(a)
    return Instrument(sm.values.copy(), tuple(p[None] for p in sm.projectors))


def is_repeatable(ins: Instrument, tol: float = 1e-9) -> bool:
    """Checks ``I(x_i)^* F_j = delta_ij F_i`` for all outcome pairs."""
    effects = povm_of(ins).effects
    for i, k in enumerate(ins.kraus):
        for j, f in enumerate(effects):
            target = effects[i] if i == j else 0.0
            if np.max(np.abs(_dual_sandwich(k, f) - target)) > tol:
                return False
    return True


def _state_factor(rho) -> np.ndarray:
    """``W`` with ``rho = W W^dag`` (columns for the nonzero eigenvalues only)."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    keep = w > 0
    return v[:, keep] * np.sqrt(w[keep])


def repetition_error(ins: Instrument, rho) -> float:
    """Root-mean-square difference between outputs of two successive applications.

    Each joint probability ``Tr[F_j I(x_i) rho]`` is evaluated as a sum of
    squared norms ``||L K W||^2`` over Kraus operators ``K`` of outcome ``i``
    and ``L`` of outcome ``j``, which keeps it nonnegative and lets the
    off-diagonal terms of a repeatable instrument vanish to second order.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (ins.dim, ins.dim):
        raise DimensionError("state and instrument differ in dimension")
    factor = _state_factor(rho)
    posts = [k @ factor for k in ins.kraus]
    x = ins.values
    sq = 0.0
    for j, later in enumerate(ins.kraus):
        for i, post in enumerate(posts):
            if i != j:
                sq += (x[i] - x[j]) ** 2 * float(np.sum(np.abs(later[:, None] @ post[None]) ** 2))
    return float(np.sqrt(sq))


def is_nondisturbing(ch: Channel, b, tol: float = 1e-9) -> bool:
    """True when the dual channel fixes every spectral projector of ``b``."""
    sm = spectral_measure(b)
    return all(np.max(np.abs(ch.dual(p) - p)) <= tol for p in sm.projectors)


def pulled_back_povm(ch: Channel, b) -> Povm:
    """``Delta -> T^* E^B(Delta)``: the POVM of measuring ``b`` after the channel."""
    sm = spectral_measure(b)
    return Povm(sm.values.copy(), tuple(ch.dual(p) for p in sm.projectors))


def disturbance(ch: Channel, b, rho) -> float:
    b = check_observable(b)
    return distance(pulled_back_povm(ch, b), b, rho)


def mean_disturbance_operator(ch: Channel, b) -> np.ndarray:
    b = check_observable(b)
    return ch.dual(b) - b


def joint_nondisturbing_check(first: Instrument, b, rho, d1, d2, tol: float = 1e-9) -> bool:
    """Compares the sequential joint probability with the simultaneous formula
    ``Tr[Pi(d1) E^B(d2) rho]``."""
    check_state(rho)
    e_b = Povm.of_observable(b)
    seq = joint_probability(first, e_b, rho, d1, d2)
    simultaneous = expect(povm_of(first).effect(d1) @ e_b.effect(d2), rho)
    return abs(seq - simultaneous) <= tol
