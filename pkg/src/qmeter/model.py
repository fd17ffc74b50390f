"""Indirect measurement models ``(K, sigma, U, M)``.

Every statistic is computed matrix-free from the dilation columns
``V_k = U (I (x) |sigma_k>)``, one per eigenvector of the probe state, so the
joint unitary only ever acts on ``dim_object`` columns at a time. ``U`` may be
a dense array or a scipy sparse matrix (the grid models use permutations).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from qmeter.exceptions import DimensionError, ValidationError
from qmeter.grid import CyclicGrid, normalize, position_op
from qmeter.instrument import Channel, Instrument, dual_apply, nonselective
from qmeter.operators import (
    TOL_PSD,
    SpectralMeasure,
    check_observable,
    check_state,
    dagger,
    is_unitary,
    mean,
    psd_sqrt,
    spectral_measure,
    tensor,
)
from qmeter.povm import Povm

PROBE_EIG_CUTOFF = 1e-14
DENSE_JOINT_LIMIT = 1024


@dataclass(frozen=True, eq=False)
class IndirectModel:
    dim_object: int
    dim_probe: int
    probe_state: np.ndarray
    unitary: object
    probe_observable: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        sigma = check_state(self.probe_state)
        m = check_observable(self.probe_observable)
        if sigma.shape[0] != self.dim_probe or m.shape[0] != self.dim_probe:
            raise DimensionError("probe state/observable do not match dim_probe")
        u = self.unitary
        if not sp.issparse(u):
            u = np.asarray(u, dtype=np.complex128)
        else:
            u = sp.csr_matrix(u)
        n = self.dim_object * self.dim_probe
        if u.shape != (n, n):
            raise DimensionError(f"unitary has shape {u.shape}, expected {(n, n)}")
        if not is_unitary(u, 1e-9):
            raise ValidationError("interaction is not unitary")
        object.__setattr__(self, "probe_state", sigma)
        object.__setattr__(self, "probe_observable", m)
        object.__setattr__(self, "unitary", u)

    @property
    def joint_dim(self) -> int:
        return self.dim_object * self.dim_probe

    @cached_property
    def probe_spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenpairs of the probe state with nonnegligible weight."""
        w, v = np.linalg.eigh(self.probe_state)
        keep = w > PROBE_EIG_CUTOFF
        return w[keep], v[:, keep]

    @cached_property
    def meter(self) -> SpectralMeasure:
        return spectral_measure(self.probe_observable)

    @cached_property
    def dilation(self) -> list[tuple[float, np.ndarray]]:
        """``(lambda_k, U (I (x) |sigma_k>))`` with each block of shape (joint_dim, dim_object)."""
        lam, vecs = self.probe_spectrum
        return [(float(l), self.apply_u(embed(vecs[:, k], self.dim_object))) for k, l in enumerate(lam)]

    def apply_u(self, x) -> np.ndarray:
        return np.asarray(self.unitary @ x)

    def apply_u_dag(self, x) -> np.ndarray:
        return np.asarray(dagger(self.unitary) @ x)

    def dense_unitary(self) -> np.ndarray:
        u = self.unitary
        return u.toarray() if sp.issparse(u) else u


def embed(probe_vec, dim_object: int) -> np.ndarray:
    """``I (x) |xi>`` as a (dim_object * dim_probe, dim_object) matrix."""
    probe_vec = np.asarray(probe_vec, dtype=np.complex128).reshape(-1, 1)
    return np.kron(np.eye(dim_object), probe_vec)


def apply_object(op, cols, dim_object: int) -> np.ndarray:
    """``(op (x) I)`` applied to each column of ``cols``."""
    m = cols.shape[1]
    t = cols.reshape(dim_object, -1, m)
    return np.einsum("st,tpm->spm", op, t).reshape(cols.shape)


def apply_probe(op, cols, dim_object: int) -> np.ndarray:
    """``(I (x) op)`` applied to each column of ``cols``."""
    m = cols.shape[1]
    t = cols.reshape(dim_object, -1, m)
    return np.einsum("pq,sqm->spm", op, t).reshape(cols.shape)


def _dual_of_joint(m: IndirectModel, joint_apply) -> np.ndarray:
    """``E_sigma[U^dag X U]`` for a joint operator given by its action on columns."""
    return sum(lam * v.conj().T @ joint_apply(v) for lam, v in m.dilation)


def kraus_operators(m: IndirectModel) -> list[tuple[float, np.ndarray]]:
    """``(outcome value, stacked Kraus operators)`` per spectral branch of the meter.

    Operators are ``sqrt(lambda_k) <m_j| U |sigma_k>`` for meter eigenvectors
    ``m_j`` of the branch.
    """
    d = m.dim_object
    out = []
    blocks = [(lam, v.reshape(d, m.dim_probe, d)) for lam, v in m.dilation]
    for value, vecs in zip(m.meter.values, m.meter.eigvecs):
        ops = []
        for lam, t in blocks:
            proj = np.einsum("spc,pj->jsc", t, vecs.conj())
            ops.extend(np.sqrt(lam) * proj)
        out.append((float(value), np.stack(ops)))
    return out


def derive_povm(m: IndirectModel) -> Povm:
    pairs = [(v, np.einsum("kji,kjl->il", k.conj(), k)) for v, k in kraus_operators(m)]
    return Povm.from_pairs(pairs)


def derive_instrument(m: IndirectModel) -> Instrument:
    return Instrument.from_pairs(kraus_operators(m))


def derive_channel(m: IndirectModel) -> Channel:
    return nonselective(derive_instrument(m))


def first_moment(m: IndirectModel) -> np.ndarray:
    """``O(Pi) = E_sigma(M_out)``."""
    return _dual_of_joint(m, lambda v: apply_probe(m.probe_observable, v, m.dim_object))


def second_moment(m: IndirectModel) -> np.ndarray:
    mm = m.probe_observable @ m.probe_observable
    return _dual_of_joint(m, lambda v: apply_probe(mm, v, m.dim_object))


def dual_channel(m: IndirectModel, x) -> np.ndarray:
    """``T^*(X) = E_sigma(U^dag (X (x) I) U)``."""
    x = np.asarray(x, dtype=np.complex128)
    return _dual_of_joint(m, lambda v: apply_object(x, v, m.dim_object))


def _noise_cols(m: IndirectModel, a, cols) -> np.ndarray:
    meter_out = m.apply_u_dag(apply_probe(m.probe_observable, m.apply_u(cols), m.dim_object))
    return meter_out - apply_object(a, cols, m.dim_object)


def _disturbance_cols(m: IndirectModel, b, cols) -> np.ndarray:
    b_out = m.apply_u_dag(apply_object(b, m.apply_u(cols), m.dim_object))
    return b_out - apply_object(b, cols, m.dim_object)


def _product_state_columns(m: IndirectModel):
    lam, vecs = m.probe_spectrum
    return [(float(l), embed(vecs[:, k], m.dim_object)) for k, l in enumerate(lam)]


def _mean_square(m: IndirectModel, apply_op, rho) -> float:
    """``<X^2>`` in ``rho (x) sigma`` for a Hermitian joint ``X`` given by ``apply_op``."""
    total = 0.0
    for lam, s in _product_state_columns(m):
        w = apply_op(s)
        total += lam * mean(w.conj().T @ w, rho)
    return total


def _commutator_mean(m: IndirectModel, apply_x, apply_y, rho) -> complex:
    """``<[X, Y]>`` in ``rho (x) sigma`` for joint operators given by their actions."""
    total = 0j
    for lam, s in _product_state_columns(m):
        xy = s.conj().T @ apply_x(apply_y(s))
        yx = s.conj().T @ apply_y(apply_x(s))
        total += lam * np.einsum("ij,ji->", xy - yx, rho)
    return total


def _check_object(m: IndirectModel, a, rho=None):
    a = check_observable(a)
    if a.shape[0] != m.dim_object:
        raise DimensionError("observable does not act on the object space")
    if rho is not None:
        rho = check_state(rho)
        if rho.shape[0] != m.dim_object:
            raise DimensionError("state does not act on the object space")
        return a, rho
    return a


def rms_noise(m: IndirectModel, a, rho) -> float:
    """``<N(A)^2>^{1/2}`` in ``rho (x) sigma`` with ``N(A) = M_out - A_in``."""
    a, rho = _check_object(m, a, rho)
    return float(np.sqrt(max(_mean_square(m, lambda c: _noise_cols(m, a, c), rho), 0.0)))


def rms_disturbance(m: IndirectModel, b, rho) -> float:
    """``<D(B)^2>^{1/2}`` in ``rho (x) sigma`` with ``D(B) = B_out - B_in``."""
    b, rho = _check_object(m, b, rho)
    return float(np.sqrt(max(_mean_square(m, lambda c: _disturbance_cols(m, b, c), rho), 0.0)))


def noise_commutator_mean(m: IndirectModel, a, b, rho) -> complex:
    """``<[N(A), B_in]>`` evaluated on the joint space."""
    return _commutator_mean(
        m,
        lambda c: _noise_cols(m, a, c),
        lambda c: apply_object(b, c, m.dim_object),
        rho,
    )


def disturbance_commutator_mean(m: IndirectModel, a, b, rho) -> complex:
    """``<[A_in, D(B)]>`` evaluated on the joint space."""
    return _commutator_mean(
        m,
        lambda c: apply_object(a, c, m.dim_object),
        lambda c: _disturbance_cols(m, b, c),
        rho,
    )


def meter_out_moments(m: IndirectModel, rho) -> tuple[float, float]:
    """Mean and standard deviation of ``M_out``; equals the output statistics."""
    mu = mean(first_moment(m), rho)
    return mu, float(np.sqrt(max(mean(second_moment(m), rho) - mu * mu, 0.0)))


def noise_operator(m: IndirectModel, a) -> np.ndarray:
    """Dense ``N(A) = U^dag (I (x) M) U - A (x) I`` on the joint space."""
    a = _check_object(m, a)
    u = m.dense_unitary()
    meter = tensor(np.eye(m.dim_object), m.probe_observable)
    return u.conj().T @ meter @ u - tensor(a, np.eye(m.dim_probe))


def disturbance_operator(m: IndirectModel, b) -> np.ndarray:
    """Dense ``D(B) = U^dag (B (x) I) U - B (x) I`` on the joint space."""
    b = _check_object(m, b)
    u = m.dense_unitary()
    b_in = tensor(b, np.eye(m.dim_probe))
    return u.conj().T @ b_in @ u - b_in


def _complete_to_unitary(iso: np.ndarray, dim_object: int, dim_probe: int) -> np.ndarray:
    """Unitary on ``H (x) K`` whose columns ``(s, 0)`` are the columns of ``iso``."""
    n = dim_object * dim_probe
    gram = iso.conj().T @ iso
    if np.max(np.abs(gram - np.eye(dim_object))) > 1e-9:
        raise ValidationError("dilation map is not an isometry")
    complement = scipy.linalg.null_space(iso.conj().T, rcond=1e-12)
    if complement.shape[1] != n - dim_object:
        raise ValidationError("could not complete the isometry to a unitary")
    u = np.empty((n, n), dtype=np.complex128)
    first = np.arange(dim_object) * dim_probe
    rest = np.setdiff1d(np.arange(n), first)
    u[:, first] = iso
    u[:, rest] = complement
    return u


def realize_instrument(ins: Instrument) -> IndirectModel:
    """Pure-probe model whose instrument equals ``ins``.

    The probe has one basis state per Kraus operator; the meter reads off
    the outcome value attached to each.
    """
    d = ins.dim
    ops, labels = [], []
    for v, fam in zip(ins.values, ins.kraus):
        for k in fam:
            ops.append(k)
            labels.append(float(v))
    r = max(len(ops), len(ins), 1)
    while len(ops) < r:
        ops.append(np.zeros((d, d), dtype=np.complex128))
        labels.append(float(ins.values[0]))
    # V psi = sum_c (K_c psi) (x) |c>, row index s * r + c
    iso = np.stack(ops, axis=1).reshape(d * r, d)
    u = _complete_to_unitary(iso, d, r)
    probe = np.zeros((r, r), dtype=np.complex128)
    probe[0, 0] = 1.0
    return IndirectModel(d, r, probe, u, np.diag(labels).astype(np.complex128))


def dilate_povm(pi: Povm) -> IndirectModel:
    """Model for ``pi`` via the measure-and-prepare instrument
    ``I(x_i) rho = Tr[F_i rho] |0><0|``."""
    d = pi.dim
    fams = []
    for f in pi.effects:
        root = psd_sqrt(f)
        fam = np.zeros((d, d, d), dtype=np.complex128)
        for j in range(d):
            fam[j, 0, :] = root[j, :]
        fams.append(fam)
    return realize_instrument(Instrument(pi.values.copy(), tuple(fams)))


def dilate_channel(ch: Channel) -> IndirectModel:
    """Model whose nonselective operation is ``ch``; the meter is the identity projection."""
    return realize_instrument(Instrument(np.array([1.0]), (ch.kraus,)))


def isometry_representation_check(m: IndirectModel, a, subset) -> float:
    """Largest entry of ``|I(D)^* A - V^dag (A (x) E^M(D)) V|`` for a pure probe."""
    lam, vecs = m.probe_spectrum
    if len(lam) != 1 or abs(lam[0] - 1) > TOL_PSD:
        raise ValidationError("isometry representation needs a pure probe state")
    a = _check_object(m, a)
    v = m.dilation[0][1]
    wanted = set(float(x) for x in subset)
    e_m = sum(
        (p for val, p in zip(m.meter.values, m.meter.projectors) if float(val) in wanted),
        np.zeros((m.dim_probe, m.dim_probe), dtype=np.complex128),
    )
    rep = v.conj().T @ apply_probe(e_m, apply_object(a, v, m.dim_object), m.dim_object)
    ins = derive_instrument(m)
    present = [x for x in wanted if x in ins.values]
    dual = dual_apply(ins, present, a)
    return float(np.max(np.abs(dual - rep)))


def canonical_model(a, grid: CyclicGrid, probe) -> IndirectModel:
    """Model with ``U = exp(-i A (x) p / hbar)``: the probe is cyclically shifted
    by the eigenvalue of ``A``."""
    a = check_observable(a)
    probe = normalize(probe)
    if probe.shape[0] != grid.n_points:
        raise DimensionError("probe wavefunction does not live on the grid")
    sm = spectral_measure(a)
    steps = sm.values / grid.spacing
    if np.any(np.abs(steps - np.round(steps)) > 1e-9):
        raise ValidationError("eigenvalues of A must be integer multiples of the grid spacing")
    n = grid.n_points
    u = np.zeros((a.shape[0] * n, a.shape[0] * n), dtype=np.complex128)
    for step, p in zip(np.round(steps).astype(int), sm.projectors):
        shift = np.roll(np.eye(n), step, axis=0)
        u += np.kron(p, shift)
    return IndirectModel(
        a.shape[0],
        n,
        np.outer(probe, probe.conj()),
        u,
        position_op(grid),
        grid.hbar,
    )
