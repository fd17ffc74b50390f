"""Dense complex linear algebra and elementary quantum objects.

Observables and states are plain complex ``numpy`` arrays; the ``check_*``
helpers validate and normalize them. Composite systems always put the object
first and the probe second, ``H (x) K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from qmeter.exceptions import DimensionError, ValidationError

TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_TRACE = 1e-9
TOL_PROB = 1e-9
TOL_CLUSTER = 1e-8


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a finite 2-d complex array."""
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    return m


def dagger(u):
    """Conjugate transpose; works for dense arrays and scipy sparse matrices."""
    return u.conj().T


def is_hermitian(a: np.ndarray, tol: float = TOL_HERM) -> bool:
    return a.shape[0] == a.shape[1] and float(np.max(np.abs(a - a.conj().T), initial=0.0)) <= tol


def check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape}")
    return a


def check_observable(a, tol: float = TOL_HERM) -> np.ndarray:
    """Validate a Hermitian matrix and return its exactly Hermitian part."""
    a = check_square(a, "observable")
    if not is_hermitian(a, tol):
        raise ValidationError("observable is not Hermitian")
    return (a + a.conj().T) / 2


def check_state(rho, tol: float = TOL_PSD) -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD, unit trace)."""
    rho = check_square(rho, "state")
    if not is_hermitian(rho, TOL_HERM):
        raise ValidationError("state is not Hermitian")
    rho = (rho + rho.conj().T) / 2
    if abs(np.trace(rho).real - 1.0) > TOL_TRACE:
        raise ValidationError(f"state trace {np.trace(rho).real!r} is not 1")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ValidationError("state has a negative eigenvalue")
    return rho


def ket_to_state(psi) -> np.ndarray:
    """Density matrix ``|psi><psi|`` of a (normalized on the fly) vector."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValidationError("zero vector is not a state")
    psi = psi / norm
    return np.outer(psi, psi.conj())


def is_unitary(u, tol: float = 1e-9) -> bool:
    d = u.shape[0]
    if u.shape != (d, d):
        return False
    gram = dagger(u) @ u
    if sp.issparse(gram):
        diff = (gram - sp.identity(d, format="csr")).tocsr()
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol
    return float(np.max(np.abs(gram - np.eye(d)))) <= tol


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a (x) b`` (object factor first)."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def partial_trace_probe(c, dim_s: int, dim_p: int) -> np.ndarray:
    """Trace out the second (probe) factor of an operator on ``H (x) K``."""
    c = np.asarray(c, dtype=np.complex128)
    n = dim_s * dim_p
    if c.shape != (n, n):
        raise DimensionError(f"operator of shape {c.shape} does not act on {dim_s}x{dim_p}")
    return np.einsum("ipjp->ij", c.reshape(dim_s, dim_p, dim_s, dim_p))


def conditional_expectation(c, sigma, dim_s: int) -> np.ndarray:
    """Return ``Tr_K[C (I (x) sigma)]``, the object operator with
    ``Tr[E(C) rho] = Tr[C (rho (x) sigma)]`` for every ``rho``."""
    sigma = check_state(sigma)
    dim_p = sigma.shape[0]
    c = np.asarray(c, dtype=np.complex128)
    if c.shape != (dim_s * dim_p,) * 2:
        raise DimensionError(f"operator of shape {c.shape} does not act on {dim_s}x{dim_p}")
    return np.einsum("ipjq,qp->ij", c.reshape(dim_s, dim_p, dim_s, dim_p), sigma)


@dataclass(frozen=True)
class SpectralMeasure:
    """Eigenvalues in increasing order with their (possibly degenerate) projectors."""

    values: np.ndarray
    projectors: tuple[np.ndarray, ...]
    eigvecs: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def branches(self):
        return list(zip(self.values.tolist(), self.projectors))

    def reconstruct(self) -> np.ndarray:
        return sum(v * p for v, p in zip(self.values, self.projectors))

    def function(self, f) -> np.ndarray:
        """Apply a real function through the spectral decomposition."""
        return sum(f(v) * p for v, p in zip(self.values, self.projectors))


def spectral_measure(a, tol_cluster: float = TOL_CLUSTER) -> SpectralMeasure:
    """Spectral decomposition of a Hermitian matrix.

    Eigenvalues closer than ``tol_cluster`` (chained) share one branch.
    """
    a = check_observable(a)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ValidationError(f"eigensolver did not converge: {exc}") from exc
    groups: list[list[int]] = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] <= tol_cluster:
            groups[-1].append(i)
        else:
            groups.append([i])
    values, projectors, vecs = [], [], []
    for g in groups:
        vg = v[:, g]
        values.append(float(w[g[len(g) // 2]]))
        projectors.append(vg @ vg.conj().T)
        vecs.append(vg)
    return SpectralMeasure(np.array(values), tuple(projectors), tuple(vecs))


def spectral_from_basis(values, basis) -> SpectralMeasure:
    """Spectral measure of ``sum_j values[j] |b_j><b_j|`` for an orthonormal basis
    given as the columns of ``basis``; equal values are merged."""
    values = np.asarray(values, dtype=float)
    basis = np.asarray(basis, dtype=np.complex128)
    order = np.argsort(values, kind="stable")
    uniq: list[float] = []
    cols: list[list[int]] = []
    for j in order:
        if uniq and values[j] == uniq[-1]:
            cols[-1].append(j)
        else:
            uniq.append(float(values[j]))
            cols.append([j])
    vecs = tuple(basis[:, c] for c in cols)
    return SpectralMeasure(np.array(uniq), tuple(v @ v.conj().T for v in vecs), vecs)


def psd_sqrt(a, tol: float = TOL_PSD) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues in ``[-tol, 0)`` are clamped to zero."""
    a = check_observable(a)
    w, v = np.linalg.eigh(a)
    if w[0] < -tol:
        raise ValidationError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def expect(a, rho) -> complex:
    a = np.asarray(a)
    rho = np.asarray(rho)
    if a.shape != rho.shape:
        raise DimensionError(f"operator {a.shape} and state {rho.shape} differ in dimension")
    return complex(np.einsum("ij,ji->", a, rho))


def mean(a, rho) -> float:
    return expect(a, rho).real


def variance(a, rho) -> float:
    a = np.asarray(a)
    m = mean(a, rho)
    return max(mean(a @ a, rho) - m * m, 0.0)


def std_dev(a, rho) -> float:
    return float(np.sqrt(variance(a, rho)))


def born_distribution(a, rho) -> list[tuple[float, float]]:
    """Outcome distribution ``[(eigenvalue, Tr[P rho])]`` of a projective measurement."""
    rho = check_state(rho)
    sm = spectral_measure(a)
    if sm.dim != rho.shape[0]:
        raise DimensionError("observable and state differ in dimension")
    return [(float(v), max(mean(p, rho), 0.0)) for v, p in sm.branches()]


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def commutator_bound(a, b, rho) -> float:
    """Right-hand side ``|Tr([A, B] rho)| / 2`` of the Robertson inequality."""
    return abs(expect(commutator(np.asarray(a), np.asarray(b)), rho)) / 2
