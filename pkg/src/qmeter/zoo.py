"""Exact cyclic-grid versions of the continuous-variable position measurements.

Both interactions map wavefunctions by index arithmetic mod N, so the joint
unitaries are permutation matrices (stored sparse):

* von Neumann model: ``Psi(x, q) -> Psi(x, q - x)``
* (1,-2,2) model:    ``Psi(x, q) -> Psi(q, q - x)``
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from qmeter.exceptions import DimensionError, ValidationError
from qmeter.grid import CyclicGrid, gaussian_state, normalize, position_op
from qmeter.instrument import repetition_error
from qmeter.model import IndirectModel, derive_instrument
from qmeter.operators import ket_to_state, mean


def permutation_unitary(source: np.ndarray) -> sp.csr_matrix:
    """Sparse ``U`` with ``(U psi)[n] = psi[source[n]]``."""
    n = len(source)
    return sp.csr_matrix((np.ones(n, dtype=np.complex128), (np.arange(n), source)), shape=(n, n))


def _joint_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    ix, iq = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return ix.ravel(), iq.ravel()


def von_neumann_source(n: int) -> np.ndarray:
    ix, iq = _joint_indices(n)
    return ix * n + (iq - ix) % n


def noiseless_position_source(n: int) -> np.ndarray:
    ix, iq = _joint_indices(n)
    return iq * n + (iq - ix) % n


def object_translation_source(n: int) -> np.ndarray:
    """``Psi(x, q) -> Psi(x + q, q)``, i.e. ``exp(i p_x q / hbar)``."""
    ix, iq = _joint_indices(n)
    return ((ix + iq) % n) * n + iq


def _grid_model(g: CyclicGrid, probe, source) -> IndirectModel:
    probe = normalize(probe)
    if probe.shape[0] != g.n_points:
        raise DimensionError("probe wavefunction does not live on the grid")
    return IndirectModel(
        g.n_points,
        g.n_points,
        ket_to_state(probe),
        permutation_unitary(source),
        position_op(g),
        g.hbar,
    )


def von_neumann_model(g: CyclicGrid, probe) -> IndirectModel:
    """Position measurement with ``U = exp(-i x p / hbar)`` (probe shifted by x)."""
    return _grid_model(g, probe, von_neumann_source(g.n_points))


def noiseless_position_model(g: CyclicGrid, probe) -> IndirectModel:
    """The (1,-2,2) model: precise position measurement with output ``q_out = x_in``."""
    return _grid_model(g, probe, noiseless_position_source(g.n_points))


def factorized_noiseless_position(g: CyclicGrid) -> sp.csr_matrix:
    """``exp(-i x p / hbar) exp(i p_x q / hbar)`` as a product of two permutations."""
    first = permutation_unitary(object_translation_source(g.n_points))
    second = permutation_unitary(von_neumann_source(g.n_points))
    return (second @ first).tocsr()


def repetition_comparison(g: CyclicGrid, probe, object_state=None) -> tuple[float, float]:
    """Repetition errors ``(R_von_neumann, R_noiseless_position)`` for a zero-mean probe.

    Computed from the derived instruments. The default object state is a
    centered width-1 Gaussian, which keeps both outputs clear of the seam.
    """
    probe = normalize(probe)
    q = position_op(g)
    if abs(mean(q, ket_to_state(probe))) > 1e-8:
        raise ValidationError("repetition comparison needs a zero-mean probe")
    if object_state is None:
        object_state = ket_to_state(gaussian_state(g, 0.0, 1.0))
    r_vn = repetition_error(derive_instrument(von_neumann_model(g, probe)), object_state)
    r_nl = repetition_error(derive_instrument(noiseless_position_model(g, probe)), object_state)
    return r_vn, r_nl
