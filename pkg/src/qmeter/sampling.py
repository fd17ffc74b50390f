"""Seeded random generators for states, observables, measurements and models.

Every function takes a ``numpy.random.Generator`` so that sweeps are
reproducible from a single seed.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from qmeter.instrument import Channel, Instrument
from qmeter.model import IndirectModel
from qmeter.povm import Povm


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-distributed unitary."""
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(dim, random_state=rng)


def random_ket(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = ginibre(rng, dim, 1).reshape(-1)
    return v / np.linalg.norm(v)


def random_state(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Density matrix of the given rank (random rank when omitted)."""
    if rank is None:
        rank = int(rng.integers(1, dim + 1))
    g = ginibre(rng, dim, rank)
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return (rho + rho.conj().T) / 2


def random_observable(rng: np.random.Generator, dim: int, degenerate: bool = False) -> np.ndarray:
    """Hermitian matrix; with ``degenerate`` the eigenvalues are drawn from a
    small integer set so repeated values occur."""
    if degenerate:
        w = rng.integers(-2, 3, size=dim).astype(float)
    else:
        w = rng.normal(size=dim)
    u = random_unitary(rng, dim)
    a = (u * w) @ u.conj().T
    return (a + a.conj().T) / 2


def _random_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return random_unitary(rng, rows)[:, :cols]


def _distinct_values(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.sort(rng.choice(np.arange(-5, 6), size=n, replace=False)).astype(float) + rng.normal() * 0.1


def random_instrument(
    rng: np.random.Generator, dim: int, outcomes: int | None = None, kraus_per_outcome: int | None = None
) -> Instrument:
    """Instrument from a Haar isometry ``C^d -> C^d (x) C^(n k)`` cut into Kraus blocks."""
    n = outcomes or int(rng.integers(1, 4))
    k = kraus_per_outcome or int(rng.integers(1, 3))
    v = _random_isometry(rng, dim * n * k, dim).reshape(n, k, dim, dim)
    return Instrument(_distinct_values(rng, n), tuple(v[i] for i in range(n)))


def random_povm(rng: np.random.Generator, dim: int, outcomes: int | None = None) -> Povm:
    n = outcomes or int(rng.integers(1, 5))
    v = _random_isometry(rng, dim * n, dim).reshape(n, dim, dim)
    effects = tuple(b.conj().T @ b for b in v)
    return Povm(_distinct_values(rng, n), effects)


def random_channel(rng: np.random.Generator, dim: int, kraus: int | None = None) -> Channel:
    r = kraus or int(rng.integers(1, 4))
    return Channel(_random_isometry(rng, dim * r, dim).reshape(r, dim, dim))


def random_compatible_povm(rng: np.random.Generator, a) -> Povm:
    """POVM whose effects are diagonal in an eigenbasis of ``a``."""
    w, u = np.linalg.eigh(a)
    dim = len(w)
    n = int(rng.integers(1, 4))
    weights = rng.random((n, dim))
    weights /= weights.sum(axis=0, keepdims=True)
    effects = tuple((u * weights[i]) @ u.conj().T for i in range(n))
    return Povm(_distinct_values(rng, n), effects)


def random_model(
    rng: np.random.Generator, dim_object: int | None = None, dim_probe: int | None = None
) -> IndirectModel:
    """Haar interaction, mixed probe state and a (sometimes degenerate) meter."""
    d = dim_object or int(rng.integers(2, 4))
    r = dim_probe or int(rng.integers(2, 4))
    return IndirectModel(
        d,
        r,
        random_state(rng, r),
        random_unitary(rng, d * r),
        random_observable(rng, r, degenerate=bool(rng.random() < 0.3)),
    )
