"""Cyclic position grid: position/momentum operators and wrapped Gaussian states.

Basis index ``j`` carries the position ``j * spacing`` folded into
``(-L/2, L/2]`` with ``L = n_points * spacing``. Momentum is diagonal in the
discrete Fourier basis with ``numpy.fft.fftfreq`` ordering.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from qmeter.exceptions import ValidationError
from qmeter.operators import SpectralMeasure, spectral_from_basis


@dataclass(frozen=True)
class CyclicGrid:
    n_points: int
    spacing: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 4:
            raise ValidationError("a cyclic grid needs at least 4 points")
        if self.spacing <= 0 or self.hbar <= 0:
            raise ValidationError("spacing and hbar must be positive")

    @property
    def length(self) -> float:
        return self.n_points * self.spacing

    @cached_property
    def index_offsets(self) -> np.ndarray:
        """Signed integer offset of each basis index, folded into ``(-N/2, N/2]``."""
        j = np.arange(self.n_points)
        return np.where(j <= self.n_points // 2, j, j - self.n_points)

    @cached_property
    def positions(self) -> np.ndarray:
        return self.index_offsets * self.spacing

    @cached_property
    def momenta(self) -> np.ndarray:
        return 2 * np.pi * self.hbar * np.fft.fftfreq(self.n_points, d=self.spacing)

    @cached_property
    def dft(self) -> np.ndarray:
        """Unitary whose columns are the plane waves ``exp(2 pi i j k / N) / sqrt(N)``."""
        n = self.n_points
        j = np.arange(n)
        return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)

    def index_of(self, position: float) -> int:
        """Basis index of the grid point nearest to ``position`` (mod L)."""
        return int(np.round(position / self.spacing)) % self.n_points


def position_op(g: CyclicGrid) -> np.ndarray:
    return np.diag(g.positions).astype(np.complex128)


def momentum_op(g: CyclicGrid) -> np.ndarray:
    f = g.dft
    p = (f * g.momenta) @ f.conj().T
    return (p + p.conj().T) / 2


def position_measure(g: CyclicGrid) -> SpectralMeasure:
    return spectral_from_basis(g.positions, np.eye(g.n_points, dtype=np.complex128))


def momentum_measure(g: CyclicGrid) -> SpectralMeasure:
    return spectral_from_basis(g.momenta, g.dft)


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValidationError("zero wavefunction")
    return psi / norm


def gaussian_state(g: CyclicGrid, center: float = 0.0, width: float = 1.0, momentum: float = 0.0) -> np.ndarray:
    """Wrapped Gaussian with position spread ``width`` (for width much less than L).

    ``momentum`` adds a plane-wave phase ``exp(i k x / hbar)``.
    """
    if width <= 0:
        raise ValidationError("width must be positive")
    x = g.positions
    amp = np.zeros(g.n_points)
    for image in range(-3, 4):
        d = x - center + image * g.length
        amp = amp + np.exp(-(d**2) / (4 * width**2))
    if not np.any(amp > 0):
        amp[g.index_of(center)] = 1.0
    psi = amp * np.exp(1j * momentum * x / g.hbar)
    return normalize(psi)


def delta_state(g: CyclicGrid, center: float = 0.0) -> np.ndarray:
    psi = np.zeros(g.n_points, dtype=np.complex128)
    psi[g.index_of(center)] = 1.0
    return psi


def tail_mass(g: CyclicGrid, psi, center: float = 0.0, radius: float | None = None) -> float:
    """Probability of finding the particle farther than ``radius`` (default L/4)
    from ``center``, measured along the circle."""
    if radius is None:
        radius = g.length / 4
    d = np.abs(((g.positions - center) + g.length / 2) % g.length - g.length / 2)
    p = np.abs(np.asarray(psi)) ** 2
    return float(p[d > radius].sum())


def momentum_tail_mass(g: CyclicGrid, psi, fraction: float = 0.5) -> float:
    """Probability of momenta beyond ``fraction`` of the Brillouin-zone edge."""
    amps = g.dft.conj().T @ np.asarray(psi, dtype=np.complex128)
    edge = np.pi * g.hbar / g.spacing
    return float(np.sum(np.abs(amps[np.abs(g.momenta) > fraction * edge]) ** 2))
