"""Uniform planar array geometry: steering vectors, beam regions, direction
grids, dictionaries and the reference gain.

Conventions used across the package:

* The planar steering vector is ``d_h(psi_h) kron d_v(psi_v)``; the horizontal
  factor is the outer one, so antenna ``(i, j)`` sits at flat index
  ``i * m_v + j``.
* Spatial frequencies are radians.  Stored directions are wrapped to
  ``[-pi, pi)``.
* Phases of complex entries are reported in ``[0, 2*pi)`` with ``phase(0) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Half-width of the sector region in each axis for d = lambda / 2.
PSI_BOUND_H = math.pi
PSI_BOUND_V = math.pi / math.sqrt(2.0)

UNIT_NORM_TOL = 1e-9
# Grid points within this distance of a region edge are snapped onto it, so
# half-open membership does not depend on rounding.
EDGE_EPS = 1e-9


class ContractError(ValueError):
    """An operation was called with arguments violating its precondition."""


def wrap_phase(psi):
    """Wrap angles to ``[-pi, pi)``."""
    return np.mod(np.asarray(psi, dtype=float) + math.pi, TWO_PI) - math.pi


def phase_of(x):
    """Entrywise phase in ``[0, 2*pi)``; the phase of zero is zero."""
    return np.mod(np.angle(x), TWO_PI)


def psi_bound(axis: str) -> float:
    if axis == "h":
        return PSI_BOUND_H
    if axis == "v":
        return PSI_BOUND_V
    raise ValueError(f"axis must be 'h' or 'v', got {axis!r}")


@dataclass(frozen=True)
class UpaConfig:
    """Array of ``m_h`` columns by ``m_v`` rows driven by ``n_rf`` RF chains
    with ``b_phase``-bit phase shifters."""

    m_h: int
    m_v: int
    n_rf: int = 4
    b_phase: int = 6
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        for name in ("m_h", "m_v", "n_rf", "b_phase"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.n_rf > self.m:
            raise ValueError(f"n_rf={self.n_rf} exceeds antenna count M={self.m}")
        if self.spacing_over_lambda != 0.5:
            raise ValueError("only half-wavelength spacing is supported")

    @property
    def m(self) -> int:
        return self.m_h * self.m_v

    def antennas(self, axis: str) -> int:
        return self.m_h if axis == "h" else self.m_v


@dataclass(frozen=True)
class Direction:
    psi_h: float
    psi_v: float

    def __post_init__(self):
        object.__setattr__(self, "psi_h", float(wrap_phase(self.psi_h)))
        object.__setattr__(self, "psi_v", float(wrap_phase(self.psi_v)))


@dataclass(frozen=True)
class AngleOfDeparture:
    theta_h: float
    theta_v: float

    def __post_init__(self):
        if not -math.pi / 2 <= self.theta_h < math.pi / 2:
            raise ValueError(f"theta_h={self.theta_h} outside [-pi/2, pi/2)")
        if not -math.pi / 4 <= self.theta_v < math.pi / 4:
            raise ValueError(f"theta_v={self.theta_v} outside [-pi/4, pi/4)")

    def direction(self) -> Direction:
        return Direction(*aod_to_psi(self.theta_h, self.theta_v))


def aod_to_psi(theta_h, theta_v):
    """Physical departure angles to spatial frequencies for d = lambda / 2."""
    theta_h = np.asarray(theta_h, dtype=float)
    theta_v = np.asarray(theta_v, dtype=float)
    return math.pi * np.sin(theta_h) * np.cos(theta_v), math.pi * np.sin(theta_v)


@dataclass(frozen=True)
class BeamRegion:
    """Rectangle ``[psi_h_lo, psi_h_hi) x [psi_v_lo, psi_v_hi)``.

    Guard-banded regions may poke outside ``[-pi, pi)``; membership tests are
    2*pi-periodic so such regions are still meaningful.
    """

    psi_h_lo: float
    psi_h_hi: float
    psi_v_lo: float
    psi_v_hi: float

    def __post_init__(self):
        if not (self.psi_h_lo < self.psi_h_hi and self.psi_v_lo < self.psi_v_hi):
            raise ValueError(f"degenerate region {self}")

    @property
    def width_h(self) -> float:
        return self.psi_h_hi - self.psi_h_lo

    @property
    def width_v(self) -> float:
        return self.psi_v_hi - self.psi_v_lo

    @property
    def area(self) -> float:
        return self.width_h * self.width_v

    def contains_h(self, psi_h, periodic: bool = True):
        return _in_interval(psi_h, self.psi_h_lo, self.width_h, periodic)

    def contains_v(self, psi_v, periodic: bool = True):
        return _in_interval(psi_v, self.psi_v_lo, self.width_v, periodic)

    def contains(self, psi_h, psi_v, periodic: bool = True):
        return self.contains_h(psi_h, periodic) & self.contains_v(psi_v, periodic)


def _in_interval(x, lo, width, periodic):
    x = np.asarray(x, dtype=float) + EDGE_EPS
    if not periodic:
        return (x >= lo) & (x < lo + width)
    if width >= TWO_PI:
        return np.ones_like(x, dtype=bool)
    return np.mod(x - lo, TWO_PI) < width


def steering_vector(m_a: int, psi) -> np.ndarray:
    """Unit-norm array response ``[1, e^{j psi}, ..., e^{j (m_a-1) psi}] / sqrt(m_a)``.

    A scalar ``psi`` gives a vector of length ``m_a``; an array of angles gives
    an ``m_a x len(psi)`` matrix with one steering vector per column.
    """
    if m_a < 1:
        raise ContractError(f"m_a must be >= 1, got {m_a}")
    psi_arr = np.asarray(psi, dtype=float)
    out = np.exp(1j * np.multiply.outer(np.arange(m_a), psi_arr)) / math.sqrt(m_a)
    return out


def planar_steering(cfg: UpaConfig, direction: Direction) -> np.ndarray:
    return np.kron(
        steering_vector(cfg.m_h, direction.psi_h),
        steering_vector(cfg.m_v, direction.psi_v),
    )


def check_unit_norm(c: np.ndarray, tol: float = UNIT_NORM_TOL) -> None:
    norm = np.linalg.norm(c)
    if abs(norm - 1.0) > tol:
        raise ContractError(f"beamformer must have unit norm, got {norm:.12g}")


def reference_gain(c: np.ndarray, direction: Direction, cfg: UpaConfig) -> float:
    """``|(d_h(psi_h) kron d_v(psi_v))^H c|^2`` for a unit-norm beamformer ``c``."""
    c = np.asarray(c, dtype=complex)
    check_unit_norm(c)
    return float(abs(np.vdot(planar_steering(cfg, direction), c)) ** 2)


def pattern_on_axes(c: np.ndarray, cfg: UpaConfig, psi_h, psi_v) -> np.ndarray:
    """Reference gain on the tensor grid ``psi_h x psi_v``.

    ``c`` may be a single vector of length M or a stack ``(..., M)``; the result
    has shape ``(..., len(psi_h), len(psi_v))``.
    """
    c = np.asarray(c, dtype=complex)
    a_h = steering_vector(cfg.m_h, np.asarray(psi_h, dtype=float)).conj().T
    a_v = steering_vector(cfg.m_v, np.asarray(psi_v, dtype=float)).conj()
    mat = c.reshape(c.shape[:-1] + (cfg.m_h, cfg.m_v))
    amp = a_h @ mat @ a_v
    return amp.real**2 + amp.imag**2


def pattern_integral(c: np.ndarray, cfg: UpaConfig, resolution: int = 512) -> float:
    """Midpoint-rule integral of the beam pattern over ``[-pi, pi)^2``."""
    check_unit_norm(c)
    step = TWO_PI / resolution
    psi = -math.pi + step * (np.arange(resolution) + 0.5)
    return float(pattern_on_axes(c, cfg, psi, psi).sum() * step * step)


def direction_grid(axis: str, q_count: int, l_count: int, psi_bound_a: float | None = None) -> np.ndarray:
    """Quantized beam directions, ``l_count`` per beam range, ordered by
    (beam index, direction index)."""
    if q_count < 1 or l_count < 1:
        raise ValueError("q_count and l_count must be >= 1")
    bound = psi_bound(axis) if psi_bound_a is None else psi_bound_a
    width = 2.0 * bound / q_count
    b = np.repeat(np.arange(q_count), l_count)
    ell = np.tile(np.arange(1, l_count + 1), q_count)
    return -bound + b * width + width * (ell - 0.5) / l_count


@dataclass(frozen=True)
class DirectionDictionary:
    axis: str
    q_count: int
    l_count: int
    columns: np.ndarray = field(repr=False)
    directions: np.ndarray = field(repr=False)

    @property
    def m_a(self) -> int:
        return self.columns.shape[0]

    def block(self, b: int) -> np.ndarray:
        """Columns of beam range ``b`` (1-based), an ``m_a x l_count`` matrix."""
        if not 1 <= b <= self.q_count:
            raise IndexError(f"beam index {b} outside 1..{self.q_count}")
        start = (b - 1) * self.l_count
        return self.columns[:, start:start + self.l_count]

    def gram_deviation(self) -> float:
        """Spectral-norm distance of ``D D^H`` from ``(L Q / M) I``."""
        gram = self.columns @ self.columns.conj().T
        scale = self.l_count * self.q_count / self.m_a
        return float(np.linalg.norm(gram - scale * np.eye(self.m_a), 2))


def build_dictionary(axis: str, m_a: int, q_count: int, l_count: int,
                     psi_bound_a: float | None = None) -> DirectionDictionary:
    directions = direction_grid(axis, q_count, l_count, psi_bound_a)
    columns = steering_vector(m_a, directions)
    columns.setflags(write=False)
    directions.setflags(write=False)
    return DirectionDictionary(axis, q_count, l_count, columns, directions)


def quantize_phases(F: np.ndarray, b_phase: int) -> np.ndarray:
    """Round each entry's phase to the nearest of ``2^B`` uniform levels.

    Distances are circular; an exact tie goes to the smaller phase value in
    ``[0, 2*pi)``.  Magnitudes are kept.
    """
    F = np.asarray(F, dtype=complex)
    levels = 2**b_phase
    step = TWO_PI / levels
    x = phase_of(F) / step
    k = np.floor(x)
    frac = x - k
    k = np.where(frac > 0.5, k + 1, k)
    # a tie at the top wraps to level 0, which is the smaller phase
    k = np.where((frac == 0.5) & (k == levels - 1), 0, k)
    k = np.mod(k, levels)
    return np.abs(F) * np.exp(1j * k * step)


@dataclass(frozen=True)
class Beamformer:
    """Hybrid beamformer ``c = F v`` with equal-gain analog columns."""

    analog: np.ndarray = field(repr=False)
    baseband: np.ndarray = field(repr=False)
    quantized: bool = False
    regularized: bool = False

    def __post_init__(self):
        analog = np.array(self.analog, dtype=complex)
        if analog.ndim != 2:
            raise ValueError("analog matrix must be 2-D")
        baseband = np.array(self.baseband, dtype=complex).reshape(analog.shape[1])
        analog.setflags(write=False)
        baseband.setflags(write=False)
        object.__setattr__(self, "analog", analog)
        object.__setattr__(self, "baseband", baseband)
        composite = analog @ baseband
        composite.setflags(write=False)
        object.__setattr__(self, "_composite", composite)

    @property
    def composite(self) -> np.ndarray:
        return self._composite

    @property
    def n_rf(self) -> int:
        return self.analog.shape[1]

    def analog_magnitude_error(self) -> float:
        m = self.analog.shape[0]
        return float(np.max(np.abs(np.abs(self.analog) - 1.0 / math.sqrt(m))))
