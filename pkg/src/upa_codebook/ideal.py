"""Beam-region partitioning and flat ideal beam patterns."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .array import PSI_BOUND_H, PSI_BOUND_V, BeamRegion, UpaConfig, direction_grid

logger = logging.getLogger(__name__)


class InfeasibleConfig(ValueError):
    """Codebook size is not smaller than the antenna count."""


@dataclass(frozen=True)
class CodebookConfig:
    q_h: int
    q_v: int
    gamma: float = 0.0
    l_h: int = 8
    l_v: int = 8
    i_phases: int = 3
    mse_grid_per_beam: int = 20

    def __post_init__(self):
        for name in ("q_h", "q_v", "l_h", "l_v", "i_phases", "mse_grid_per_beam"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def q(self) -> int:
        return self.q_h * self.q_v

    @property
    def beam_width_h(self) -> float:
        return 2.0 * PSI_BOUND_H / self.q_h

    @property
    def beam_width_v(self) -> float:
        return 2.0 * PSI_BOUND_V / self.q_v

    def shift(self, q: int, p: int) -> tuple[float, float]:
        """Offset of beam ``(q, p)`` (1-based) from beam ``(1, 1)``."""
        return (q - 1) * self.beam_width_h, (p - 1) * self.beam_width_v

    def validate(self, upa: UpaConfig) -> None:
        if self.q >= upa.m:
            raise InfeasibleConfig(f"codebook size Q={self.q} must be below M={upa.m}")
        if self.l_h * self.l_v * self.q < upa.m:
            logger.warning("L*Q=%d below M=%d; dictionary grid is coarser than the array",
                           self.l_h * self.l_v * self.q, upa.m)


def region_spread_factor() -> float:
    """Product of pi / psi_bound over both axes (sqrt(2) for half-wavelength)."""
    return (math.pi / PSI_BOUND_H) * (math.pi / PSI_BOUND_V)


def partition_regions(cfg: CodebookConfig) -> list[list[BeamRegion]]:
    """``regions[q-1][p-1]`` is the rectangle served by beam ``(q, p)``."""
    dh, dv = cfg.beam_width_h, cfg.beam_width_v
    out = []
    for q in range(cfg.q_h):
        row = []
        for p in range(cfg.q_v):
            row.append(BeamRegion(
                -PSI_BOUND_H + q * dh, -PSI_BOUND_H + (q + 1) * dh,
                -PSI_BOUND_V + p * dv, -PSI_BOUND_V + (p + 1) * dv,
            ))
        out.append(row)
    return out


def guard_band_region(region: BeamRegion, gamma: float) -> BeamRegion:
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    gh, gv = gamma * region.width_h, gamma * region.width_v
    return BeamRegion(region.psi_h_lo - gh, region.psi_h_hi + gh,
                      region.psi_v_lo - gv, region.psi_v_hi + gv)


def beam_region(cfg: CodebookConfig, q: int, p: int) -> BeamRegion:
    """Region of beam ``(q, p)`` including its guard band."""
    if not (1 <= q <= cfg.q_h and 1 <= p <= cfg.q_v):
        raise IndexError(f"beam ({q}, {p}) outside {cfg.q_h}x{cfg.q_v}")
    dh, dv = cfg.shift(q, p)
    base = BeamRegion(-PSI_BOUND_H + dh, -PSI_BOUND_H + dh + cfg.beam_width_h,
                      -PSI_BOUND_V + dv, -PSI_BOUND_V + dv + cfg.beam_width_v)
    return guard_band_region(base, cfg.gamma)


def ideal_level(m: int, cfg: CodebookConfig) -> float:
    """Flat in-region gain ``min(1, Q*Lambda / (M (1+2 gamma)^2))``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    raw = cfg.q * region_spread_factor() / (m * (1.0 + 2.0 * cfg.gamma) ** 2)
    return min(1.0, raw)


@dataclass(frozen=True)
class IdealPattern:
    region: BeamRegion
    level: float

    def __call__(self, psi_h, psi_v):
        """Ideal gain on the tensor grid ``psi_h x psi_v``."""
        inside = np.outer(self.region.contains_h(psi_h), self.region.contains_v(psi_v))
        return self.level * inside


def ideal_pattern(upa: UpaConfig, cfg: CodebookConfig, q: int, p: int) -> IdealPattern:
    return IdealPattern(beam_region(cfg, q, p), ideal_level(upa.m, cfg))


def ideal_vector(cfg: CodebookConfig, upa: UpaConfig, q: int, p: int) -> np.ndarray:
    """Ideal pattern sampled on the dictionary grid, horizontal index outer."""
    psi_h = direction_grid("h", cfg.q_h, cfg.l_h)
    psi_v = direction_grid("v", cfg.q_v, cfg.l_v)
    return ideal_pattern(upa, cfg, q, p)(psi_h, psi_v).ravel()


def rate_upper_bound(rho: float, h_norm_sq: float, m: int, cfg: CodebookConfig) -> float:
    """Rate of the flat ideal pattern, ``log2(1 + rho |h|^2 Q Lambda / M)``."""
    if rho < 0 or h_norm_sq < 0:
        raise ValueError("rho and h_norm_sq must be non-negative")
    return math.log2(1.0 + rho * h_norm_sq * cfg.q * region_spread_factor() / m)
