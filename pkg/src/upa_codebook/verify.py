"""Self-checks of the numerical identities the design relies on.

Each check reports a measured residual and the tolerance it is held to; a
check passes when ``residual < tolerance * scale``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .array import TWO_PI, UpaConfig, build_dictionary, pattern_integral, pattern_on_axes, phase_of
from .codebook import build_candidate, expand_codebook, full_period_grid, mse_to_ideal, phase_shift
from .ideal import CodebookConfig
from .omp import power_iteration_baseband, rayleigh_baseband


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float | None
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def random_unit(rng: np.random.Generator, m: int) -> np.ndarray:
    c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return c / np.linalg.norm(c)


def parseval_residual(upa: UpaConfig, rng: np.random.Generator, trials: int = 20,
                      resolution: int = 256) -> float:
    """Worst relative gap between integrated pattern energy and ``(2 pi)^2 / M``."""
    target = TWO_PI**2 / upa.m
    return max(abs(pattern_integral(random_unit(rng, upa.m), upa, resolution) - target) / target
               for _ in range(trials))


def shift_residual(upa: UpaConfig, rng: np.random.Generator, trials: int = 50) -> float:
    """Worst gap between the pattern of a phase-shifted beamformer and the
    translated pattern of the original."""
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, upa.n_rf + 1))
        F = np.exp(1j * rng.uniform(0, TWO_PI, (upa.m, n))) / math.sqrt(upa.m)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.linalg.norm(F @ v)
        dh, dv = rng.uniform(-math.pi, math.pi, 2)
        ph = rng.uniform(-math.pi, math.pi, 16)
        pv = rng.uniform(-math.pi, math.pi, 16)
        shifted = pattern_on_axes(phase_shift(F, dh, dv, upa) @ v, upa, ph, pv)
        moved = pattern_on_axes(F @ v, upa, ph - dh, pv - dv)
        worst = max(worst, float(np.max(np.abs(shifted - moved))))
    return worst


def expansion_residual(upa: UpaConfig, cfg: CodebookConfig, index: int = 0,
                       resolution: int = 128) -> float:
    """Worst gap between any expanded entry's full-period MSE and entry (1, 1)'s."""
    base, _, _ = build_candidate(upa, cfg, index, quantize=True)
    entries = expand_codebook(upa, cfg, base, requantize_shift=False)
    ref = mse_to_ideal(entries[0][0].composite, 1, 1, full_period_grid(upa, cfg, 1, 1, resolution))
    return max(abs(mse_to_ideal(entries[q - 1][p - 1].composite, q, p,
                                full_period_grid(upa, cfg, q, p, resolution)) - ref)
               for q in range(1, cfg.q_h + 1) for p in range(1, cfg.q_v + 1))


def rayleigh_residual(rng: np.random.Generator, trials: int = 200, max_m: int = 64,
                      max_n: int = 4) -> float:
    """Worst ``1 - |cos|`` between the closed-form baseband and a power-iteration
    eigenvector of the same pencil."""
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(max_n, max_m + 1))
        n = int(rng.integers(1, max_n + 1))
        F = np.exp(1j * rng.uniform(0, TWO_PI, (m, n))) / math.sqrt(m)
        w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        v, _ = rayleigh_baseband(F, w)
        ref = power_iteration_baseband(F, np.outer(w, w.conj()))
        a, b = F @ v, F @ ref
        cos = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
        worst = max(worst, 1.0 - cos)
    return worst


def quantization_residual(upa: UpaConfig, cfg: CodebookConfig, index: int = 0) -> float:
    """Distance of analog entries from the ``1/sqrt(M)``-modulus ``2^B``-level set."""
    base, _, _ = build_candidate(upa, cfg, index, quantize=True)
    mag = base.analog_magnitude_error()
    step = TWO_PI / 2**upa.b_phase
    x = phase_of(base.analog) / step
    off = float(np.max(np.abs(x - np.round(x)))) * step
    return max(mag, off)


def run_checks(upa: UpaConfig, cfg: CodebookConfig, seed: int = 0,
               scale: float = 1.0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    d_h = build_dictionary("h", upa.m_h, cfg.q_h, cfg.l_h)
    d_v = build_dictionary("v", upa.m_v, cfg.q_v, cfg.l_v)
    checks = [
        ("pattern_energy", parseval_residual(upa, rng), 5e-3, "relative to (2 pi)^2 / M"),
        ("shift_translates_pattern", shift_residual(upa, rng), 1e-10, "absolute gain"),
        ("expansion_preserves_mse", expansion_residual(upa, cfg), 1e-9, "full-period grid"),
        ("baseband_matches_eigenvector", rayleigh_residual(rng), 1e-8, "1 - |cos|"),
        ("analog_quantized_equal_gain", quantization_residual(upa, cfg), 1e-9, "modulus and phase"),
        ("horizontal_dictionary_tight", d_h.gram_deviation(), 1e-9,
         "spectral norm of D_h D_h^H - (L Q_h / M_h) I"),
    ]
    out = [CheckResult(name, bool(res < tol * scale), float(res), tol * scale, detail)
           for name, res, tol, detail in checks]
    # the vertical grid does not span a full period, so this is reported only
    dev = d_v.gram_deviation()
    out.append(CheckResult("vertical_dictionary_deviation", True, dev, None,
                           "informational: spectral norm of D_v D_v^H - (L Q_v / M_v) I"))
    return out
