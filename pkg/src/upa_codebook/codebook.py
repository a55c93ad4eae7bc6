"""Codebook construction: candidate sweep, MSE selection, expansion by phase
shifting, and the two reference codebooks."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from .array import (
    PSI_BOUND_H,
    PSI_BOUND_V,
    TWO_PI,
    Beamformer,
    DirectionDictionary,
    UpaConfig,
    aod_to_psi,
    build_dictionary,
    check_unit_norm,
    pattern_on_axes,
    quantize_phases,
    steering_vector,
)
from .ideal import CodebookConfig, beam_region, ideal_level
from .omp import (
    EqualGainVector,
    candidate_count,
    candidate_phase_indices,
    omp_batch,
)

logger = logging.getLogger(__name__)

CHUNK = 2048
BATCH = 128
CHECKPOINT_EVERY = 100_000


# -- sweep specification ---------------------------------------------------

@dataclass(frozen=True)
class Sweep:
    """Which enumeration indices to evaluate: all, every ``stride``-th, or a list."""

    mode: str = "full"
    stride: int = 1
    indices: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in ("full", "strided", "explicit"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @classmethod
    def full(cls) -> "Sweep":
        return cls("full")

    @classmethod
    def strided(cls, k: int) -> "Sweep":
        return cls("strided", stride=int(k))

    @classmethod
    def explicit(cls, indices: Iterable[int]) -> "Sweep":
        return cls("explicit", indices=tuple(int(i) for i in indices))

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        """``full``, ``strided(729)`` or ``explicit(0,5,9)``."""
        text = text.strip()
        if text == "full":
            return cls.full()
        for mode in ("strided", "explicit"):
            if text.startswith(mode + "(") and text.endswith(")"):
                inner = text[len(mode) + 1:-1]
                if mode == "strided":
                    return cls.strided(int(inner))
                return cls.explicit(int(x) for x in inner.split(",") if x.strip())
        raise ValueError(f"cannot parse sweep {text!r}")

    def __str__(self) -> str:
        if self.mode == "full":
            return "full"
        if self.mode == "strided":
            return f"strided({self.stride})"
        return "explicit(" + ",".join(map(str, self.indices)) + ")"

    def resolve(self, total: int) -> np.ndarray:
        if self.mode == "full":
            idx = np.arange(total, dtype=np.int64)
        elif self.mode == "strided":
            idx = np.arange(0, total, self.stride, dtype=np.int64)
        else:
            idx = np.asarray(sorted(set(self.indices)), dtype=np.int64)
            if idx.size and (idx[0] < 0 or idx[-1] >= total):
                raise ValueError(f"explicit indices must lie in 0..{total - 1}")
        if idx.size == 0:
            raise ValueError("sweep selects no candidates")
        return idx


# -- evaluation grids ------------------------------------------------------

@dataclass(frozen=True)
class MseGrid:
    """Tensor grid of directions on which patterns are compared."""

    upa: UpaConfig
    config: CodebookConfig
    psi_h: np.ndarray = field(repr=False)
    psi_v: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.psi_h.size, self.psi_v.size

    @property
    def count(self) -> int:
        return self.psi_h.size * self.psi_v.size

    def ideal_values(self, q: int, p: int) -> np.ndarray:
        region = beam_region(self.config, q, p)
        inside = np.outer(region.contains_h(self.psi_h), region.contains_v(self.psi_v))
        return ideal_level(self.upa.m, self.config) * inside


def _axis_points(bound: float, q_count: int, per_beam: int, gamma: float) -> np.ndarray:
    width = 2.0 * bound / q_count
    step = width / per_beam
    # extend into the guard band only while the axis stays within one period
    room = int(math.floor((TWO_PI - 2.0 * bound) / (2.0 * step) + 1e-9))
    ext = min(int(math.ceil(gamma * per_beam - 1e-9)), room)
    k = np.arange(-ext, q_count * per_beam + ext)
    return -bound + step * (k + 0.5)


def mse_grid(upa: UpaConfig, cfg: CodebookConfig) -> MseGrid:
    """Selection grid: ``mse_grid_per_beam`` directions per beam width over the
    sector, widened into the guard band on axes that do not span a period."""
    n = cfg.mse_grid_per_beam
    return MseGrid(upa, cfg,
                   _axis_points(PSI_BOUND_H, cfg.q_h, n, cfg.gamma),
                   _axis_points(PSI_BOUND_V, cfg.q_v, n, cfg.gamma))


def full_period_grid(upa: UpaConfig, cfg: CodebookConfig, q: int = 1, p: int = 1,
                     resolution: int = 256) -> MseGrid:
    """Uniform midpoint grid over one full period per axis, anchored at the
    lower corner of beam ``(q, p)``'s region.

    Anchoring makes the grids of different beams translates of each other, so
    shift-invariance of the MSE holds exactly rather than up to sampling error.
    """
    region = beam_region(cfg, q, p)
    offs = TWO_PI * (np.arange(resolution) + 0.5) / resolution
    return MseGrid(upa, cfg, region.psi_h_lo + offs, region.psi_v_lo + offs)


def beam_pattern_vector(c: np.ndarray, grid, upa: UpaConfig | None = None) -> np.ndarray:
    """Reference gain of ``c`` over a grid, flattened with the horizontal index outer.

    ``grid`` is an :class:`MseGrid` or a pair of dictionaries ``(D_h, D_v)``.
    """
    c = np.asarray(c, dtype=complex)
    check_unit_norm(c)
    if isinstance(grid, MseGrid):
        return pattern_on_axes(c, grid.upa, grid.psi_h, grid.psi_v).ravel()
    d_h, d_v = grid
    if not isinstance(d_h, DirectionDictionary):
        raise TypeError("grid must be an MseGrid or a pair of DirectionDictionary")
    amp = d_h.columns.conj().T @ c.reshape(d_h.m_a, d_v.m_a) @ d_v.columns.conj()
    return (np.abs(amp) ** 2).ravel()


def mse_to_ideal(c: np.ndarray, q: int, p: int, grid: MseGrid) -> float:
    """Mean squared gap between the pattern of ``c`` and beam ``(q, p)``'s ideal."""
    gain = beam_pattern_vector(c, grid)
    return float(np.mean((grid.ideal_values(q, p).ravel() - gain) ** 2))


# -- phase shifting --------------------------------------------------------

def shift_vector(upa: UpaConfig, dpsi_h: float, dpsi_v: float) -> np.ndarray:
    """Unit-modulus vector ``sqrt(M) d_M(dpsi_h, dpsi_v)``."""
    return np.kron(np.exp(1j * dpsi_h * np.arange(upa.m_h)),
                   np.exp(1j * dpsi_v * np.arange(upa.m_v)))


def phase_shift(F: np.ndarray, dpsi_h: float, dpsi_v: float, upa: UpaConfig) -> np.ndarray:
    """Multiply every analog column entrywise by ``shift_vector``; this moves
    the beam pattern by ``(dpsi_h, dpsi_v)``."""
    F = np.asarray(F, dtype=complex)
    return F * shift_vector(upa, dpsi_h, dpsi_v)[:, None]


# -- codebook --------------------------------------------------------------

@dataclass(frozen=True)
class Codebook:
    upa: UpaConfig
    config: CodebookConfig
    kind: str
    entries: tuple[tuple[Beamformer, ...], ...] = field(repr=False)
    selected: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    quantize: bool = True
    requantize_shift: bool = False
    seed: int = 0
    sweep: str = "full"
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def q_h(self) -> int:
        return len(self.entries)

    @property
    def q_v(self) -> int:
        return len(self.entries[0])

    @property
    def size(self) -> int:
        return self.q_h * self.q_v

    def entry(self, q: int, p: int) -> Beamformer:
        return self.entries[q - 1][p - 1]

    def composites(self) -> np.ndarray:
        """``(Q, M)`` array, row ``(q-1)*Q_v + (p-1)`` holds beam ``(q, p)``."""
        return np.array([bf.composite for row in self.entries for bf in row])


def expand_codebook(upa: UpaConfig, cfg: CodebookConfig, base: Beamformer,
                    requantize_shift: bool = False) -> tuple[tuple[Beamformer, ...], ...]:
    rows = []
    for q in range(1, cfg.q_h + 1):
        row = []
        for p in range(1, cfg.q_v + 1):
            F = phase_shift(base.analog, *cfg.shift(q, p), upa)
            v = base.baseband
            if requantize_shift:
                F = quantize_phases(F, upa.b_phase)
                v = v / np.linalg.norm(F @ v)
            row.append(Beamformer(F, v, quantized=base.quantized,
                                  regularized=base.regularized))
        rows.append(tuple(row))
    return tuple(rows)


@lru_cache(maxsize=8)
def _sweep_context(upa: UpaConfig, cfg: CodebookConfig):
    d_h = build_dictionary("h", upa.m_h, cfg.q_h, cfg.l_h)
    d_v = build_dictionary("v", upa.m_v, cfg.q_v, cfg.l_v)
    grid = mse_grid(upa, cfg)
    return d_h.block(1), d_v.block(1), grid, grid.ideal_values(1, 1)


def _candidate_weights(upa, cfg, indices, d_h1, d_v1):
    ph, pv = candidate_phase_indices(indices, cfg.l_h, cfg.l_v, cfg.i_phases)
    g_h = np.exp(1j * TWO_PI * ph / cfg.i_phases)
    g_v = np.exp(1j * TWO_PI * pv / cfg.i_phases)
    a = g_h @ d_h1.T
    b = g_v @ d_v1.T
    w = (a[:, :, None] * b[:, None, :]).reshape(len(indices), upa.m)
    return w


def evaluate_candidates(upa: UpaConfig, cfg: CodebookConfig, indices: np.ndarray,
                        quantize: bool = True) -> np.ndarray:
    """MSE of beam ``(1, 1)`` for each enumeration index, on the selection grid."""
    d_h1, d_v1, grid, ideal = _sweep_context(upa, cfg)
    out = np.empty(len(indices))
    for start in range(0, len(indices), BATCH):
        idx = np.asarray(indices[start:start + BATCH])
        w = _candidate_weights(upa, cfg, idx, d_h1, d_v1)
        targets = w / np.linalg.norm(w, axis=1, keepdims=True)
        F, v, _ = omp_batch(targets, w, upa.n_rf, upa.b_phase, quantize)
        c = (F @ v[..., None])[..., 0]
        gain = pattern_on_axes(c, upa, grid.psi_h, grid.psi_v)
        out[start:start + len(idx)] = np.mean((ideal - gain) ** 2, axis=(1, 2))
    return out


def _chunk_best(args):
    upa, cfg, quantize, indices = args
    mse = evaluate_candidates(upa, cfg, indices, quantize)
    k = int(np.argmin(mse))
    return float(mse[k]), int(indices[k]), len(indices)


def build_candidate(upa: UpaConfig, cfg: CodebookConfig, index: int,
                    quantize: bool = True) -> tuple[Beamformer, EqualGainVector, EqualGainVector]:
    """Beamformer for beam ``(1, 1)`` from a single enumeration index."""
    d_h1, d_v1, _, _ = _sweep_context(upa, cfg)
    ph, pv = candidate_phase_indices([index], cfg.l_h, cfg.l_v, cfg.i_phases)
    g_h = EqualGainVector(tuple(ph[0]), cfg.i_phases)
    g_v = EqualGainVector(tuple(pv[0]), cfg.i_phases)
    w = _candidate_weights(upa, cfg, np.array([index]), d_h1, d_v1)
    F, v, reg = omp_batch(w / np.linalg.norm(w), w, upa.n_rf, upa.b_phase, quantize)
    return Beamformer(F[0], v[0], quantized=quantize, regularized=bool(reg[0])), g_h, g_v


def _checkpoint_key(upa, cfg, sweep, quantize) -> str:
    return json.dumps([upa.__dict__, cfg.__dict__, str(sweep), quantize], sort_keys=True)


def run_sweep(upa: UpaConfig, cfg: CodebookConfig, sweep: Sweep, quantize: bool = True,
              workers: int = 1, checkpoint: str | os.PathLike | None = None,
              progress=None) -> tuple[float, int, int]:
    """Evaluate the sweep and return ``(best_mse, best_index, evaluated)``.

    Candidates are processed in fixed chunks so the result does not depend on
    ``workers``; the reduction keeps the smallest ``(mse, index)``.
    """
    indices = sweep.resolve(candidate_count(cfg.l_h, cfg.l_v, cfg.i_phases))
    chunks = [indices[s:s + CHUNK] for s in range(0, len(indices), CHUNK)]
    best = (math.inf, -1)
    evaluated = 0
    done = 0
    key = _checkpoint_key(upa, cfg, sweep, quantize)
    if checkpoint and os.path.exists(checkpoint):
        with open(checkpoint) as fh:
            state = json.load(fh)
        if state.get("key") == key:
            done = state["chunks_done"]
            best = (state["best_mse"], state["best_index"])
            evaluated = state["evaluated"]
            logger.info("resuming sweep at chunk %d/%d", done, len(chunks))
    todo = ((upa, cfg, quantize, ch) for ch in chunks[done:])
    last_saved = evaluated

    def save():
        tmp = f"{checkpoint}.tmp"
        with open(tmp, "w") as fh:
            json.dump({"key": key, "chunks_done": done, "best_mse": best[0],
                       "best_index": best[1], "evaluated": evaluated}, fh)
        os.replace(tmp, checkpoint)

    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        results = executor.map(_chunk_best, todo) if executor else map(_chunk_best, todo)
        for mse, idx, n in results:
            if (mse, idx) < best:
                best = (mse, idx)
            evaluated += n
            done += 1
            if progress is not None:
                progress(evaluated, len(indices))
            if checkpoint and evaluated - last_saved >= CHECKPOINT_EVERY:
                save()
                last_saved = evaluated
    finally:
        if executor:
            executor.shutdown()
    if checkpoint:
        save()
    return best[0], best[1], evaluated


def design_codebook(upa: UpaConfig, cfg: CodebookConfig, sweep: Sweep | None = None,
                    seed: int = 0, workers: int = 1, quantize: bool = True,
                    requantize_shift: bool = False, kind: str = "proposed",
                    checkpoint: str | os.PathLike | None = None,
                    gain_grid_res: int = 200) -> Codebook:
    """Select the MSE-best beam ``(1, 1)`` over the sweep and expand it to all
    ``Q_h x Q_v`` beams by phase shifting."""
    cfg.validate(upa)
    sweep = sweep or Sweep.full()
    t0 = time.perf_counter()
    best_mse, best_index, evaluated = run_sweep(upa, cfg, sweep, quantize, workers, checkpoint)
    base, g_h, g_v = build_candidate(upa, cfg, best_index, quantize)
    entries = expand_codebook(upa, cfg, base, requantize_shift)
    stats = {
        "candidates_evaluated": evaluated,
        "best_index": best_index,
        "best_mse": best_mse,
        "regularized": base.regularized,
        "wall_time_s": time.perf_counter() - t0,
    }
    cb = Codebook(upa, cfg, kind, entries, (g_h.phase_indices, g_v.phase_indices),
                  quantize, requantize_shift, seed, str(sweep), stats)
    if requantize_shift:
        exact = expand_codebook(upa, cfg, base, False)
        stats["requantize_mse_delta"] = _mean_full_period_mse(upa, cfg, entries) - \
            _mean_full_period_mse(upa, cfg, exact)
    stats.update(gain_summary(cb, gain_grid_res))
    return cb


def _mean_full_period_mse(upa, cfg, entries, resolution=128):
    vals = [mse_to_ideal(entries[q - 1][p - 1].composite, q, p,
                         full_period_grid(upa, cfg, q, p, resolution))
            for q in range(1, cfg.q_h + 1) for p in range(1, cfg.q_v + 1)]
    return float(np.mean(vals))


def baseline_allones(upa: UpaConfig, q_h: int, q_v: int, workers: int = 1) -> Codebook:
    """Single all-ones candidate with ``ceil(256 / Q_a)`` directions per axis."""
    cfg = CodebookConfig(q_h, q_v, l_h=math.ceil(256 / q_h), l_v=math.ceil(256 / q_v),
                         i_phases=1)
    return design_codebook(upa, cfg, Sweep.full(), workers=workers, kind="allones")


def baseline_kp_dft(upa: UpaConfig, q_h: int, q_v: int) -> Codebook:
    """Kronecker product of per-axis DFT beams at ``2*pi*b/Q_a``, ``b = 1..Q_a``."""
    # DFT beams need no Q < M headroom; Q_a = M_a gives an orthonormal basis
    cfg = CodebookConfig(q_h, q_v, l_h=1, l_v=1, i_phases=1)
    rows = []
    for q in range(1, q_h + 1):
        row = []
        for p in range(1, q_v + 1):
            c = np.kron(steering_vector(upa.m_h, TWO_PI * q / q_h),
                        steering_vector(upa.m_v, TWO_PI * p / q_v))
            row.append(Beamformer(c[:, None], np.ones(1), quantized=False))
        rows.append(tuple(row))
    cb = Codebook(upa, cfg, "kp_dft", tuple(rows), None, False, False, 0, "none", {})
    cb.stats.update(gain_summary(cb))
    return cb


# -- pattern reports -------------------------------------------------------

def best_gains(composites: np.ndarray, upa: UpaConfig, psi_h: np.ndarray,
               psi_v: np.ndarray, chunk: int = 8192) -> tuple[np.ndarray, np.ndarray]:
    """Best beam index and its gain for each direction ``(psi_h[i], psi_v[i])``."""
    psi_h = np.ravel(psi_h)
    psi_v = np.ravel(psi_v)
    best = np.empty(psi_h.size, dtype=np.int64)
    gain = np.empty(psi_h.size)
    ch = composites.conj().T
    for s in range(0, psi_h.size, chunk):
        dh = steering_vector(upa.m_h, psi_h[s:s + chunk]).T
        dv = steering_vector(upa.m_v, psi_v[s:s + chunk]).T
        d = (dh[:, :, None] * dv[:, None, :]).reshape(-1, upa.m)
        g = np.abs(d @ ch) ** 2
        best[s:s + chunk] = np.argmax(g, axis=1)
        gain[s:s + chunk] = g[np.arange(g.shape[0]), best[s:s + chunk]]
    return best, gain


@dataclass(frozen=True)
class PatternReport:
    theta_h: np.ndarray = field(repr=False)
    theta_v: np.ndarray = field(repr=False)
    psi_h: np.ndarray = field(repr=False)
    psi_v: np.ndarray = field(repr=False)
    best_q: np.ndarray = field(repr=False)
    best_p: np.ndarray = field(repr=False)
    gain: np.ndarray = field(repr=False)

    HEADER = "theta_h,theta_v,psi_h,psi_v,best_q,best_p,gain"

    @property
    def mean_gain(self) -> float:
        return float(np.mean(self.gain))

    @property
    def min_gain(self) -> float:
        return float(np.min(self.gain))

    def to_csv(self, fh) -> None:
        fh.write(self.HEADER + "\n")
        for row in zip(self.theta_h, self.theta_v, self.psi_h, self.psi_v,
                       self.best_q, self.best_p, self.gain):
            fh.write("%r,%r,%r,%r,%d,%d,%r\n" % tuple(
                float(x) if i not in (4, 5) else int(x) for i, x in enumerate(row)))


def pattern_report(cb: Codebook, grid_res: int = 200) -> PatternReport:
    """Best-beam gain over a midpoint grid of physical departure angles."""
    th = -math.pi / 2 + math.pi * (np.arange(grid_res) + 0.5) / grid_res
    tv = -math.pi / 4 + (math.pi / 2) * (np.arange(grid_res) + 0.5) / grid_res
    TH, TV = np.meshgrid(th, tv, indexing="ij")
    ph, pv = aod_to_psi(TH, TV)
    best, gain = best_gains(cb.composites(), cb.upa, ph, pv)
    bq, bp = np.divmod(best, cb.q_v)
    return PatternReport(TH.ravel(), TV.ravel(), ph.ravel(), pv.ravel(), bq + 1, bp + 1, gain)


def sector_gains(cb: Codebook, per_beam: int = 20) -> np.ndarray:
    """Best-beam gain on a uniform spatial-frequency grid over the sector,
    ``per_beam`` points per beam width and axis."""
    ph = _axis_points(PSI_BOUND_H, cb.q_h, per_beam, 0.0)
    pv = _axis_points(PSI_BOUND_V, cb.q_v, per_beam, 0.0)
    gains = pattern_on_axes(cb.composites(), cb.upa, ph, pv)
    return gains.max(axis=0)


def gain_summary(cb: Codebook, grid_res: int = 200) -> dict:
    sector = sector_gains(cb)
    physical = pattern_report(cb, grid_res)
    return {
        "mean_gain": float(sector.mean()),
        "min_gain": float(sector.min()),
        "mean_gain_physical": physical.mean_gain,
        "min_gain_physical": physical.min_gain,
    }
