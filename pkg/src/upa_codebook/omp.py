"""Hybrid beamformer candidates by orthogonal matching pursuit.

For a pair of equal-gain vectors ``(g_h, g_v)`` the target direction is
``w = D_h1 g_h kron D_v1 g_v``.  Each OMP step appends an equal-gain analog
column that follows the phase of the current residual and then refits the
baseband vector by maximising ``|w^H F u|^2 / |F u|^2``.  Because the weight
matrix ``Gamma_h kron Gamma_v`` equals ``w w^H`` the maximiser is the
least-squares direction ``(F^H F)^{-1} F^H w``; no eigensolver is needed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .array import TWO_PI, Beamformer, ContractError, UpaConfig, phase_of, quantize_phases

ZERO_RESIDUAL = 1e-12
RIDGE = 1e-10
ILL_CONDITIONED = 1e-12


class DegenerateTarget(ContractError):
    """The target direction is orthogonal to the span of the analog columns."""


@dataclass(frozen=True)
class EqualGainVector:
    """Unit-modulus vector with entry phases ``2*pi*k/I``; entry 0 is fixed to 1."""

    phase_indices: tuple[int, ...]
    i_phases: int

    def __post_init__(self):
        idx = tuple(int(k) for k in self.phase_indices)
        if not idx or idx[0] != 0:
            raise ValueError("first phase index must be 0")
        if any(not 0 <= k < self.i_phases for k in idx):
            raise ValueError(f"phase indices must lie in 0..{self.i_phases - 1}")
        object.__setattr__(self, "phase_indices", idx)

    @classmethod
    def ones(cls, length: int) -> "EqualGainVector":
        return cls((0,) * length, 1)

    @property
    def values(self) -> np.ndarray:
        return np.exp(1j * TWO_PI * np.asarray(self.phase_indices) / self.i_phases)

    def __len__(self) -> int:
        return len(self.phase_indices)


@dataclass(frozen=True)
class OmpState:
    target: np.ndarray = field(repr=False)
    analog_so_far: np.ndarray = field(repr=False)
    baseband: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    iteration: int


def candidate_weight(g_h: EqualGainVector, g_v: EqualGainVector,
                     d_h1: np.ndarray, d_v1: np.ndarray) -> np.ndarray:
    return np.kron(d_h1 @ g_h.values, d_v1 @ g_v.values)


def target_beamformer(g_h: EqualGainVector, g_v: EqualGainVector,
                      d_h1: np.ndarray, d_v1: np.ndarray) -> np.ndarray:
    if d_h1.shape[1] != len(g_h) or d_v1.shape[1] != len(g_v):
        raise ContractError("dictionary blocks must have one column per equal-gain entry")
    w = candidate_weight(g_h, g_v, d_h1, d_v1)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise DegenerateTarget("equal-gain combination has zero norm")
    return w / norm


def _rayleigh_batch(F: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Baseband vectors for a stack ``F: (B, M, n)``, ``w: (B, M)``.

    Returns ``(v, regularized)`` with ``|F v| = 1`` and ``w^H F v`` real
    non-negative.
    """
    FH = np.conj(np.swapaxes(F, 1, 2))
    gram = FH @ F
    rhs = (FH @ w[..., None])[..., 0]
    n = F.shape[2]
    regularized = np.zeros(F.shape[0], dtype=bool)
    if n > 1:
        eig = np.linalg.eigvalsh(gram)
        regularized = eig[:, 0] <= ILL_CONDITIONED * eig[:, -1]
        if regularized.any():
            trace = np.trace(gram[regularized], axis1=1, axis2=2).real
            gram = gram.copy()
            gram[regularized] += (RIDGE * trace)[:, None, None] * np.eye(n)
    u = np.linalg.solve(gram, rhs[..., None])[..., 0]
    fu = (F @ u[..., None])[..., 0]
    norms = np.linalg.norm(fu, axis=1)
    if np.any(norms == 0):
        raise DegenerateTarget("target is orthogonal to the analog columns")
    return u / norms[:, None], regularized


def rayleigh_baseband(F: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, bool]:
    """Maximiser of ``|w^H F v|^2`` subject to ``|F v| = 1``.

    Returns ``(v, regularized)``; the flag is set when ``F^H F`` was nearly
    singular and a ridge term had to be added.
    """
    F = np.asarray(F, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if F.ndim == 1:
        F = F[:, None]
    v, reg = _rayleigh_batch(F[None], w[None])
    return v[0], bool(reg[0])


def power_iteration_baseband(F: np.ndarray, gamma: np.ndarray, iters: int = 500,
                             tol: float = 1e-14, seed: int = 0) -> np.ndarray:
    """Principal eigenvector of ``(F^H F)^{-1} F^H Gamma F`` by power iteration,
    scaled to ``|F v| = 1``.  Slow; kept as an independent check."""
    F = np.asarray(F, dtype=complex)
    A = np.linalg.solve(F.conj().T @ F, F.conj().T @ gamma @ F)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    for _ in range(iters):
        y = A @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        y /= ny
        done = abs(abs(np.vdot(x, y)) - 1.0) < tol
        x = y
        if done:
            break
    return x / np.linalg.norm(F @ x)


def omp_batch(targets: np.ndarray, weights: np.ndarray, n_rf: int, b_phase: int,
              quantize: bool = True, keep_history: bool = False):
    """Run the OMP construction for a stack of candidates.

    ``targets`` and ``weights`` have shape ``(B, M)``; ``targets`` are unit
    norm and proportional to ``weights``.  Returns ``(F, v, regularized)`` and,
    when ``keep_history`` is set, a list of per-iteration ``(F_n, v_n, r_n)``.
    """
    targets = np.asarray(targets, dtype=complex)
    weights = np.asarray(weights, dtype=complex)
    batch, m = targets.shape
    F = np.empty((batch, m, n_rf), dtype=complex)
    r = targets.copy()
    regularized = np.zeros(batch, dtype=bool)
    history = []
    scale = 1.0 / math.sqrt(m)
    for n in range(n_rf):
        mag = np.abs(r)
        phases = phase_of(r)
        # entries that are zero up to rounding have no meaningful phase; use 0 so
        # the result does not depend on batch layout
        phases[mag <= ZERO_RESIDUAL * mag.max(axis=1, keepdims=True)] = 0.0
        # a vanished residual contributes an all-zero phase column
        phases[np.linalg.norm(r, axis=1) < ZERO_RESIDUAL] = 0.0
        col = scale * np.exp(1j * phases)
        if quantize:
            col = quantize_phases(col, b_phase)
        F[:, :, n] = col
        Fn = F[:, :, :n + 1]
        v, reg = _rayleigh_batch(Fn, weights)
        regularized |= reg
        r = targets - (Fn @ v[..., None])[..., 0]
        if keep_history:
            history.append((Fn.copy(), v.copy(), r.copy()))
    if keep_history:
        return F, v, regularized, history
    return F, v, regularized


def omp_design(target: np.ndarray, upa: UpaConfig, d_h1: np.ndarray, d_v1: np.ndarray,
               g_h: EqualGainVector, g_v: EqualGainVector,
               quantize: bool = True) -> Beamformer:
    F, v, reg = omp_batch(np.asarray(target)[None], candidate_weight(g_h, g_v, d_h1, d_v1)[None],
                          upa.n_rf, upa.b_phase, quantize)
    return Beamformer(F[0], v[0], quantized=quantize, regularized=bool(reg[0]))


def omp_trace(target: np.ndarray, upa: UpaConfig, d_h1: np.ndarray, d_v1: np.ndarray,
              g_h: EqualGainVector, g_v: EqualGainVector,
              quantize: bool = True) -> list[OmpState]:
    """Every intermediate state of :func:`omp_design`."""
    target = np.asarray(target, dtype=complex)
    *_, history = omp_batch(target[None], candidate_weight(g_h, g_v, d_h1, d_v1)[None],
                            upa.n_rf, upa.b_phase, quantize, keep_history=True)
    return [OmpState(target, Fn[0], v[0], r[0], n + 1) for n, (Fn, v, r) in enumerate(history)]


# -- candidate enumeration -------------------------------------------------

def candidate_count(l_h: int, l_v: int, i_phases: int) -> int:
    return i_phases ** (l_h - 1) * i_phases ** (l_v - 1)


def candidate_phase_indices(indices, l_h: int, l_v: int, i_phases: int) -> tuple[np.ndarray, np.ndarray]:
    """Phase-index matrices ``(B, l_h)`` and ``(B, l_v)`` for enumeration indices.

    Index ``k`` splits as ``k = a * I^(l_v-1) + b``; ``a`` and ``b`` are written
    in base ``I`` (most significant digit first) after the fixed leading zero.
    """
    idx = np.asarray(indices, dtype=np.int64)
    n_v = i_phases ** (l_v - 1)
    a, b = np.divmod(idx, n_v)

    def digits(x, length):
        out = np.zeros((x.size, length), dtype=np.int64)
        powers = i_phases ** np.arange(length - 2, -1, -1, dtype=np.int64)
        if length > 1:
            out[:, 1:] = (x[:, None] // powers) % i_phases
        return out

    return digits(a, l_h), digits(b, l_v)


def enumerate_candidates(l_h: int, l_v: int, i_phases: int,
                         indices: Sequence[int] | None = None
                         ) -> Iterator[tuple[EqualGainVector, EqualGainVector]]:
    """Equal-gain pairs in lexicographic order of phase indices.

    With ``indices`` only those enumeration positions are produced, which is
    how strided or explicit sub-sweeps are expressed.
    """
    if indices is None:
        heads = itertools.product(range(i_phases), repeat=l_h - 1)
        for gh in heads:
            for gv in itertools.product(range(i_phases), repeat=l_v - 1):
                yield (EqualGainVector((0,) + gh, i_phases), EqualGainVector((0,) + gv, i_phases))
        return
    ph, pv = candidate_phase_indices(indices, l_h, l_v, i_phases)
    for rh, rv in zip(ph, pv):
        yield EqualGainVector(tuple(rh), i_phases), EqualGainVector(tuple(rv), i_phases)
