"""Monte Carlo beam alignment: Ricean channels, codebook sounding with one
optional re-sounding cycle, and data-rate statistics."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .array import UpaConfig, aod_to_psi, steering_vector

# spawn-key slots of the per-realization streams
_CHANNEL_STREAM = 0
_NOISE_STREAM = 1

RATE_HEADER = "snr_db,codebook,mean_rate,stderr,misalign_rate,resound_rate,feedback_bits"


@dataclass(frozen=True)
class ChannelScenario:
    k_factor_db: float = 13.5
    n_nlos: int = 3
    los_present: bool = True
    normalize_to_m: bool = True

    def __post_init__(self):
        if self.n_nlos < 0:
            raise ValueError("n_nlos must be >= 0")
        if not self.los_present and self.n_nlos == 0:
            raise ValueError("scenario without LOS needs at least one NLOS path")

    @property
    def k_linear(self) -> float:
        return 10.0 ** (self.k_factor_db / 10.0)

    @classmethod
    def los_nlos(cls) -> "ChannelScenario":
        return cls(13.5, 3, True, True)

    @classmethod
    def nlos_only(cls) -> "ChannelScenario":
        return cls(13.5, 3, False, True)

    @classmethod
    def los_only(cls) -> "ChannelScenario":
        return cls(math.inf, 0, True, True)


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray = field(repr=False)
    theta_h: np.ndarray
    theta_v: np.ndarray
    gains: np.ndarray
    los_present: bool


def sample_aods(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    theta_h = rng.uniform(-math.pi / 2, math.pi / 2, n)
    theta_v = rng.uniform(-math.pi / 4, math.pi / 4, n)
    return theta_h, theta_v


def generate_channel(scenario: ChannelScenario, upa: UpaConfig,
                     rng: np.random.Generator) -> ChannelRealization:
    """One channel vector; path 0 is the LOS path when present."""
    n_paths = scenario.n_nlos + (1 if scenario.los_present else 0)
    theta_h, theta_v = sample_aods(rng, n_paths)
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / math.sqrt(2)
    psi_h, psi_v = aod_to_psi(theta_h, theta_v)
    m = upa.m
    if not scenario.los_present:
        weights = np.full(n_paths, math.sqrt(m / scenario.n_nlos))
    elif scenario.n_nlos == 0 or math.isinf(scenario.k_linear):
        weights = np.zeros(n_paths)
        weights[0] = math.sqrt(m)
    else:
        k = scenario.k_linear
        weights = np.full(n_paths, math.sqrt(m / (scenario.n_nlos * (1 + k))))
        weights[0] = math.sqrt(m * k / (1 + k))
    dh = steering_vector(upa.m_h, psi_h)
    dv = steering_vector(upa.m_v, psi_v)
    paths = (dh[:, None, :] * dv[None, :, :]).reshape(m, n_paths)
    h = paths @ (weights * gains)
    if scenario.normalize_to_m:
        h = h * math.sqrt(m) / np.linalg.norm(h)
    return ChannelRealization(h, theta_h, theta_v, gains, scenario.los_present)


@dataclass(frozen=True)
class SoundingResult:
    best: tuple[int, int]
    second: tuple[int, int]
    ratio: float
    resound_count: int
    observations: np.ndarray = field(repr=False)


def select_beams(stats: np.ndarray) -> tuple[int, int, float]:
    """Indices of the largest and second-largest statistic and their ratio.

    Ties resolve to the lowest flat index.
    """
    stats = np.asarray(stats, dtype=float)
    best = int(np.argmax(stats))
    if stats.size == 1:
        return best, best, math.inf
    rest = stats.copy()
    rest[best] = -np.inf
    second = int(np.argmax(rest))
    ratio = stats[best] / stats[second] if stats[second] > 0 else math.inf
    return best, second, float(ratio)


def _energy(y: np.ndarray) -> np.ndarray:
    return y.real**2 + y.imag**2


def _unflatten(k: int, q_v: int) -> tuple[int, int]:
    q, p = divmod(k, q_v)
    return q + 1, p + 1


def draw_noise(rng: np.random.Generator, q: int) -> np.ndarray:
    """Unit-variance complex noise, shape ``(2, q)`` for two sounding cycles.

    Draws are beam-major so codebooks of equal size see identical noise.
    """
    z = rng.standard_normal((q, 2, 2))
    return ((z[..., 0] + 1j * z[..., 1]) / math.sqrt(2)).T


def sound_and_select(h: np.ndarray, composites: np.ndarray, q_v: int, rho: float,
                     tau_t: float = 2.0, rng: np.random.Generator | None = None,
                     noise: np.ndarray | None = None, noiseless: bool = False) -> SoundingResult:
    """Sound every beam once, re-sound when the top-two ratio is below
    ``tau_t`` and pick the beam with the largest (combined) energy.

    ``composites`` is ``(Q, M)`` with beam ``(q, p)`` at row
    ``(q-1)*q_v + p-1``.  Cycles are combined non-coherently.
    """
    composites = np.asarray(composites)
    if composites.size == 0:
        raise ValueError("codebook is empty")
    if rho <= 0 and not noiseless:
        raise ValueError("rho must be positive")
    if tau_t < 1:
        raise ValueError("tau_t must be >= 1")
    signal = composites.conj() @ h
    if noiseless:
        stats = _energy(signal)
        b, s, ratio = select_beams(stats)
        return SoundingResult(_unflatten(b, q_v), _unflatten(s, q_v), ratio, 0, signal[None])
    if noise is None:
        noise = draw_noise(rng if rng is not None else np.random.default_rng(), len(composites))
    y = math.sqrt(rho) * signal[None, :] + noise[:2, :len(composites)]
    stats = _energy(y[0])
    b, s, ratio = select_beams(stats)
    resound = 0
    if ratio < tau_t:
        resound = 1
        b, s, _ = select_beams(stats + _energy(y[1]))
    return SoundingResult(_unflatten(b, q_v), _unflatten(s, q_v), ratio, resound,
                          y[:1 + resound])


def feedback_bits(q_h: int, q_v: int) -> int:
    return int(math.ceil(math.log2(q_h * q_v))) if q_h * q_v > 1 else 0


# -- rate evaluation -------------------------------------------------------

def realization_rng(master_seed: int, index: int, stream: int) -> np.random.Generator:
    """Counter-based stream: depends only on the seed and realization index."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index, stream))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class RateRow:
    snr_db: float
    codebook: str
    mean_rate: float
    stderr: float
    misalign_rate: float
    resound_rate: float
    feedback_bits: float

    def csv(self) -> str:
        return "%r,%s,%r,%r,%r,%r,%r" % (
            float(self.snr_db), self.codebook, self.mean_rate, self.stderr,
            self.misalign_rate, self.resound_rate, self.feedback_bits)


@dataclass
class RateSamples:
    """Per-realization outcomes, arrays of shape ``(n_snr, n_realizations)``."""

    rate: np.ndarray
    misaligned: np.ndarray
    resound: np.ndarray


def _simulate_block(args):
    (upa, scenario, named, snr_db, tau_t, master_seed, start, stop) = args
    rhos = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    n = stop - start
    out = {name: (np.empty((len(rhos), n)), np.empty((len(rhos), n), dtype=bool),
                  np.empty((len(rhos), n), dtype=bool)) for name, _, _ in named}
    for j, i in enumerate(range(start, stop)):
        ch = generate_channel(scenario, upa, realization_rng(master_seed, i, _CHANNEL_STREAM))
        noise_rng = realization_rng(master_seed, i, _NOISE_STREAM)
        q_max = max(c.shape[0] for _, c, _ in named)
        noise = draw_noise(noise_rng, q_max)
        for name, comp, q_v in named:
            gains = _energy(comp.conj() @ ch.h)
            ideal = int(np.argmax(gains))
            rate, mis, res = out[name]
            for s, rho in enumerate(rhos):
                r = sound_and_select(ch.h, comp, q_v, rho, tau_t, noise=noise)
                k = (r.best[0] - 1) * q_v + (r.best[1] - 1)
                rate[s, j] = math.log2(1.0 + rho * gains[k])
                mis[s, j] = k != ideal
                res[s, j] = r.resound_count > 0
    return out


def simulate(codebooks: dict, scenario: ChannelScenario, snr_db, n_realizations: int,
             master_seed: int, tau_t: float = 2.0, workers: int = 1,
             block: int = 250) -> dict[str, RateSamples]:
    """Per-realization outcomes for several codebooks on shared channels and noise.

    ``codebooks`` maps a name to a :class:`~upa_codebook.codebook.Codebook`.
    All codebooks must use the same array.  Results depend only on
    ``master_seed`` and the realization index, never on ``workers``.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    upas = {cb.upa for cb in codebooks.values()}
    if len(upas) != 1:
        raise ValueError("codebooks use different array configurations")
    upa = upas.pop()
    named = [(name, cb.composites(), cb.q_v) for name, cb in codebooks.items()]
    snr_db = [float(s) for s in snr_db]
    tasks = [(upa, scenario, named, snr_db, tau_t, master_seed, s, min(s + block, n_realizations))
             for s in range(0, n_realizations, block)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_simulate_block, tasks))
    else:
        parts = [_simulate_block(t) for t in tasks]
    return {name: RateSamples(*(np.concatenate([p[name][k] for p in parts], axis=1)
                                for k in range(3)))
            for name, _, _ in named}


def summarize(samples: RateSamples, name: str, snr_db, q_h: int, q_v: int) -> list[RateRow]:
    n = samples.rate.shape[1]
    bits = feedback_bits(q_h, q_v)
    rows = []
    for s, snr in enumerate(snr_db):
        rate = samples.rate[s]
        stderr = float(np.std(rate, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        resound = float(np.mean(samples.resound[s]))
        rows.append(RateRow(float(snr), name, float(np.mean(rate)), stderr,
                            float(np.mean(samples.misaligned[s])), resound,
                            # one extra request bit whenever a second cycle is asked for
                            bits + resound))
    return rows


def evaluate_rate(cb, scenario: ChannelScenario, snr_db, n_realizations: int,
                  master_seed: int, tau_t: float = 2.0, workers: int = 1,
                  name: str | None = None) -> list[RateRow]:
    name = name or cb.kind
    samples = simulate({name: cb}, scenario, snr_db, n_realizations, master_seed, tau_t, workers)
    return summarize(samples[name], name, snr_db, cb.q_h, cb.q_v)


@dataclass(frozen=True)
class PairedDiff:
    snr_db: float
    mean_diff: float
    stderr: float

    @property
    def z(self) -> float:
        return self.mean_diff / self.stderr if self.stderr > 0 else math.inf


def paired_difference(a: RateSamples, b: RateSamples, snr_db) -> list[PairedDiff]:
    """Mean of ``rate_a - rate_b`` per SNR with its paired standard error."""
    out = []
    n = a.rate.shape[1]
    for s, snr in enumerate(snr_db):
        d = a.rate[s] - b.rate[s]
        out.append(PairedDiff(float(snr), float(d.mean()), float(d.std(ddof=1) / math.sqrt(n))))
    return out


def write_rate_table(rows: list[RateRow], fh) -> None:
    fh.write(RATE_HEADER + "\n")
    for row in rows:
        fh.write(row.csv() + "\n")
