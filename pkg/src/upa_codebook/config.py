"""Run configuration files in INI syntax.

Example::

    [upa]
    m_h = 12
    m_v = 6
    n_rf = 4
    b_phase = 6

    [codebook]
    kind = proposed
    q_h = 8
    q_v = 8
    gamma = 0.0

    [run]
    sweep = strided(729)
    seed = 1

Errors carry ``file:line:`` prefixes so they can be located directly.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields

from .array import UpaConfig
from .codebook import Sweep
from .ideal import CodebookConfig
from .sim import ChannelScenario

KINDS = ("proposed", "allones", "kp_dft")
SCENARIOS = {"los_nlos": ChannelScenario.los_nlos, "nlos_only": ChannelScenario.nlos_only,
             "los_only": ChannelScenario.los_only}


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and field."""


@dataclass(frozen=True)
class SimulationConfig:
    snr_db: tuple[float, ...] = tuple(range(-10, 30, 5))
    n_realizations: int = 10_000
    tau_t: float = 2.0

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.tau_t < 1:
            raise ValueError("tau_t must be >= 1")
        if not self.snr_db:
            raise ValueError("snr_db must list at least one value")


@dataclass(frozen=True)
class RunConfig:
    upa: UpaConfig
    codebook: CodebookConfig
    kind: str = "proposed"
    quantize: bool = True
    requantize_shift: bool = False
    scenario: ChannelScenario = field(default_factory=ChannelScenario)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    sweep: Sweep = field(default_factory=Sweep.full)
    seed: int = 0
    workers: int = 1
    output_dir: str = "."


# required keys per section; everything else has a default
_REQUIRED = {"upa": ("m_h", "m_v"), "codebook": ("q_h", "q_v")}
_KNOWN = {
    "upa": {f.name for f in fields(UpaConfig)},
    "codebook": {f.name for f in fields(CodebookConfig)} | {"kind", "quantize", "requantize_shift"},
    "scenario": {"preset", "k_factor_db", "n_nlos", "los_present", "normalize_to_m"},
    "simulation": {"snr_db", "n_realizations", "tau_t"},
    "run": {"sweep", "seed", "workers", "output_dir"},
}


class _Lines:
    """Line numbers of section headers and keys in the raw text."""

    def __init__(self, text: str):
        self.sections: dict[str, int] = {}
        self.keys: dict[tuple[str, str], int] = {}
        section = None
        for n, line in enumerate(text.splitlines(), start=1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                self.sections.setdefault(section, n)
                continue
            m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
            if m and section is not None:
                self.keys.setdefault((section, m.group(1).strip().lower()), n)

    def of(self, section: str, key: str | None = None) -> int:
        if key is not None and (section, key) in self.keys:
            return self.keys[(section, key)]
        return self.sections.get(section, 1)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    """Comma-separated values or ``start:step:stop`` (inclusive)."""
    text = text.strip()
    if text.count(":") == 2:
        start, step, stop = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


_CONVERT = {
    "m_h": int, "m_v": int, "n_rf": int, "b_phase": int, "spacing_over_lambda": float,
    "q_h": int, "q_v": int, "gamma": float, "l_h": int, "l_v": int, "i_phases": int,
    "mse_grid_per_beam": int, "kind": str, "quantize": _bool, "requantize_shift": _bool,
    "preset": str, "k_factor_db": float, "n_nlos": int, "los_present": _bool,
    "normalize_to_m": _bool, "snr_db": _floats, "n_realizations": int, "tau_t": float,
    "sweep": Sweep.parse, "seed": int, "workers": int, "output_dir": str,
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    lines = _Lines(text)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}: cannot parse {line.strip()}") from exc
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        where = f"{source}:{lineno}" if lineno else source
        raise ConfigError(f"{where}: {exc.message.splitlines()[0]}") from exc

    def fail(section, key, msg):
        raise ConfigError(f"{source}:{lines.of(section, key)}: [{section}] {msg}")

    values: dict[str, dict] = {s: {} for s in _KNOWN}
    for section in parser.sections():
        if section not in _KNOWN:
            fail(section, None, "unknown section")
        for key, raw in parser.items(section):
            if key not in _KNOWN[section]:
                fail(section, key, f"unknown field '{key}'")
            try:
                values[section][key] = _CONVERT[key](raw)
            except ValueError as exc:
                fail(section, key, f"invalid value for '{key}': {exc}")
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values[section]:
                fail(section, None, f"missing required field '{key}'")

    def build(section, factory, data):
        try:
            return factory(**data)
        except (TypeError, ValueError) as exc:
            fail(section, None, str(exc))

    upa = build("upa", UpaConfig, values["upa"])
    cb_vals = dict(values["codebook"])
    kind = cb_vals.pop("kind", "proposed")
    if kind not in KINDS:
        fail("codebook", "kind", f"kind must be one of {', '.join(KINDS)}")
    quantize = cb_vals.pop("quantize", True)
    requantize = cb_vals.pop("requantize_shift", False)
    codebook = build("codebook", CodebookConfig, cb_vals)

    sc_vals = dict(values["scenario"])
    preset = sc_vals.pop("preset", "los_nlos")
    if preset not in SCENARIOS:
        fail("scenario", "preset", f"preset must be one of {', '.join(SCENARIOS)}")
    base = SCENARIOS[preset]()
    scenario = build("scenario", ChannelScenario,
                     {f.name: sc_vals.get(f.name, getattr(base, f.name))
                      for f in fields(ChannelScenario)})
    simulation = build("simulation", SimulationConfig, values["simulation"])
    run = values["run"]
    if run.get("workers", 1) < 1:
        fail("run", "workers", "workers must be >= 1")
    if not 0 <= run.get("seed", 0) < 2**64:
        fail("run", "seed", "seed must be a 64-bit unsigned integer")
    return RunConfig(upa, codebook, kind, quantize, requantize, scenario, simulation,
                     run.get("sweep", Sweep.full()), run.get("seed", 0),
                     run.get("workers", 1), run.get("output_dir", "."))


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, source=str(path))
