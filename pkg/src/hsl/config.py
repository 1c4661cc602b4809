"""INI-style experiment configuration with strict key checking.

Every field has a default, so an empty file is a valid configuration.
Unknown sections or keys are errors reported with their line number.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


@dataclass(frozen=True)
class ProblemConfig:
    spectrum: str = "polynomial"  # polynomial | exponential | flat
    spectrum_param: float = 2.0
    D: int = 8
    diffusion: str = "prior"  # prior (C = C_mu) | identity | polynomial:<alpha>
    observed: tuple[int, ...] = (1, 2, 3)
    sigma_B: tuple[float, ...] = ()  # empty: sigma_j^2 = mu_j on observed modes
    y: tuple[float, ...] = (0.8, -0.3, 0.25)  # one value per observed mode
    T: float = 2.0
    prior: str = "gaussian"  # gaussian | mixture | sinusoidal (oracle-compare only)


@dataclass(frozen=True)
class SdeConfig:
    steps: int = 1000
    t_floor: float = 1e-3
    n_paths: int = 100_000
    convergence_T: tuple[float, ...] = (2.0, 4.0, 6.0, 8.0, 10.0)
    times: tuple[float, ...] = (0.05, 0.5, 2.0)
    noiseless_times: tuple[float, ...] = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    mc_samples: int = 200_000
    psi_samples: int = 20_000
    check_prop3: bool = True


@dataclass(frozen=True)
class DsmConfig:
    n_samples: int = 1_000_000
    bins: int = 8
    t_floor: float = 1e-3


@dataclass(frozen=True)
class TrainSection:
    lift_width: int = 64
    n_spectral_layers: int = 5
    n_modes_kept: int = 5
    proj_width: int = 64
    steps: int = 5000
    batch: int = 128
    lr_start: float = 1e-3
    lr_end: float = 5e-4
    lr_power: float = 1.0 / 3.0
    variance_start: float = 1e-4
    variance_end: float = 2e-2
    schedule_steps: int = 500
    min_points: int = 15
    max_points: int = 50
    grid_sizes: tuple[int, ...] = (20, 25, 30, 35, 40)
    locations: tuple[float, ...] = (-1.0, 0.0, 0.5)
    n_samples: int = 2000
    extrapolation_size: int = 60  # 0 disables the beyond-training-range grid
    checkpoint: str = "checkpoint.npz"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "hsl_out"


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    sde: SdeConfig = field(default_factory=SdeConfig)
    dsm: DsmConfig = field(default_factory=DsmConfig)
    train: TrainSection = field(default_factory=TrainSection)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 2024

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the effective configuration (defaults applied)."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_ini(self) -> str:
        lines = ["[run]", f"seed = {self.seed}", ""]
        for sec in ("problem", "sde", "dsm", "train", "output"):
            lines.append(f"[{sec}]")
            for f in fields(getattr(self, sec)):
                v = getattr(getattr(self, sec), f.name)
                if isinstance(v, tuple):
                    v = ", ".join(repr(x) for x in v)
                elif isinstance(v, float):
                    v = repr(v)
                lines.append(f"{f.name} = {v}")
            lines.append("")
        return "\n".join(lines)


_SECTIONS = {
    "problem": ProblemConfig,
    "sde": SdeConfig,
    "dsm": DsmConfig,
    "train": TrainSection,
    "output": OutputConfig,
}


def _convert(kind, text: str):
    if kind is bool or kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind in (int, "int"):
        return int(float(text)) if "e" in text.lower() else int(text)
    if kind in (float, "float"):
        return float(text)
    if kind in (str, "str"):
        return text.strip()
    if kind in ("tuple[int, ...]",):
        return _ints(text)
    if kind in ("tuple[float, ...]",):
        return _floats(text)
    raise TypeError(f"unsupported field type {kind}")


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out[(section, "")] = n
        elif "=" in line and section is not None:
            out[(section, line.split("=", 1)[0].strip().lower())] = n
    return out


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"{source}: {err}") from err
    lines = _line_numbers(text)
    kw = {}
    for sec in cp.sections():
        if sec == "run":
            for key, val in cp.items(sec):
                if key != "seed":
                    raise ConfigError(f"{source}:{lines.get((sec, key), '?')}: unknown key '{key}' in [run]")
                kw["seed"] = int(val)
            continue
        if sec not in _SECTIONS:
            raise ConfigError(f"{source}:{lines.get((sec, ''), '?')}: unknown section [{sec}]")
        cls = _SECTIONS[sec]
        known = {f.name.lower(): f for f in fields(cls)}
        vals = {}
        for key, val in cp.items(sec):
            if key not in known:
                raise ConfigError(f"{source}:{lines.get((sec, key), '?')}: unknown key '{key}' in [{sec}]")
            f = known[key]
            try:
                vals[f.name] = _convert(f.type, val)
            except (ValueError, TypeError) as err:
                raise ConfigError(f"{source}:{lines.get((sec, key), '?')}: bad value for '{key}': {err}") from err
        kw[sec] = cls(**vals)
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), source=str(p))
