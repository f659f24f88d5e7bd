"""Run configuration files: flat ``key = value`` text with dotted prefixes.

Example::

    # production phase-diagram run
    grid.nu = 15
    grid.nv = 15
    model.L = 32
    dmrg.chi_max = 50
    input_kind = es
    cache_dir = cache
    output_dir = out

Unknown keys are hard errors; a silently ignored typo in a physics run
wastes hours. ``seed`` applies to both the solver and the detector
unless ``dmrg.seed`` or ``train.seed`` overrides it. Optional values
accept ``none``.

The solver defaults here are the survey preset: energy tolerance 1e-6
and 20 Lanczos iterations per bond. The detector inputs are insensitive
to the last digits of convergence, and the looser stop roughly halves
the grid runtime compared to the library defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .ae import TrainConfig
from .dmrg import DmrgConfig
from .errors import ConfigError
from .model import ModelParams
from .pipeline.inputs import INPUT_KINDS
from .pipeline.sweep import SweepGrid


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline invocation needs."""

    grid: SweepGrid
    train: TrainConfig = field(default_factory=TrainConfig)
    input_kind: str = "es"
    cache_dir: str = "cache"
    output_dir: str = "out"
    seed: int = 0


def _to_int(s: str) -> int:
    return int(s)


def _to_float(s: str) -> float:
    return float(s)


def _to_opt_float(s: str):
    return None if s.lower() == "none" else float(s)


def _to_opt_int(s: str):
    return None if s.lower() == "none" else int(s)


def _to_kind(s: str) -> str:
    kind = s.lower()
    if kind not in INPUT_KINDS:
        raise ValueError(f"must be one of {INPUT_KINDS}")
    return kind


_SCHEMA = {
    "model.t": ("model", "t", _to_float),
    "model.U": ("model", "U", _to_float),
    "model.V": ("model", "V", _to_float),
    "model.L": ("model", "L", _to_int),
    "model.n_max": ("model", "n_max", _to_int),
    "dmrg.chi_max": ("dmrg", "chi_max", _to_int),
    "dmrg.max_sweeps": ("dmrg", "max_sweeps", _to_int),
    "dmrg.energy_tol": ("dmrg", "energy_tol", _to_opt_float),
    "dmrg.sv_min": ("dmrg", "sv_min", _to_float),
    "dmrg.lanczos_iters": ("dmrg", "lanczos_iters", _to_int),
    "dmrg.lanczos_tol": ("dmrg", "lanczos_tol", _to_float),
    "dmrg.mixer_strength": ("dmrg", "mixer_strength", _to_float),
    "dmrg.mixer_decay": ("dmrg", "mixer_decay", _to_float),
    "dmrg.mixer_sweeps": ("dmrg", "mixer_sweeps", _to_int),
    "dmrg.seed": ("dmrg", "seed", _to_int),
    "grid.u_min": ("grid", "u_min", _to_float),
    "grid.u_max": ("grid", "u_max", _to_float),
    "grid.v_min": ("grid", "v_min", _to_float),
    "grid.v_max": ("grid", "v_max", _to_float),
    "grid.nu": ("grid", "nu", _to_int),
    "grid.nv": ("grid", "nv", _to_int),
    "grid.n_particles": ("grid", "n_particles", _to_opt_int),
    "train.epochs": ("train", "epochs", _to_int),
    "train.batch_size": ("train", "batch_size", _to_int),
    "train.learning_rate": ("train", "learning_rate", _to_float),
    "train.seed": ("train", "seed", _to_int),
    "input_kind": ("top", "input_kind", _to_kind),
    "cache_dir": ("top", "cache_dir", str),
    "output_dir": ("top", "output_dir", str),
    "seed": ("top", "seed", _to_int),
}

SURVEY_DMRG = DmrgConfig(chi_max=50, energy_tol=1e-6, lanczos_iters=20)

_GRID_DEFAULTS = {
    "u_min": 0.0,
    "u_max": 5.0,
    "v_min": 0.0,
    "v_max": 5.0,
    "nu": 15,
    "nv": 15,
    "n_particles": None,
}


def parse_config_text(text: str, origin: str = "<config>") -> RunConfig:
    """Build a RunConfig from config text; any anomaly raises ConfigError."""
    sections: dict[str, dict] = {"model": {}, "dmrg": {}, "grid": {}, "train": {}, "top": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        section, name, conv = _SCHEMA[key]
        if name in sections[section]:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        try:
            sections[section][name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key!r}: {exc}") from exc

    top = sections["top"]
    seed = top.get("seed", 0)
    dmrg_kw = dict(sections["dmrg"])
    dmrg_kw.setdefault("seed", seed)
    train_kw = dict(sections["train"])
    train_kw.setdefault("seed", seed)
    grid_kw = dict(_GRID_DEFAULTS)
    grid_kw.update(sections["grid"])
    try:
        model = ModelParams(**sections["model"])
        dmrg = replace(SURVEY_DMRG, **dmrg_kw)
        train = TrainConfig(**train_kw)
        grid = SweepGrid(model=model, dmrg=dmrg, **grid_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: invalid configuration: {exc}") from exc
    return RunConfig(
        grid=grid,
        train=train,
        input_kind=top.get("input_kind", "es"),
        cache_dir=top.get("cache_dir", "cache"),
        output_dir=top.get("output_dir", "out"),
        seed=seed,
    )


def parse_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, origin=str(path))
