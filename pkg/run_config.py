"""
Run configuration files (*.cfg)

Sectioned key = value files in TOML syntax, parsed with tomllib and
validated with pydantic. Every problem is reported as
`file:line: section.key: message` before any computation starts.
"""
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import config
from control import PulseTrain, aligned_grid
from errors import ConfigError
from models import Family, ModelSpec
from noise import CorrelationSpec

SWEEP_AXES = ("gamma", "tau_over_delta", "psi", "N")

# An amplitude is a real number or a [re, im] pair
Amplitude = Union[float, Tuple[float, float]]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(Section):
    family: Family = Family.TWO_LEVEL
    omega: float = 0.2
    kappa: Optional[float] = Field(None, gt=0)
    N: int = Field(1, ge=1)
    energy_split: Literal["symmetric", "ground"] = "symmetric"


class CorrelationSection(Section):
    Gamma: float = Field(1.0, ge=0)
    gamma: float = Field(1.0, gt=0)


class PulseSection(Section):
    enabled: bool = False
    tau: float = Field(1.0, gt=0)
    delta: float = Field(1.0, gt=0)
    psi: float = 0.0

    @model_validator(mode="after")
    def width_fits_period(self):
        if self.enabled and self.delta > self.tau:
            raise ValueError(f"delta ({self.delta}) must not exceed tau ({self.tau})")
        return self


class RunSection(Section):
    t_end: float = Field(10.0, gt=0)
    dt: float = Field(config.DEFAULT_DT, gt=0)
    n_traj: int = Field(1000, ge=2)
    master_seed: int = Field(1, ge=0)
    initial_state: Optional[List[Amplitude]] = None
    sample_every: Optional[int] = Field(None, ge=1)
    checkpoints: List[float] = Field(default_factory=list)
    frame: Literal["rotating", "lab"] = "rotating"

    @field_validator("checkpoints")
    @classmethod
    def checkpoints_non_negative(cls, value):
        if any(t < 0 for t in value):
            raise ValueError("checkpoint times must be >= 0")
        return value


class AnalyticSection(Section):
    enabled: bool = True
    coarsen: Optional[int] = Field(None, ge=1)
    weak_coupling: bool = False


class PQSection(Section):
    enabled: bool = False
    p_basis: Optional[List[Amplitude]] = None


class OutputSection(Section):
    directory: Optional[str] = None
    label: str = "run"

    @field_validator("label")
    @classmethod
    def label_is_filename(cls, value):
        if not re.fullmatch(r"[A-Za-z0-9_.\-]+", value):
            raise ValueError("label may only contain letters, digits, '_', '-' and '.'")
        return value


class SweepSection(Section):
    """Each key lists the values of one axis; several keys sweep their product"""

    gamma: Optional[List[float]] = None
    tau_over_delta: Optional[List[float]] = None
    psi: Optional[List[float]] = None
    N: Optional[List[int]] = None

    def axes(self):
        return {name: list(getattr(self, name)) for name in SWEEP_AXES if getattr(self, name) is not None}


def _amplitudes(values):
    if values is None:
        return None
    return np.array([complex(v[0], v[1]) if isinstance(v, tuple) else complex(v) for v in values])


class RunConfig(Section):
    model: ModelSection = Field(default_factory=ModelSection)
    correlation: CorrelationSection = Field(default_factory=CorrelationSection)
    pulse: PulseSection = Field(default_factory=PulseSection)
    run: RunSection = Field(default_factory=RunSection)
    analytic: AnalyticSection = Field(default_factory=AnalyticSection)
    pq: PQSection = Field(default_factory=PQSection)
    output: OutputSection = Field(default_factory=OutputSection)
    sweep: SweepSection = Field(default_factory=SweepSection)

    @model_validator(mode="after")
    def amplitudes_match_dimension(self):
        d = self.model_spec().dimension
        for section, key, values in (("run", "initial_state", self.run.initial_state),
                                     ("pq", "p_basis", self.pq.p_basis)):
            if values is None:
                continue
            amplitudes = _amplitudes(values)
            if amplitudes.size != d:
                raise ValueError(f"{section}.{key}: needs {d} amplitudes for this model, got {amplitudes.size}")
            if np.linalg.norm(amplitudes) == 0:
                raise ValueError(f"{section}.{key}: the zero vector is not a state")
        return self

    def model_spec(self):
        kappa = self.model.kappa
        if kappa is None:
            kappa = float(np.sqrt(2.0)) if self.model.family is Family.QUTRIT else 1.0
        return ModelSpec(self.model.family, self.model.omega, kappa=kappa, N=self.model.N,
                         energy_split=self.model.energy_split)

    def correlation_spec(self):
        return CorrelationSpec(self.correlation.Gamma, self.correlation.gamma)

    def pulse_train(self):
        p = self.pulse
        return PulseTrain(p.tau, p.delta, p.psi, p.enabled)

    def grid(self):
        return aligned_grid(self.pulse_train(), self.run.t_end, self.run.dt)

    def initial_state(self):
        """Normalised initial amplitudes, or None for the family's equal superposition"""
        psi0 = _amplitudes(self.run.initial_state)
        return None if psi0 is None else psi0 / np.linalg.norm(psi0)

    def p_basis(self):
        p = _amplitudes(self.pq.p_basis)
        return None if p is None else p / np.linalg.norm(p)

    def output_directory(self):
        return self.output.directory or config.OUTPUT_DIRECTORY

    def with_value(self, axis, value):
        """Copy with one sweep axis set to `value`"""
        if axis == "gamma":
            return self.model_copy(update={"correlation": self.correlation.model_copy(update={"gamma": float(value)})})
        if axis == "psi":
            return self.model_copy(update={"pulse": self.pulse.model_copy(update={"psi": float(value)})})
        if axis == "tau_over_delta":
            tau = float(value) * self.pulse.delta
            return self.model_copy(update={"pulse": self.pulse.model_copy(update={"tau": tau})})
        if axis == "N":
            return self.model_copy(update={"model": self.model.model_copy(update={"N": int(value)})})
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")


def _line_index(text):
    """{(section, key): line} and {section: line} for a TOML text"""
    keys, sections = {}, {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = re.match(r"\s*\[([A-Za-z_][A-Za-z0-9_]*)\]", line)
        if header:
            section = header.group(1)
            sections.setdefault(section, number)
            continue
        key = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=", line)
        if key:
            keys.setdefault((section, key.group(1)), number)
    return keys, sections


def _messages(error: ValidationError, text, source):
    keys, sections = _line_index(text)
    messages = []
    for item in error.errors():
        loc = [str(part) for part in item["loc"]]
        section = loc[0] if loc else ""
        key = loc[1] if len(loc) > 1 else ""
        line = keys.get((section, key), sections.get(section, 1))
        where = f"{section}.{key}" if key else (section or "config")
        message = item["msg"].removeprefix("Value error, ")
        messages.append(f"{source}:{line}: {where}: {message}")
    return messages


def parse_config(text, source="<string>"):
    """Validate a configuration text, raising ConfigError with line-precise messages"""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = re.search(r"line (\d+)", str(e))
        line = match.group(1) if match else 1
        raise ConfigError(f"{source}:{line}: syntax: {e}") from e
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_messages(e, text, source)) from e


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"{path}:0: cannot read configuration: {e.strerror}") from e
    return parse_config(text, str(path))


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Family):
        return f'"{value.value}"'
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return str(value)


def to_toml(cfg: RunConfig):
    """Complete configuration as TOML text (unset optional keys are omitted)"""
    lines = []
    for name in RunConfig.model_fields:
        section = getattr(cfg, name)
        entries = [(key, value) for key, value in section.model_dump().items() if value is not None]
        if not entries:
            continue
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {_toml_value(value)}" for key, value in entries)
        lines.append("")
    return "\n".join(lines)
