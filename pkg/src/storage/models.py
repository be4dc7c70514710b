"""
Pydantic run configuration: system, baths, time grid and analysis settings.
Run files and presets are YAML; presets live in config/presets/.
"""

import copy
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator, model_validator

from .. import config
from ..models.layout import BathAttachment, Ordering, Side
from ..models.spectral import BathSpec, DensityKind, SpectralDensity
from ..models.superoperator import NormKind
from ..services.systems import InitialState, ModelPreset
from ..utils.errors import ConfigError

# =============================================================================
# ENUMS
# =============================================================================


class Engine(str, Enum):
    GAUSSIAN = "gaussian"
    ED = "ed"


# =============================================================================
# SECTIONS
# =============================================================================

class SystemConfig(BaseModel):
    model: ModelPreset = ModelPreset.FERMI_CHAIN
    L: int = Field(default=3, ge=1)
    t_c: float = 0.02
    U: float = 0.0
    initial_state: InitialState = InitialState.TOTALLY_MIXED

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _siam_has_two_modes(self):
        if self.model is ModelPreset.SIAM and self.L != 2:
            raise ValueError("the siam model has exactly two modes (L=2)")
        return self


class BathConfig(BaseModel):
    id: str
    kind: DensityKind = DensityKind.SEMI_ELLIPTICAL
    gamma: float = Field(default=0.05, ge=0)
    D: float = Field(default=1.0, gt=0)
    nu: Optional[float] = Field(default=None, gt=0)
    beta: float = Field(default=1.0, ge=0)
    mu: float = 0.0
    side: Side = Side.LEFT
    system_mode: Optional[int] = Field(default=None, ge=0)
    M: Union[int, Literal["auto"]] = "auto"
    samples: Optional[List[Tuple[float, float]]] = None

    model_config = ConfigDict(extra="forbid")

    @field_validator("beta", mode="before")
    @classmethod
    def _parse_infinity(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        return value

    @field_validator("M")
    @classmethod
    def _positive_length(cls, value):
        if value != "auto" and value < 1:
            raise ValueError("chain length must be >= 1 or 'auto'")
        return value

    @model_validator(mode="after")
    def _check_band(self):
        if abs(self.mu) > self.D:
            raise ValueError(f"|mu| must not exceed D={self.D}")
        if self.kind is DensityKind.TABULATED and not self.samples:
            raise ValueError("tabulated densities need samples")
        return self

    @field_serializer("beta")
    def _serialize_beta(self, value: float):
        return "inf" if math.isinf(value) else value

    def attached_mode(self, L: int) -> int:
        if self.system_mode is not None:
            return self.system_mode
        return 0 if self.side is Side.LEFT else L - 1

    def density(self) -> SpectralDensity:
        if self.kind is DensityKind.TABULATED:
            omega, values = zip(*self.samples)
            return SpectralDensity.tabulated(omega, values, D=self.D)
        return SpectralDensity(self.kind, self.gamma, self.D, self.nu)

    def to_spec(self, L: int) -> BathSpec:
        return BathSpec(self.density(), self.beta, self.mu, self.attached_mode(L))

    def attachment(self, L: int, M: int) -> BathAttachment:
        return BathAttachment(self.id, M, self.side, self.attached_mode(L))


class TimeConfig(BaseModel):
    tau_max: float = Field(default=60.0, ge=0)
    dtau: float = Field(default=0.1, gt=0)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _non_empty_grid(self):
        if self.tau_max < self.dtau:
            raise ValueError("tau_max must be >= dtau (empty time grid)")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.tau_max / self.dtau))

    def grid(self) -> List[float]:
        return [k * self.dtau for k in range(self.steps + 1)]


class AnalysisConfig(BaseModel):
    epsilon: float = Field(default_factory=lambda: config.MEMORY_EPSILON, gt=0)
    norm: NormKind = NormKind.TRACE
    kappa_max: float = Field(default_factory=lambda: config.KAPPA_MAX, gt=1)
    derivative_step: Optional[float] = Field(default=None, gt=0)  # defaults to dtau
    observables: bool = True
    memory_times: bool = True
    current_bond: Optional[int] = Field(default=None, ge=0)  # defaults to the last bond
    tau_m_generator: Optional[float] = Field(default=None, ge=0)
    tau_m_map: Optional[float] = Field(default=None, gt=0)
    preb_offset: float = Field(default=0.0, ge=0)
    steady_state_from: float = Field(default=20.0, ge=0)  # LB comparison window starts here
    lr_safety: float = Field(default_factory=lambda: config.LR_SAFETY, ge=1)
    quadrature_points: int = Field(default_factory=lambda: config.QUADRATURE_POINTS, ge=16)
    reconstruction_states: int = Field(default=20, ge=1)
    write_maps: bool = True

    model_config = ConfigDict(extra="forbid")


class RunConfig(BaseModel):
    """Everything a run needs; resolved() is written into the manifest"""
    preset: Optional[str] = None
    system: SystemConfig = Field(default_factory=SystemConfig)
    baths: List[BathConfig] = Field(default_factory=list)
    time: TimeConfig = Field(default_factory=TimeConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    engine: Engine = Engine.GAUSSIAN
    ordering: Ordering = Ordering.SEPARATED  # mode ordering of the exact-diagonalization basis
    output_dir: str = Field(default_factory=lambda: config.OUTPUT_DIR)
    seed: int = 0
    threads: int = Field(default_factory=lambda: config.THREADS, ge=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _check_run(self):
        ids = [b.id for b in self.baths]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate bath ids {ids}")
        sides = [b.side for b in self.baths]
        if len(set(sides)) != len(sides):
            raise ValueError("at most one bath per side")
        for b in self.baths:
            if b.attached_mode(self.system.L) >= self.system.L:
                raise ValueError(f"bath '{b.id}' attaches to mode {b.attached_mode(self.system.L)}, L={self.system.L}")
        if self.engine is Engine.GAUSSIAN and self.has_interactions:
            raise ValueError("engine=gaussian requires U=0; use engine=ed")
        if self.engine is Engine.ED:
            fixed = [b.M for b in self.baths if b.M != "auto"]
            if len(fixed) == len(self.baths):
                N = 2 * self.system.L + 2 * sum(fixed)
                if N > config.ED_MAX_MODES:
                    raise ValueError(f"engine=ed supports at most {config.ED_MAX_MODES} modes, config has {N}")
        return self

    @property
    def has_interactions(self) -> bool:
        return self.system.U != 0.0

    @property
    def derivative_step(self) -> float:
        return self.analysis.derivative_step or self.time.dtau

    @property
    def current_bond(self) -> Optional[int]:
        if self.system.L < 2:
            return None
        if self.analysis.current_bond is not None:
            return self.analysis.current_bond
        return self.system.L - 2

    def resolved(self) -> Dict[str, Any]:
        data = self.model_dump(mode="json")
        data["analysis"]["derivative_step"] = self.derivative_step
        data["analysis"]["current_bond"] = self.current_bond
        for bath, raw in zip(self.baths, data["baths"]):
            raw["system_mode"] = bath.attached_mode(self.system.L)
        return data


# =============================================================================
# LOADING
# =============================================================================

def deep_merge(base: Dict[str, Any], overlay: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; lists and scalars in overlay replace those in base"""
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"Could not parse {path}{where}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return data


def available_presets() -> List[str]:
    return sorted(p.stem for p in Path(config.PRESETS_DIR).glob("*.yaml"))


def load_preset(name: str) -> Dict[str, Any]:
    path = Path(config.PRESETS_DIR) / f"{name}.yaml"
    if not path.exists():
        raise ConfigError(f"Unknown preset '{name}' (available: {', '.join(available_presets())})")
    data = _read_yaml(path)
    data.setdefault("preset", name)
    return data


def validate_config(data: Dict[str, Any]) -> RunConfig:
    """RunConfig from a plain mapping; ConfigError lists every failing field"""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = [
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        ]
        raise ConfigError("Invalid run configuration:\n  " + "\n  ".join(problems)) from None


def load_config(
    path: Optional[str] = None,
    preset: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Preset, then file (which may name its own preset), then CLI overrides"""
    data: Dict[str, Any] = load_preset(preset) if preset else {}
    if path:
        file_data = _read_yaml(Path(path))
        base = file_data.get("preset")
        if base and base != data.get("preset"):
            data = deep_merge(data, load_preset(base))
        data = deep_merge(data, file_data)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return validate_config(data)
