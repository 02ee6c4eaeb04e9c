"""Model parameters, unit conversions and validation.

All internal arithmetic is done in linear units (mW, unitless SINR); dB
values only appear in the stored parameter set and at the I/O boundary.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a parameter set fails validation."""


class DistanceLaw(str, enum.Enum):
    UNIFORM_RADIUS = "uniform_radius"
    UNIFORM_AREA = "uniform_area"


class LosResample(str, enum.Enum):
    """Granularity at which a K-repetition attempt redraws its random access.

    ``PER_TTI`` redraws LOS state, subcarrier and preamble for every
    repetition. ``PER_ATTEMPT`` draws them once at the first repetition and
    keeps them for the whole attempt (fading is redrawn every repetition in
    both cases). Reactive HARQ transmits once per attempt, so both policies
    coincide there.
    """

    PER_ATTEMPT = "per_attempt"
    PER_TTI = "per_tti"


class CollisionPool(str, enum.Enum):
    """Which resource count sets the no-collision probability (1 - 1/N)^n."""

    PREAMBLES = "preambles"
    SUBCARRIERS = "subcarriers"


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """Validated physical and protocol parameters of one cell.

    Defaults reproduce the evaluation setup: R = 0.5 km, beta = 1/km,
    48 subcarriers at 60 kHz, 64 preambles, gamma = -2 dB, rho = -130 dBm,
    alpha = 4, 0.125 ms mini-slots and unit processing times.
    """

    lambda_u: float = 1000.0  # users / km^2
    n_subcarriers: int = 48
    n_preambles: int = 64
    cell_radius_km: float = 0.5
    blockage_beta: float = 1.0  # 1 / km
    pathloss_alpha: float = 4.0
    rho_dbm: float = -130.0
    gamma_db: float = -2.0
    noise_psd_dbm_hz: float = -174.0
    subcarrier_bw_hz: float = 60e3
    n_antennas: int = 256
    tti_ms: float = 0.125
    t_a: int = 1
    t_tx: int = 1
    t_dp: int = 1
    t_f: int = 1
    t_up: int = 1
    distance_law: DistanceLaw = DistanceLaw.UNIFORM_RADIUS
    los_resample: LosResample = LosResample.PER_TTI
    collision_pool: CollisionPool = CollisionPool.PREAMBLES

    def __post_init__(self) -> None:
        for name in ("n_subcarriers", "n_preambles", "n_antennas", "t_a", "t_tx", "t_dp", "t_f", "t_up"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        for name in ("cell_radius_km", "blockage_beta", "subcarrier_bw_hz", "tti_ms", "pathloss_alpha"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.lambda_u) and self.lambda_u >= 0):
            raise ConfigError(f"lambda_u must be >= 0, got {self.lambda_u!r}")
        for name in ("rho_dbm", "gamma_db", "noise_psd_dbm_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        for name, kind in (
            ("distance_law", DistanceLaw),
            ("los_resample", LosResample),
            ("collision_pool", CollisionPool),
        ):
            object.__setattr__(self, name, _coerce_enum(kind, getattr(self, name), name))

    @property
    def rho_mw(self) -> float:
        return db_to_linear(self.rho_dbm)

    @property
    def gamma(self) -> float:
        return db_to_linear(self.gamma_db)

    @property
    def noise_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.subcarrier_bw_hz)

    @property
    def noise_mw(self) -> float:
        """Noise power sigma^2 on one subcarrier, in mW."""
        return db_to_linear(self.noise_dbm)

    @property
    def collision_resources(self) -> int:
        if self.collision_pool is CollisionPool.SUBCARRIERS:
            return self.n_subcarriers
        return self.n_preambles

    def replace(self, **changes: Any) -> SystemConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.value if isinstance(value, enum.Enum) else value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


@dataclass(frozen=True)
class HarqScheme:
    """Reactive HARQ (``k_rep is None``) or K-repetition HARQ with ``k_rep`` copies."""

    k_rep: int | None = None

    def __post_init__(self) -> None:
        if self.k_rep is not None and (isinstance(self.k_rep, bool) or not isinstance(self.k_rep, int) or self.k_rep < 1):
            raise ConfigError(f"k_rep must be an integer >= 1, got {self.k_rep!r}")

    @classmethod
    def reactive(cls) -> HarqScheme:
        return cls(None)

    @classmethod
    def krep(cls, k_rep: int) -> HarqScheme:
        return cls(k_rep)

    @classmethod
    def parse(cls, text: str) -> HarqScheme:
        """Parse ``reactive`` or ``krep:N``."""
        text = text.strip().lower()
        if text == "reactive":
            return cls.reactive()
        if text.startswith("krep:"):
            try:
                return cls.krep(int(text[5:]))
            except ValueError:
                pass
        raise ConfigError(f"unknown HARQ scheme {text!r}; expected 'reactive' or 'krep:N'")

    @property
    def is_reactive(self) -> bool:
        return self.k_rep is None

    @property
    def repetitions(self) -> int:
        """Transmissions per attempt."""
        return 1 if self.k_rep is None else self.k_rep

    @property
    def label(self) -> str:
        return "reactive" if self.k_rep is None else f"krep{self.k_rep}"

    def __str__(self) -> str:
        return "reactive" if self.k_rep is None else f"krep:{self.k_rep}"


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_INT_FIELDS = {"n_subcarriers", "n_preambles", "n_antennas", "t_a", "t_tx", "t_dp", "t_f", "t_up"}


def _coerce_enum(kind: type[enum.Enum], value: Any, name: str) -> enum.Enum:
    if isinstance(value, kind):
        return value
    try:
        return kind(str(value).lower())
    except ValueError:
        allowed = ", ".join(m.value for m in kind)
        raise ConfigError(f"unknown {name} {value!r}; expected one of: {allowed}") from None


def validate(raw: Mapping[str, Any]) -> SystemConfig:
    """Build a SystemConfig from a raw mapping (parsed JSON or CLI flags).

    Missing keys take their defaults; unknown keys are rejected.
    """
    unknown = set(raw) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _INT_FIELDS:
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            elif isinstance(value, str):
                try:
                    value = int(value)
                except ValueError:
                    raise ConfigError(f"{key} must be an integer, got {value!r}") from None
        elif key in ("distance_law", "los_resample", "collision_pool"):
            pass
        else:
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be a number, got {value!r}") from None
        kwargs[key] = value
    return SystemConfig(**kwargs)


def load(path: str | Path) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return validate(raw)


def active_intensity(cfg: SystemConfig) -> float:
    """Density of users contending on one subcarrier at t = 0, per km^2."""
    return cfg.lambda_u / cfg.n_subcarriers
