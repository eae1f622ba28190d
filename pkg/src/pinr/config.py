"""Run configuration: TOML sections mapped onto the typed configs of each module."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import tomli
import tomli_w
import torch

from .encode import ConfigError
from .inr import HashGridConfig, MLPConfig
from .scenarios import DEFAULT_BASE_COEFFS, DEFAULT_PEAK, make_views, preset_views
from .train import TrainConfig


@dataclass
class PhantomSection:
    size: int = 64
    coils: int = 8
    seed: int = 0
    b0_peak_hz: float = 150.0
    peak_center: list = field(default_factory=lambda: [DEFAULT_PEAK.center_x,
                                                       DEFAULT_PEAK.center_y])
    peak_sigma: float = DEFAULT_PEAK.sigma
    b0_base_coeffs: list = field(default_factory=lambda: list(DEFAULT_BASE_COEFFS))
    max_hz: float = 500.0


@dataclass
class ViewsSection:
    preset: str = ""
    angles: list = field(default_factory=lambda: [0.0, 120.0, 240.0])
    R: int = 2
    line_offset: int = 0

    def build(self, esp_s: float | None):
        if self.preset:
            return preset_views(self.preset, esp_s)
        return make_views(self.angles, self.R, esp_s, self.line_offset)


@dataclass
class EncodeSection:
    esp_s: float = 0.0  # 0 -> 0.25 ms * R
    te_first_s: float = 0.0
    noise_snr_db: float | None = None
    seed: int = 0


@dataclass
class NetworksSection:
    levels: int = 16
    features_per_level: int = 2
    log2_table_size: int = 20
    base_resolution: int = 16
    per_level_scale: float = 1.19
    hidden_layers: int = 2
    hidden_width: int = 256
    b0_scale: float = 100.0
    dtype: str = "float32"

    def configs(self):
        grid = HashGridConfig(self.levels, self.features_per_level, self.log2_table_size,
                              self.base_resolution, self.per_level_scale)
        return ((grid, MLPConfig(2, self.hidden_layers, self.hidden_width)),
                (grid, MLPConfig(1, self.hidden_layers, self.hidden_width)))

    @property
    def torch_dtype(self):
        try:
            return {"float32": torch.float32, "float64": torch.float64}[self.dtype]
        except KeyError:
            raise ConfigError(f"networks.dtype must be float32 or float64, got {self.dtype!r}") from None


@dataclass
class TrainSection:
    iterations: int = 6000
    learning_rate: float = 3e-3
    tv_weight_init: float = 1e-5
    tv_decay_factor: float = 0.1
    tv_decay_every: int = 1000
    tv_off_after: int = 5000
    smoothl1_delta: float = 1.0
    betas: list = field(default_factory=lambda: [0.9, 0.999])
    weight_decay: float = 0.01
    seed: int = 0

    def build(self) -> TrainConfig:
        return TrainConfig(**{**dataclasses.asdict(self), "betas": tuple(self.betas)})


@dataclass
class EvalSection:
    support_threshold: float = 0.05
    error_max_fraction: float = 0.1
    roi: list = field(default_factory=list)  # [x0, y0, x1, y1] pixels, empty = none


SECTIONS = {
    "phantom": PhantomSection,
    "views": ViewsSection,
    "encode": EncodeSection,
    "networks": NetworksSection,
    "train": TrainSection,
    "eval": EvalSection,
}


@dataclass
class RunConfig:
    phantom: PhantomSection = field(default_factory=PhantomSection)
    views: ViewsSection = field(default_factory=ViewsSection)
    encode: EncodeSection = field(default_factory=EncodeSection)
    networks: NetworksSection = field(default_factory=NetworksSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        sections = {}
        for name, value in raw.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown config section [{name}]")
            if not isinstance(value, dict):
                raise ConfigError(f"[{name}] must be a table")
            known = {f.name: f for f in dataclasses.fields(SECTIONS[name])}
            for key in value:
                if key not in known:
                    raise ConfigError(f"unknown config key {name}.{key}")
            sections[name] = SECTIONS[name](**value)
        return cls(**sections)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            section = dataclasses.asdict(getattr(self, name))
            out[name] = {k: v for k, v in section.items() if v is not None}
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> RunConfig:
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> RunConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def esp(self) -> float | None:
        return self.encode.esp_s or None

    def build_views(self):
        views = self.views.build(self.esp())
        if self.encode.te_first_s:
            views = [dataclasses.replace(v, te_first=self.encode.te_first_s) for v in views]
        return views
