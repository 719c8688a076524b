"""Model configuration with desk-scale presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import ConfigError


@dataclass
class EncoderConfig:
    high_res: int = 128
    low_res: int = 64
    d_model: int = 128
    conv_stages: int = 3
    patch_size: int = 8
    heads: int = 4
    low_blocks: int = 2  # transformer depth of the low-res branch

    def __post_init__(self):
        if self.low_res % self.patch_size != 0:
            raise ConfigError(f"patch_size {self.patch_size} must divide low_res {self.low_res}")
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} must be divisible by heads {self.heads}")
        if self.high_res % (2**self.conv_stages) != 0:
            raise ConfigError(f"high_res {self.high_res} not divisible by 2^{self.conv_stages}")

    @property
    def high_grid(self) -> int:
        return self.high_res // (2**self.conv_stages)

    @property
    def low_grid(self) -> int:
        return self.low_res // self.patch_size


@dataclass
class LmConfig:
    layers: int = 4
    heads: int = 4
    d_model: int = 128
    context: int = 512

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} must be divisible by heads {self.heads}")


@dataclass
class SegConfig:
    d_seg: int = 64      # 256 restores the full-scale width
    pixel_grid: int = 32
    heads: int = 4
    decoder_blocks: int = 2
    upsample_channels: int = 16

    def __post_init__(self):
        if self.d_seg % self.heads != 0:
            raise ConfigError(f"d_seg {self.d_seg} must be divisible by heads {self.heads}")


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    seg: SegConfig = field(default_factory=SegConfig)

    def __post_init__(self):
        if self.encoder.high_res % self.seg.pixel_grid != 0:
            raise ConfigError("pixel_grid must divide high_res")
        stride = self.encoder.high_res // self.seg.pixel_grid
        if stride & (stride - 1):
            raise ConfigError(f"high_res/pixel_grid must be a power of two, got {stride}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(
            encoder=EncoderConfig(**data.get("encoder", {})),
            lm=LmConfig(**data.get("lm", {})),
            seg=SegConfig(**data.get("seg", {})),
        )

    @classmethod
    def preset(cls, name: str) -> "ModelConfig":
        if name == "default":
            return cls()
        if name == "tiny":
            return cls(
                encoder=EncoderConfig(high_res=64, low_res=32, d_model=64, conv_stages=3, patch_size=8, heads=4),
                lm=LmConfig(layers=2, heads=4, d_model=64, context=384),
                seg=SegConfig(d_seg=32, pixel_grid=32, heads=4),
            )
        raise ConfigError(f"unknown model preset {name!r}")
