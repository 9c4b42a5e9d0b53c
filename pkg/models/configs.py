"""Pydantic models for experiment configuration (model, loss, training, data, evaluation)."""
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

ShapeKind = Literal["disk", "ring", "rectangle", "curve"]


class ModelConfig(BaseModel):
    """Every architectural hyperparameter of the segmentation network."""

    in_channels: int = Field(default=3, ge=1, description="Image channels")
    num_classes: int = Field(default=4, ge=2, description="Classes including background")
    image_size: int = Field(default=64, gt=0, description="Square input extent")
    stem_width: int = Field(default=8, ge=1, description="Channels after the 7x7 stem")
    widths: list[int] = Field(default=[8, 16, 32, 64], min_length=4, max_length=4)
    depths: list[int] = Field(default=[2, 2, 2, 2], min_length=4, max_length=4)
    window_size: int = Field(default=4, ge=1, description="Attention window M")
    heads: Optional[list[int]] = Field(default=None, description="Heads per stage; widths/16 when omitted")
    dilation: int = Field(default=2, ge=1, description="Dilation of the DuChResBlock d-branch")
    spe_reduction: int = Field(default=4, ge=1)
    mlp_ratio: int = Field(default=4, ge=1)
    irmlp_ratio: int = Field(default=4, ge=1)
    qkv_bias: bool = True
    relative_position_bias: bool = True
    pga_groups: int = Field(default=4, ge=1)
    pga_merge: Literal["concat", "add"] = "concat"
    bn_momentum: float = Field(default=0.1, gt=0, lt=1)
    bn_eps: float = Field(default=1e-5, gt=0)
    ln_eps: float = Field(default=1e-5, gt=0)

    use_local: bool = True
    use_global: bool = True
    use_lgff: bool = True
    use_pmi: bool = True
    use_pga: bool = True

    @field_validator("widths")
    @classmethod
    def validate_widths(cls, v: list[int]) -> list[int]:
        if any(w < 1 for w in v):
            raise ValueError("widths must be positive")
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("widths must be non-decreasing")
        return v

    @field_validator("depths")
    @classmethod
    def validate_depths(cls, v: list[int]) -> list[int]:
        if any(d < 2 or d % 2 for d in v):
            raise ValueError("every stage depth must be a positive even number (blocks come in W-MSA/SW-MSA pairs)")
        return v

    @field_validator("image_size")
    @classmethod
    def validate_image_size(cls, v: int) -> int:
        if v % 32:
            raise ValueError("image_size must be divisible by 32")
        return v

    @model_validator(mode="after")
    def validate_consistency(self) -> "ModelConfig":
        if not (self.use_local or self.use_global):
            raise ValueError("at least one encoder branch must be enabled")
        if self.use_lgff and not (self.use_local and self.use_global):
            raise ValueError("use_lgff needs both the local and the global branch")
        if self.heads is not None and len(self.heads) != 4:
            raise ValueError("heads needs one entry per stage")
        if any(h < 1 or w % h for h, w in zip(self.stage_heads, self.widths)):
            raise ValueError(f"heads {self.stage_heads} must divide the stage widths {self.widths}")
        if self.use_lgff and any(w % self.spe_reduction for w in self.widths):
            raise ValueError("spe_reduction must divide every stage width")
        if self.use_pga and any(w % 4 for w in self.widths):
            raise ValueError("PGA needs stage widths divisible by 4")
        return self

    @property
    def stage_heads(self) -> list[int]:
        if self.heads is not None:
            return list(self.heads)
        return [max(1, w // 16) for w in self.widths]

    def stage_resolution(self, stage: int) -> int:
        """Feature extent of stage 0..3 (1/4 down to 1/32 of the input)."""
        return self.image_size // 2 ** (stage + 2)

    @classmethod
    def desk(cls, **overrides: Any) -> "ModelConfig":
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides: Any) -> "ModelConfig":
        values: dict[str, Any] = dict(
            image_size=224, stem_width=32, widths=[64, 128, 256, 512], depths=[2, 2, 18, 2], window_size=7
        )
        values.update(overrides)
        return cls(**values)


class LossConfig(BaseModel):
    alpha: float = Field(default=0.5, ge=0.0, le=1.0, description="Weight of cross-entropy against Dice")
    smooth: float = Field(default=1e-5, gt=0.0, description="Dice smoothing in numerator and denominator")


class TrainConfig(BaseModel):
    """Optimizer, schedule and loop settings."""

    lr: float = Field(default=1e-4, gt=0)
    weight_decay: float = Field(default=5e-4, ge=0)
    t_max: int = Field(default=100, ge=1, description="Cosine period in schedule units")
    eta_min: float = Field(default=1e-6, gt=0)
    schedule_unit: Literal["epoch", "step"] = "epoch"
    epochs: int = Field(default=40, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1, description="Stop after this many optimizer steps")
    batch_size: int = Field(default=8, ge=1)
    clip_norm: float = Field(default=1.0, gt=0)
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0)
    seed: int = 0
    flip: bool = True
    rotate: bool = True
    aug_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    log_every: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def validate_schedule(self) -> "TrainConfig":
        if not self.lr > self.eta_min:
            raise ValueError("lr must exceed eta_min")
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise ValueError("betas must lie in [0, 1)")
        return self


class SynthSpec(BaseModel):
    """Synthetic dataset of noisy geometric shapes, one shape kind per foreground class."""

    image_size: int = Field(default=64, ge=16)
    num_classes: int = Field(default=4, ge=2)
    shapes: Optional[list[ShapeKind]] = Field(default=None, description="Shape per foreground class")
    noise_std: float = Field(default=0.1, ge=0.0)
    contrast: tuple[float, float] = (0.5, 1.0)
    channels: int = Field(default=3, ge=1)
    n_train: int = Field(default=400, ge=0)
    n_test: int = Field(default=100, ge=0)
    seed: int = 0
    class_weights: Optional[list[float]] = Field(
        default=None, description="Relative frequency of each foreground class; uniform when omitted"
    )

    @field_validator("contrast")
    @classmethod
    def validate_contrast(cls, v: tuple[float, float]) -> tuple[float, float]:
        if not 0.0 < v[0] <= v[1]:
            raise ValueError("contrast must be an increasing positive range")
        return v

    @model_validator(mode="after")
    def validate_classes(self) -> "SynthSpec":
        foreground = self.num_classes - 1
        if self.shapes is not None and len(self.shapes) != foreground:
            raise ValueError(f"shapes needs {foreground} entries, one per foreground class")
        if self.class_weights is not None:
            if len(self.class_weights) != foreground or any(w <= 0 for w in self.class_weights):
                raise ValueError(f"class_weights needs {foreground} positive entries")
        return self

    @property
    def shape_kinds(self) -> list[ShapeKind]:
        if self.shapes is not None:
            return list(self.shapes)
        cycle: list[ShapeKind] = ["disk", "ring", "rectangle", "curve"]
        return [cycle[i % len(cycle)] for i in range(self.num_classes - 1)]


class EvalConfig(BaseModel):
    include_recall_iou: bool = False
    hd95_mode: Literal["boundary", "mask"] = "boundary"
    num_workers: int = Field(default=4, ge=1)


class ExperimentConfig(BaseModel):
    """Everything one training/evaluation run needs."""

    name: str = Field(default="desk", min_length=1)
    model: ModelConfig = Field(default_factory=ModelConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: SynthSpec = Field(default_factory=SynthSpec)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("name cannot be empty or whitespace")
        return v.strip()

    @model_validator(mode="after")
    def validate_data_matches_model(self) -> "ExperimentConfig":
        if self.data.image_size != self.model.image_size:
            raise ValueError("data.image_size must equal model.image_size")
        if self.data.num_classes != self.model.num_classes:
            raise ValueError("data.num_classes must equal model.num_classes")
        if self.data.channels != self.model.in_channels:
            raise ValueError("data.channels must equal model.in_channels")
        return self


PRESETS = {"desk": ModelConfig.desk, "full": ModelConfig.full}


def apply_overrides(values: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``section.key=value`` overrides; values are parsed as YAML scalars/lists."""
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value, got '{item}'")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        if not all(keys):
            raise ValueError(f"bad override key '{dotted}'")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ValueError(f"cannot parse value for '{dotted}': {raw}") from exc
        node = values
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValueError(f"'{dotted}' does not name a config section")
        node[keys[-1]] = value
    return values


def load_experiment(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[list[str]] = None,
    preset: Optional[str] = None,
) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional YAML file, preset and overrides.

    Args:
        path: YAML file with top-level sections model/loss/train/data/eval
        overrides: dotted ``key=value`` strings applied after the file
        preset: ``desk`` or ``full`` model preset used as the model base

    Returns:
        Validated experiment configuration
    """
    values: dict[str, Any] = {}
    if path is not None:
        with open(path, "r") as f:
            values = yaml.safe_load(f) or {}
        if not isinstance(values, dict):
            raise ValueError(f"{path} must contain a mapping")
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset '{preset}' (choose from {sorted(PRESETS)})")
        base = PRESETS[preset]().model_dump()
        base.update(values.get("model", {}))
        values["model"] = base
    values = apply_overrides(values, overrides or [])

    model = values.get("model", {})
    data = values.setdefault("data", {})
    for model_key, data_key in (("image_size", "image_size"), ("num_classes", "num_classes"), ("in_channels", "channels")):
        if model_key in model:
            data.setdefault(data_key, model[model_key])
    return ExperimentConfig(**values)
