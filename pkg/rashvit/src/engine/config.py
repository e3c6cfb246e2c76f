"""
Run Configuration

TrainConfig holds the optimization protocol; RunConfigFile is the JSON
document the CLI reads (model + training + data + output directory).

SNR fields accept a number in dB or the string "clean" (no injection);
"clean" is stored internally as +inf and written back as "clean".
"""

import math
from pathlib import Path
from typing import Annotated, Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, model_validator

from rashvit import config
from rashvit.src.datasets.archive import LabeledDataset, load_archive
from rashvit.src.datasets.splits import split, split_counts
from rashvit.src.datasets.synth import SynthSpec, synth_generate
from rashvit.src.errors import MissingFileError
from rashvit.src.model.config import ModelConfig

CLEAN_TOKEN = "clean"


def parse_snr(value: Any) -> float:
    """'clean' / None / +inf -> +inf, anything else -> finite float dB."""
    if value is None:
        return math.inf
    if isinstance(value, str):
        token = value.strip().lower()
        if token in (CLEAN_TOKEN, "inf", "+inf"):
            return math.inf
        value = float(token)
    value = float(value)
    if math.isnan(value) or value == -math.inf:
        raise ValueError(f"SNR must be finite dB or '{CLEAN_TOKEN}', got {value}")
    return value


def format_snr(value: float) -> Union[float, str]:
    return CLEAN_TOKEN if math.isinf(value) else value


SNR = Annotated[float, BeforeValidator(parse_snr), PlainSerializer(format_snr)]


class TrainConfig(BaseModel):
    """Optimization protocol of one training run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=config.LEARNING_RATE, ge=0.0, description="AdamW learning rate")
    batch_size: int = Field(default=config.BATCH_SIZE, ge=2, description="Mini-batch size (batch norm needs >= 2)")
    epochs: int = Field(default=config.DESK_EPOCHS, ge=1)
    seed: int = Field(default=0, ge=0, description="Initialization, batch order, dropout and noise seed")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    train_snr_db: SNR = Field(default=math.inf, description="Noise injected into train/val signals")
    test_snr_db: SNR = Field(default=math.inf, description="Noise injected into test signals")
    calibrated_noise: bool = Field(default=True, description="Rescale noise to the exact target power")
    feature_mode: Literal["fft", "raw"] = Field(default="fft", description="Spectral image or raw packing")
    eval_batch_size: int = Field(default=64, ge=1)
    log_every: int = Field(default=10, ge=1, description="Epochs between INFO progress lines")

    def with_snr(self, snr_db: float) -> "TrainConfig":
        """Copy training and testing at the same SNR."""
        return self.model_copy(update={"train_snr_db": snr_db, "test_snr_db": snr_db})


class SplitConfig(BaseModel):
    """Either ratios (train, val, test) or fixed per-class counts."""

    model_config = ConfigDict(extra="forbid")

    ratios: Tuple[float, float, float] = Field(default=config.SPLIT_RATIOS)
    counts: Optional[Dict[Literal["train", "val", "test"], int]] = Field(
        default=None, description="Per-class counts; overrides ratios (e.g. 250/250 train/test)"
    )
    seed: int = Field(default=0, ge=0)


class DataConfig(BaseModel):
    """Dataset reference: an archive manifest or a synthetic spec."""

    model_config = ConfigDict(extra="forbid")

    archive: Optional[str] = Field(default=None, description="Path to manifest.json or its directory")
    synth: Optional[SynthSpec] = Field(default=None, description="Generate in memory instead of loading")
    window: Optional[int] = Field(default=None, ge=1, description="Override of the manifest window")
    stride: Optional[int] = Field(default=None, ge=1, description="Override of the manifest stride")
    split: SplitConfig = Field(default_factory=SplitConfig)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.archive is None) == (self.synth is None):
            raise ValueError("exactly one of 'archive' or 'synth' must be given")
        return self

    def load(self) -> LabeledDataset:
        """Load or generate the dataset and tag its splits."""
        if self.synth is not None:
            dataset = synth_generate(self.synth)
        else:
            dataset = load_archive(self.archive, self.window, self.stride)
        if self.split.counts:
            return split_counts(dataset, self.split.counts, self.split.seed)
        return split(dataset, self.split.ratios, self.split.seed)


class RunConfigFile(BaseModel):
    """Top-level run document read by `train`, `sweep` and `ablate`."""

    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig
    out_dir: str = Field(default=str(config.RUNS_DIR / "run"), description="Artifact directory")

    @model_validator(mode="after")
    def _classes_match(self):
        if self.data.synth is not None and self.data.synth.num_classes != self.model.num_classes:
            raise ValueError(
                f"model.num_classes={self.model.num_classes} but synth generates "
                f"{self.data.synth.num_classes} classes"
            )
        return self

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunConfigFile":
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"config not found: {path}")
        doc = cls.model_validate_json(path.read_text(encoding="utf-8"))
        # Relative archive paths resolve against the config file
        if doc.data.archive and not Path(doc.data.archive).is_absolute():
            candidate = (path.parent / doc.data.archive).resolve()
            if candidate.exists():
                doc.data.archive = str(candidate)
        return doc
