"""Run configuration: key=value files flattened onto the typed config models"""
from pathlib import Path
from typing import Dict, List, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator

from config import settings
from domain.entities.embedding import EncoderConfig
from domain.entities.stylizer import StylizerKind
from domain.entities.training import LossConfig, TrainConfig
from domain.exceptions import ConfigError

RUN_CONFIG_FILE = "run_config.txt"
LIST_KEYS = {"channels", "branches", "stylizers", "eval_stylizers"}


def parse_pairs(text: str, source: str = "config") -> Dict[str, str]:
    """`key = value` lines; `#` starts a comment; later keys win"""
    pairs: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{number}: expected key=value, got {raw.strip()!r}")
        pairs[key] = value
    return pairs


def format_pairs(pairs: Mapping[str, object]) -> str:
    """Sorted key=value lines; lists are comma-joined"""
    lines = []
    for key in sorted(pairs):
        value = pairs[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = ""
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def parse_stylizers(value: str) -> List[StylizerKind]:
    """Comma-separated stylizer names, validated against the registry"""
    names = [name.strip() for name in value.split(",") if name.strip()]
    if not names:
        raise ConfigError(f"no stylizers given; valid names: {', '.join(StylizerKind.names())}")
    unknown = [name for name in names if name not in StylizerKind.names()]
    if unknown:
        raise ConfigError(
            f"unknown stylizer {', '.join(repr(n) for n in unknown)}; "
            f"valid names: {', '.join(StylizerKind.names())}"
        )
    return [StylizerKind(name) for name in names]


class RunConfig(BaseModel):
    """Everything a run depends on: training, data and evaluation grid"""

    train: TrainConfig = Field(default_factory=TrainConfig)
    image_size: int = Field(64, ge=16)
    data_dir: Optional[str] = None
    eval_styles: int = Field(20, ge=2)
    eval_contents: int = Field(20, ge=2)
    eval_seed_base: int = Field(settings.DEFAULT_EVAL_SEED_BASE, ge=0)
    eval_stylizers: List[StylizerKind] = Field(default_factory=lambda: list(StylizerKind))

    @field_validator("data_dir")
    @classmethod
    def _empty_is_none(cls, value: Optional[str]) -> Optional[str]:
        return value or None

    @classmethod
    def from_pairs(cls, pairs: Mapping[str, str], source: str = "config") -> "RunConfig":
        """Route flat keys to the run, training, encoder and loss sections"""
        sections: Dict[str, Dict[str, object]] = {"run": {}, "train": {}, "encoder": {}, "loss": {}}
        targets = {
            "run": set(cls.model_fields) - {"train"},
            "train": set(TrainConfig.model_fields) - {"encoder", "loss"},
            "encoder": set(EncoderConfig.model_fields),
            "loss": set(LossConfig.model_fields),
        }
        for key, value in pairs.items():
            section = next((name for name, keys in targets.items() if key in keys), None)
            if section is None:
                raise ConfigError(f"{source}: unknown key {key!r}")
            if key in ("stylizers", "eval_stylizers"):
                value = parse_stylizers(str(value))
            elif key in LIST_KEYS:
                value = [v.strip() for v in str(value).split(",") if v.strip()]
            sections[section][key] = value
        try:
            train = TrainConfig(
                **sections["train"],
                encoder=EncoderConfig(**sections["encoder"]),
                loss=LossConfig(**sections["loss"]),
            )
            return cls(train=train, **sections["run"])
        except ValidationError as e:
            raise ConfigError(f"{source}: {e}") from e

    def to_pairs(self) -> Dict[str, object]:
        """Flat, fully resolved key → value mapping"""
        pairs: Dict[str, object] = self.model_dump(mode="json", exclude={"train"})
        pairs.update(self.train.model_dump(mode="json", exclude={"encoder", "loss"}))
        pairs.update(self.train.encoder.model_dump(mode="json"))
        pairs.update(self.train.loss.model_dump(mode="json"))
        return pairs

    def to_text(self) -> str:
        return format_pairs(self.to_pairs())


def load_run_config(path: Optional[Path], overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Config file (if any) with command-line overrides applied on top"""
    pairs: Dict[str, str] = {}
    source = "defaults"
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        pairs.update(parse_pairs(text, str(path)))
        source = str(path)
    pairs.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_pairs(pairs, source)
