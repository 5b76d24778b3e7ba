"""
tandemnet — Run Configuration
Parser for key=value run-config files.

    # comment
    arch=fc:784-300-10
    neuron=IF
    T=8
    dataset_dir=data/mnist
    out_dir=runs/fc300

Required keys: arch, dataset_dir, out_dir. Everything else falls back to the
defaults in config.py. Unknown keys and malformed values are rejected.
"""

import hashlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import config
from tandem.codec import DecodeMode
from tandem.errors import ConfigError, ParameterError
from tandem.network import parse_arch
from tandem.neuron_sim import NeuronKind, NeuronParams

REQUIRED = ("arch", "dataset_dir", "out_dir")


@dataclass(frozen=True)
class TrainConfig:
    arch: str
    dataset_dir: Path
    out_dir: Path
    neuron: str = "IF"
    theta: float | None = None
    tau_m: float | None = None
    T: int = config.DEFAULT_T
    decode: str = "membrane"
    epochs: int = config.DEFAULT_EPOCHS
    lr: float = config.DEFAULT_LR
    momentum: float = config.DEFAULT_MOMENTUM
    weight_decay: float = config.DEFAULT_WEIGHT_DECAY
    batch: int = config.DEFAULT_BATCH
    seed: int = config.RANDOM_SEED
    task: str = "classify"
    optimizer: str = "sgd"
    lr_schedule: str = "constant"
    bn: bool = False
    train_mode: str = "tandem"
    dataset: str = "mnist"
    train_limit: int | None = None
    test_limit: int | None = None
    synaptic_delay: bool = False
    threads: int | None = None

    def __post_init__(self):
        _choice("neuron", self.neuron.upper(), [k.value for k in NeuronKind])
        _choice("decode", self.decode, [m.value for m in DecodeMode])
        _choice("task", self.task, ["classify", "reconstruct"])
        _choice("optimizer", self.optimizer, ["sgd", "adam"])
        _choice("lr_schedule", self.lr_schedule, ["constant", "cosine"])
        _choice("train_mode", self.train_mode, ["tandem", "ann"])
        _choice("dataset", self.dataset, ["mnist", "events"])
        _check("T", 1 <= self.T <= config.MAX_T, self.T)
        _check("epochs", self.epochs >= 1, self.epochs)
        _check("lr", self.lr >= 0, self.lr)
        _check("momentum", 0 <= self.momentum < 1, self.momentum)
        _check("weight_decay", self.weight_decay >= 0, self.weight_decay)
        _check("batch", self.batch >= 1, self.batch)
        _check("theta", self.theta is None or self.theta > 0, self.theta)
        _check("tau_m", self.tau_m is None or self.tau_m > 0, self.tau_m)
        for key in ("train_limit", "test_limit", "threads"):
            value = getattr(self, key)
            _check(key, value is None or value >= 1, value)
        if self.task == "reconstruct" and self.dataset != "mnist":
            raise ConfigError("task=reconstruct requires dataset=mnist")
        parse_arch(self.arch)

    def neuron_params(self) -> NeuronParams:
        try:
            return NeuronParams.from_kind(self.neuron, self.theta, self.tau_m)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def decode_mode(self) -> DecodeMode:
        return DecodeMode.parse(self.decode)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dataset_dir"] = str(self.dataset_dir)
        out["out_dir"] = str(self.out_dir)
        return out


def _choice(key: str, value: str, allowed: list) -> None:
    if value not in allowed:
        raise ConfigError(f"{key}={value!r} is not one of {allowed}")


def _check(key: str, ok: bool, value) -> None:
    if not ok:
        raise ConfigError(f"{key}={value!r} is out of range")


def _to_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _converter(field_type):
    text = str(field_type)
    if "bool" in text:
        return _to_bool
    if "int" in text:
        return int
    if "float" in text:
        return float
    if "Path" in text:
        return Path
    return str


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def parse_config_text(text: str) -> TrainConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _converter(_FIELD_TYPES[key])(raw)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {raw!r}") from None
    missing = [key for key in REQUIRED if key not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    if "neuron" in values:
        values["neuron"] = values["neuron"].upper()
    if values.get("decode") == "count":
        values["decode"] = "spike_count"
    return TrainConfig(**values)


def load_config(path) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not valid UTF-8") from None
    return parse_config_text(text)


def config_hash(raw: bytes) -> str:
    """Git-style blob SHA-1 of the config file bytes."""
    return hashlib.sha1(b"blob %d\0" % len(raw) + raw).hexdigest()
