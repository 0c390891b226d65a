"""Model and run configuration.

ModelConfig pins the architecture: channel widths plus one boolean per
removable pipeline component. The ablation variants in VARIANTS each flip
exactly one of those booleans.
"""

from dataclasses import dataclass, field, fields, asdict, replace

from .exceptions import ConfigurationError


@dataclass
class ModelConfig:
    base_width: int = 32
    bottleneck_width: int = 64
    se_reduction: int = 8
    denoiser_depth: int = 4
    use_seblock: bool = True
    use_dark_region: bool = True
    use_residual_add: bool = True
    use_refinement: bool = True
    use_denoiser: bool = True

    def __post_init__(self):
        if self.base_width <= 0 or self.bottleneck_width <= 0:
            raise ConfigurationError("channel widths must be positive")
        if self.bottleneck_width < self.base_width:
            raise ConfigurationError(
                f"bottleneck_width ({self.bottleneck_width}) must be >= "
                f"base_width ({self.base_width})")
        if self.se_reduction <= 0:
            raise ConfigurationError("se_reduction must be positive")
        if self.denoiser_depth <= 0:
            raise ConfigurationError("denoiser_depth must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(
                f"unknown ModelConfig keys {sorted(unknown)}; "
                f"valid keys: {sorted(known)}")
        return cls(**d)


# One variant per removable component; "baseline" keeps everything on.
VARIANTS = {
    "baseline": {},
    "no-seblock": {"use_seblock": False},
    "no-dark": {"use_dark_region": False},
    "no-residual": {"use_residual_add": False},
    "no-refine": {"use_refinement": False},
    "no-denoise": {"use_denoiser": False},
}

# PSNR/SSIM reported for full-scale training of each variant. Shown in
# ablation tables for context only; never asserted at desk scale.
FULL_TRAINING_REFERENCE = {
    "baseline": (24.91, 0.912),
    "no-seblock": (20.85, 0.875),
    "no-dark": (21.75, 0.890),
    "no-residual": (23.06, 0.902),
    "no-refine": (22.13, 0.882),
    "no-denoise": (21.90, 0.880),
}


def variant_config(name: str, base: ModelConfig | None = None) -> ModelConfig:
    if name not in VARIANTS:
        raise ConfigurationError(
            f"unknown variant '{name}'; valid variants: {sorted(VARIANTS)}")
    base = base if base is not None else ModelConfig()
    return replace(base, **VARIANTS[name])


@dataclass
class DatasetConfig:
    root: str | None = None
    name: str = "custom"
    train_size: tuple | None = (224, 224)


@dataclass
class LossConfig:
    mode: str = "vgg_only"
    w_vgg: float | None = None
    w_charbonnier: float = 1.0
    w_combined: float = 1.0


@dataclass
class HarnessConfig:
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    checkpoint_interval: int = 50
    epochs: int | None = None
    augment_flip: bool = False


@dataclass
class ScheduleFields:
    lr_min: float = 1e-8
    lr_max: float = 2e-5
    warmup_epochs: int = 75
    hold_until: int = 600
    total_epochs: int = 750


_SECTIONS = {
    "dataset": DatasetConfig,
    "model": ModelConfig,
    "schedule": ScheduleFields,
    "loss": LossConfig,
    "train": HarnessConfig,
}


@dataclass
class RunConfig:
    """The declarative run document: one seed, one output dir, one section
    per subsystem. Built from a YAML mapping plus key=value overrides."""

    seed: int = 0
    out_dir: str = "runs/out"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleFields = field(default_factory=ScheduleFields)
    loss: LossConfig = field(default_factory=LossConfig)
    train: HarnessConfig = field(default_factory=HarnessConfig)


def valid_override_keys() -> list:
    keys = ["seed", "out_dir"]
    for section, cls in _SECTIONS.items():
        keys.extend(f"{section}.{f.name}" for f in fields(cls))
    return sorted(keys)


def _coerce(section_cls, key: str, value):
    if section_cls is DatasetConfig and key == "train_size" and value is not None:
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return (int(value[0]), int(value[1]))
        raise ConfigurationError(
            f"dataset.train_size must be [H, W] or null, got {value!r}")
    return value


def _build_section(section: str, mapping) -> object:
    cls = _SECTIONS[section]
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigurationError(
            f"unknown keys {[f'{section}.{k}' for k in unknown]}; "
            f"valid keys: {valid_override_keys()}")
    kwargs = {k: _coerce(cls, k, v) for k, v in mapping.items()}
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"bad value in section '{section}': {e}")


def run_config_from_mapping(doc) -> RunConfig:
    """Validate a plain mapping (parsed YAML) into a RunConfig."""
    doc = dict(doc or {})
    known_top = {"seed", "out_dir", *_SECTIONS}
    unknown = sorted(set(doc) - known_top)
    if unknown:
        raise ConfigurationError(
            f"unknown config sections {unknown}; "
            f"valid keys: {valid_override_keys()}")
    cfg = RunConfig()
    if "seed" in doc:
        try:
            cfg.seed = int(doc["seed"])
        except (TypeError, ValueError):
            raise ConfigurationError(f"seed must be an integer, got {doc['seed']!r}")
    if "out_dir" in doc:
        cfg.out_dir = str(doc["out_dir"])
    for section in _SECTIONS:
        if section in doc:
            if not isinstance(doc[section], dict):
                raise ConfigurationError(
                    f"config section '{section}' must be a mapping")
            setattr(cfg, section, _build_section(section, doc[section]))
    return cfg


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply dotted key=value overrides (values parsed as YAML scalars)."""
    import yaml

    merged = {
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        **{section: asdict(getattr(cfg, section)) for section in _SECTIONS},
    }
    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(
                f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"cannot parse override value {raw!r}: {e}")
        if key in ("seed", "out_dir"):
            merged[key] = value
            continue
        if "." not in key:
            raise ConfigurationError(
                f"unknown override key {key!r}; valid keys: "
                f"{valid_override_keys()}")
        section, sub = key.split(".", 1)
        if section not in _SECTIONS or sub not in {
                f.name for f in fields(_SECTIONS[section])}:
            raise ConfigurationError(
                f"unknown override key {key!r}; valid keys: "
                f"{valid_override_keys()}")
        merged[section][sub] = value
    return run_config_from_mapping(merged)
