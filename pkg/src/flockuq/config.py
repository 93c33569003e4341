"""Experiment configuration: strict sectioned key-value text.

Format: ``[section]`` headers, ``key = value`` lines, ``#`` comments.
Unknown sections or keys are fatal (with the offending line number), every
numeric field is range-checked, and parse(serialize(cfg)) round-trips to an
equal config.  Defaults are applied per field, so a minimal file is valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "default_config"]


class ConfigError(ValueError):
    """Config parsing or validation failure; carries the source line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ModelSection:
    N: int = 10
    d: int = 2
    seed: int = 20260809
    x_scale: float = 1.0
    v_scale: float = 1.0
    z_lin: float = 0.3
    z_quad: float = 0.1
    zero_momentum: bool = True


@dataclass
class KernelSection:
    psi0: float = 0.5
    K0: float = 1.0
    sigmaK: float = 0.3
    beta0: float = 1.0
    sigmaB: float = 0.0


@dataclass
class IntegratorSection:
    dt: float = 1e-3
    T: float = 30.0
    save_every: int = 10


@dataclass
class UQSection:
    pdf_tag: str = "uniform"
    sigma: float = 0.5
    quad_nodes: int = 16
    mc_samples: int = 10000


@dataclass
class SensitivitySection:
    order: int = 2
    fd_check: bool = True
    fd_step: float = 1e-4


@dataclass
class StabilitySection:
    perturbation: float = 1e-6
    order: int = 1


@dataclass
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    uq: UQSection = field(default_factory=UQSection)
    sensitivity: SensitivitySection = field(default_factory=SensitivitySection)
    stability: StabilitySection = field(default_factory=StabilitySection)


_SECTIONS = {
    "model": ModelSection,
    "kernel": KernelSection,
    "integrator": IntegratorSection,
    "uq": UQSection,
    "sensitivity": SensitivitySection,
    "stability": StabilitySection,
}

# field -> (predicate, description); violations name section.field
_RANGES = {
    ("model", "N"): (lambda v: v >= 1, "must be >= 1"),
    ("model", "d"): (lambda v: v >= 1, "must be >= 1"),
    ("model", "seed"): (lambda v: v >= 0, "must be >= 0"),
    ("model", "x_scale"): (lambda v: v > 0, "must be positive"),
    ("model", "v_scale"): (lambda v: v >= 0, "must be nonnegative"),
    ("model", "z_lin"): (lambda v: v >= 0, "must be nonnegative"),
    ("model", "z_quad"): (lambda v: v >= 0, "must be nonnegative"),
    ("kernel", "psi0"): (lambda v: v >= 0, "must be nonnegative"),
    ("kernel", "K0"): (lambda v: v >= 0, "must be nonnegative"),
    ("kernel", "sigmaK"): (lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    ("kernel", "beta0"): (lambda v: v > 0, "must be positive"),
    ("kernel", "sigmaB"): (lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    ("integrator", "dt"): (lambda v: v > 0, "must be positive"),
    ("integrator", "T"): (lambda v: v >= 0, "must be nonnegative"),
    ("integrator", "save_every"): (lambda v: v >= 1, "must be >= 1"),
    ("uq", "pdf_tag"): (lambda v: v in ("uniform", "tgauss"), "must be 'uniform' or 'tgauss'"),
    ("uq", "sigma"): (lambda v: v > 0, "must be positive"),
    ("uq", "quad_nodes"): (lambda v: v >= 1, "must be >= 1"),
    ("uq", "mc_samples"): (lambda v: v >= 2, "must be >= 2"),
    ("sensitivity", "order"): (lambda v: v >= 0, "must be >= 0"),
    ("sensitivity", "fd_step"): (lambda v: v > 0, "must be positive"),
    ("stability", "perturbation"): (lambda v: v > 0, "must be positive"),
    ("stability", "order"): (lambda v: v >= 0, "must be >= 0"),
}

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(section: str, name: str, raw: str, ftype, line: int):
    if ftype is bool:
        try:
            return _BOOL[raw.strip().lower()]
        except KeyError:
            raise ConfigError(f"{section}.{name}: cannot parse {raw!r} as a boolean", line) from None
    if ftype is int:
        try:
            return int(raw.strip())
        except ValueError:
            raise ConfigError(f"{section}.{name}: cannot parse {raw!r} as an integer", line) from None
    if ftype is float:
        try:
            return float(raw.strip())
        except ValueError:
            raise ConfigError(f"{section}.{name}: cannot parse {raw!r} as a number", line) from None
    return raw.strip()


def _validate(cfg: ExperimentConfig, locations: dict[tuple[str, str], int]) -> None:
    for (section, name), (pred, desc) in _RANGES.items():
        value = getattr(getattr(cfg, section), name)
        if not pred(value):
            raise ConfigError(f"{section}.{name} {desc} (got {value!r})", locations.get((section, name)))
    if cfg.kernel.psi0 == 0.0 and cfg.kernel.K0 * (1.0 - cfg.kernel.sigmaK) <= 0.0:
        raise ConfigError("kernel.psi0 = 0 requires K0*(1-sigmaK) > 0", locations.get(("kernel", "psi0")))


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; unknown sections/keys and range violations are fatal."""
    cfg = ExperimentConfig()
    section: str | None = None
    seen: set[tuple[str, str]] = set()
    locations: dict[tuple[str, str], int] = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {rawline.strip()!r}", lineno)
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {rawline.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        section_cls = _SECTIONS[section]
        ftypes = {f.name: f.type for f in fields(section_cls)}
        if key not in ftypes:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {section}.{key}", lineno)
        seen.add((section, key))
        locations[(section, key)] = lineno
        ftype = {"int": int, "float": float, "bool": bool, "str": str}[str(ftypes[key])]
        setattr(getattr(cfg, section), key, _convert(section, key, raw, ftype, lineno))
    _validate(cfg, locations)
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) equals cfg."""
    lines = []
    for section, cls in _SECTIONS.items():
        lines.append(f"[{section}]")
        obj = getattr(cfg, section)
        for f in fields(cls):
            value = getattr(obj, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        lines.append("")
    return "\n".join(lines)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()
