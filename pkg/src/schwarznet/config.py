"""Run configuration: named presets, INI files, and dotted overrides.

A configuration is a flat record.  Presets fill it with the defaults of one
of the stock experiments; an INI file starts from the preset named by
``[problem] name`` and overrides individual keys; ``section.key=value``
strings override either.
"""

import configparser
from dataclasses import dataclass, replace

from .alm import TrainerSettings
from .errors import ConfigError
from .geometry import (
    PointCounts,
    complex_interface_curve,
    complex_outer_curve,
    make_cartesian_partition,
    make_polar_partition,
)
from .orchestrator import ScheduleSettings, build_trainers
from .problems import helmholtz_manufactured, make_inverse_case, poisson_manufactured


@dataclass(frozen=True)
class RunConfig:
    problem: str = "poisson_1way"
    kind: str = "poisson"            # poisson | helmholtz
    wavenumber: float = 1.0
    inverse_case: int = 0            # 0 = forward problem
    n_measurements: int | None = None   # None -> per-case default
    noise_sigma: float = 0.0
    layout: str = "cartesian"        # cartesian | polar
    nx: int = 4
    ny: int = 1
    n_interior: int = 1024
    n_boundary: int = 128
    n_interface: int = 128
    hidden: tuple = (20, 20, 20)
    epochs: int = 500                # local epochs per outer iteration
    outer_iterations: int = 30
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    dual_lr: float = 1e-2
    smoothing: float = 0.99
    stabilizer: float = 1e-8
    robin_mode: str = "adaptive"     # adaptive | constant
    robin_init: float = 0.5
    robin_update: str = "balance"    # balance | gradient | closed_form
    robin_lr: float = 0.5
    lr_decay: float = 0.99985
    granularity: str = "per_point"   # per_point | per_type
    reset_scope: str = "all"         # all | multipliers
    workers: str = "serial"          # serial | thread
    error_resolution: int = 101
    seed: int = 0
    out_dir: str = "out"


_PRESETS = {
    "single_domain": dict(nx=1, ny=1, epochs=5000, outer_iterations=1),
    "poisson_1way": {},
    "poisson_2way": dict(nx=2, ny=2),
    "poisson_complex": dict(layout="polar", hidden=(30, 30), n_interior=4096,
                            n_boundary=4096, n_interface=4096, epochs=50),
    "helmholtz_1way": dict(kind="helmholtz"),
    "helmholtz_2way": dict(kind="helmholtz", nx=2, ny=2),
    "inverse_case1": dict(nx=2, ny=2, inverse_case=1),
    "inverse_case2": dict(nx=2, ny=2, inverse_case=2),
}
PRESET_NAMES = tuple(_PRESETS)

# section -> (key, field) pairs, in emission order
_SECTIONS = {
    "problem": (("name", "problem"), ("kind", "kind"), ("wavenumber", "wavenumber"),
                ("inverse_case", "inverse_case"), ("n_measurements", "n_measurements"),
                ("noise_sigma", "noise_sigma")),
    "geometry": (("layout", "layout"), ("nx", "nx"), ("ny", "ny")),
    "sampling": (("n_interior", "n_interior"), ("n_boundary", "n_boundary"),
                 ("n_interface", "n_interface")),
    "network": (("hidden", "hidden"),),
    "training": (("epochs", "epochs"), ("learning_rate", "learning_rate"),
                 ("optimizer", "optimizer"), ("dual_lr", "dual_lr"),
                 ("smoothing", "smoothing"), ("stabilizer", "stabilizer"),
                 ("robin_mode", "robin_mode"), ("robin_init", "robin_init"),
                 ("robin_update", "robin_update"), ("robin_lr", "robin_lr"),
                 ("lr_decay", "lr_decay"), ("granularity", "granularity")),
    "schedule": (("outer_iterations", "outer_iterations"), ("reset_scope", "reset_scope"),
                 ("workers", "workers"), ("error_resolution", "error_resolution")),
    "run": (("seed", "seed"), ("out_dir", "out_dir")),
}
_FIELD = {(sec, key): field for sec, pairs in _SECTIONS.items() for key, field in pairs}

_ENUMS = {
    "kind": ("poisson", "helmholtz"),
    "layout": ("cartesian", "polar"),
    "optimizer": ("adam", "sgd"),
    "robin_mode": ("adaptive", "constant"),
    "robin_update": ("balance", "gradient", "closed_form"),
    "granularity": ("per_point", "per_type"),
    "reset_scope": ("all", "multipliers"),
    "workers": ("serial", "thread"),
}
_INT_FIELDS = ("inverse_case", "nx", "ny", "n_interior", "n_boundary", "n_interface",
               "epochs", "outer_iterations", "error_resolution", "seed")
_FLOAT_FIELDS = ("wavenumber", "noise_sigma", "learning_rate", "dual_lr", "smoothing",
                 "stabilizer", "robin_init", "robin_lr", "lr_decay")


def _parse_value(field, raw):
    raw = raw.strip()
    if field == "problem":
        return raw
    if field == "hidden":
        try:
            widths = tuple(int(tok) for tok in raw.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(f"hidden must be a comma list of ints, got {raw!r}") from None
        if not widths:
            raise ConfigError(f"hidden must name at least one layer, got {raw!r}")
        return widths
    if field == "n_measurements":
        if raw.lower() in ("none", ""):
            return None
        return int(raw)
    if field == "out_dir":
        return raw
    if field in _ENUMS:
        value = raw.lower()
        if value not in _ENUMS[field]:
            raise ConfigError(f"{field} must be one of {_ENUMS[field]}, got {raw!r}")
        return value
    if field in _INT_FIELDS:
        return int(raw)
    if field in _FLOAT_FIELDS:
        return float(raw)
    raise ConfigError(f"no parser for field {field!r}")


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.problem not in _PRESETS:
        raise ConfigError(f"unknown problem {cfg.problem!r}; choose from {PRESET_NAMES}")
    for field, allowed in _ENUMS.items():
        if getattr(cfg, field) not in allowed:
            raise ConfigError(f"{field} must be one of {allowed}, got {getattr(cfg, field)!r}")
    for field in ("nx", "ny", "n_interior", "n_boundary", "n_interface", "epochs",
                  "outer_iterations"):
        if getattr(cfg, field) < 1:
            raise ConfigError(f"{field} must be positive, got {getattr(cfg, field)}")
    if cfg.error_resolution < 2:
        raise ConfigError(f"error_resolution must be at least 2, got {cfg.error_resolution}")
    if not all(isinstance(w, int) and w > 0 for w in cfg.hidden):
        raise ConfigError(f"hidden widths must be positive ints, got {cfg.hidden}")
    if cfg.inverse_case not in (0, 1, 2):
        raise ConfigError(f"inverse_case must be 0, 1, or 2, got {cfg.inverse_case}")
    if cfg.inverse_case and not (cfg.layout == "cartesian" and cfg.nx == 2 and cfg.ny == 2):
        raise ConfigError("inverse cases require the cartesian 2x2 layout")
    if cfg.n_measurements is not None and cfg.n_measurements < 1:
        raise ConfigError(f"n_measurements must be positive, got {cfg.n_measurements}")
    if not (0.0 < cfg.robin_init < 1.0):
        raise ConfigError(f"robin_init must lie in (0, 1), got {cfg.robin_init}")
    if cfg.robin_lr <= 0.0:
        raise ConfigError(f"robin_lr must be positive, got {cfg.robin_lr}")
    if cfg.robin_update == "balance" and cfg.robin_lr > 1.0:
        raise ConfigError(
            f"robin_lr is an averaging rate under the balance rule and must "
            f"be at most 1, got {cfg.robin_lr}")
    if not (0.0 < cfg.lr_decay <= 1.0):
        raise ConfigError(f"lr_decay must lie in (0, 1], got {cfg.lr_decay}")
    if cfg.wavenumber <= 0.0:
        raise ConfigError(f"wavenumber must be positive, got {cfg.wavenumber}")
    if cfg.noise_sigma < 0.0:
        raise ConfigError(f"noise_sigma must be non-negative, got {cfg.noise_sigma}")
    return cfg


def default_config(name: str) -> RunConfig:
    if name not in _PRESETS:
        raise ConfigError(f"unknown problem {name!r}; choose from {PRESET_NAMES}")
    return validate(RunConfig(problem=name, **_PRESETS[name]))


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from None
    data = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    name = data.get("problem", {}).pop("name", "poisson_1way")
    fields = {"problem": name, **_PRESETS.get(name, {})} if name in _PRESETS else {}
    if name not in _PRESETS:
        raise ConfigError(f"unknown problem {name!r}; choose from {PRESET_NAMES}")
    for sec, items in data.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}] in {path}")
        for key, raw in items.items():
            field = _FIELD.get((sec, key))
            if field is None:
                raise ConfigError(f"unknown key {sec}.{key} in {path}")
            try:
                fields[field] = _parse_value(field, raw)
            except (ValueError, ConfigError) as err:
                raise ConfigError(f"invalid value for {sec}.{key}: {err}") from None
    return validate(RunConfig(**fields))


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    fields = {}
    for spec in overrides:
        key_part, eq, raw = spec.partition("=")
        if not eq:
            raise ConfigError(f"override {spec!r} must look like section.key=value")
        sec, dot, key = key_part.strip().partition(".")
        if not dot:
            raise ConfigError(f"override {spec!r} must name section.key")
        field = _FIELD.get((sec, key.strip()))
        if field is None:
            raise ConfigError(f"unknown override target {sec}.{key.strip()}")
        try:
            fields[field] = _parse_value(field, raw)
        except (ValueError, ConfigError) as err:
            raise ConfigError(f"invalid value for {sec}.{key.strip()}: {err}") from None
    return validate(replace(cfg, **fields))


def to_ini(cfg: RunConfig) -> str:
    """Deterministic full echo of the resolved configuration."""
    lines = []
    for sec, pairs in _SECTIONS.items():
        lines.append(f"[{sec}]")
        for key, field in pairs:
            lines.append(f"{key} = {_fmt(getattr(cfg, field))}")
        lines.append("")
    return "\n".join(lines)


def materialize(cfg: RunConfig):
    """Build the partition, problem, trainers, and schedule for a config."""
    validate(cfg)
    if cfg.layout == "cartesian":
        partition = make_cartesian_partition(cfg.nx, cfg.ny)
    else:
        partition = make_polar_partition(complex_outer_curve(), complex_interface_curve())
    if cfg.kind == "helmholtz":
        problem = helmholtz_manufactured(cfg.wavenumber)
    else:
        problem = poisson_manufactured()
    if cfg.inverse_case:
        problem = make_inverse_case(problem, partition, cfg.inverse_case,
                                    n_meas=cfg.n_measurements, seed=cfg.seed,
                                    noise_sigma=cfg.noise_sigma)
    counts = PointCounts(cfg.n_interior, cfg.n_boundary, cfg.n_interface)
    settings = TrainerSettings(
        learning_rate=cfg.learning_rate, optimizer=cfg.optimizer, dual_lr=cfg.dual_lr,
        smoothing=cfg.smoothing, stabilizer=cfg.stabilizer, robin_mode=cfg.robin_mode,
        robin_init=cfg.robin_init, robin_update=cfg.robin_update,
        robin_lr=cfg.robin_lr, lr_decay=cfg.lr_decay, granularity=cfg.granularity)
    trainers = build_trainers(partition, problem, counts, (2, *cfg.hidden, 1),
                              cfg.seed, settings)
    schedule = ScheduleSettings(
        outer_iterations=cfg.outer_iterations, local_epochs=cfg.epochs,
        reset_scope=cfg.reset_scope, workers=cfg.workers,
        error_resolution=cfg.error_resolution)
    return partition, problem, trainers, schedule
