"""Experiment configuration: defaults, JSON schema and loading."""
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import jsonschema

from ..errors import ConfigError
from ..filters import FilterKind

SCHEMA_VERSION = 1

DEFAULT_ROSTER = [k.value for k in FilterKind]

_number_or_list = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ]
}
_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_depth = {
    "type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    "minItems": 2, "maxItems": 2,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "mvpure experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "sinr_db": _number_or_list,
        "sbnr_db": _number_or_list,
        "smnr_db": _number_or_list,
        "n_sensors": _pos_int,
        "l": _pos_int,
        "k": _nonneg_int,
        "p": _nonneg_int,
        "p_shallow": {"type": ["integer", "null"], "minimum": 0},
        "n_runs": _pos_int,
        "n_trials": _pos_int,
        "samples_per_trial": {"type": "integer", "minimum": 4, "multipleOf": 2},
        "mvar_order": _pos_int,
        "mask_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "patch_rank_s": {"type": ["integer", "null"], "minimum": 1},
        "eig_sig": {"type": ["integer", "null"], "minimum": 1},
        "perturb_shift_m": {"type": "number", "minimum": 0},
        "perturb_angle_rad": {"type": "number", "minimum": 0},
        "filter_roster": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"enum": DEFAULT_ROSTER},
        },
        "master_seed": _nonneg_int,
        "head_radius": {"type": "number", "exclusiveMinimum": 0},
        "conductivity": {"type": "number", "exclusiveMinimum": 0},
        "cortical_depth": _depth,
        "shallow_depth": _depth,
        "deep_depth": _depth,
        "n_freqs": {"type": "integer", "minimum": 2},
        "diagonal_loading": {"type": "number", "minimum": 0},
        "q_source": {"enum": ["estimated", "oracle"]},
    },
}


def _as_list(v):
    return [float(x) for x in v] if isinstance(v, (list, tuple)) else [float(v)]


@dataclass
class ExperimentConfig:
    """All knobs of a simulation study.

    SNRs are in dB and name the power of the sources of interest relative
    to interference (``sinr_db``), background activity (``sbnr_db``) and
    measurement noise (``smnr_db``), all measured at the sensors. Each may
    be a list; the study runs the Cartesian product.

    ``None`` for ``p_shallow``, ``patch_rank_s`` and ``eig_sig`` means the
    derived default (``round(7/27 * p)``, ``ceil(0.3 * k)``, ``l + k``).
    """
    sinr_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    sbnr_db: list = field(default_factory=lambda: [0.0])
    smnr_db: list = field(default_factory=lambda: [10.0])
    n_sensors: int = 128
    l: int = 13
    k: int = 27
    p: int = 27
    p_shallow: int = None
    n_runs: int = 100
    n_trials: int = 100
    samples_per_trial: int = 1000
    mvar_order: int = 6
    mask_fraction: float = 0.8
    patch_rank_s: int = None
    eig_sig: int = None
    perturb_shift_m: float = 0.005
    perturb_angle_rad: float = math.pi / 32
    filter_roster: list = field(default_factory=lambda: list(DEFAULT_ROSTER))
    master_seed: int = 0
    head_radius: float = 0.09
    conductivity: float = 0.33
    cortical_depth: list = field(default_factory=lambda: [0.5, 0.75])
    shallow_depth: list = field(default_factory=lambda: [0.7, 0.85])
    deep_depth: list = field(default_factory=lambda: [0.1, 0.4])
    n_freqs: int = 64
    diagonal_loading: float = 0.0
    q_source: str = "estimated"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.sinr_db = _as_list(self.sinr_db)
        self.sbnr_db = _as_list(self.sbnr_db)
        self.smnr_db = _as_list(self.smnr_db)
        self.filter_roster = [FilterKind(k).value for k in self.filter_roster]
        if not self.filter_roster:
            raise ConfigError("filter_roster must not be empty")
        if self.samples_per_trial % 2:
            raise ConfigError("samples_per_trial must be even")
        if self.n_sensors <= self.l + self.k:
            raise ConfigError("n_sensors must exceed l + k")
        if self.p_shallow is not None and self.p_shallow > self.p:
            raise ConfigError("p_shallow cannot exceed p")
        if self.patch_rank_s is not None and self.patch_rank_s > self.k:
            raise ConfigError("patch_rank_s cannot exceed k")
        if self.eig_sig is not None and self.eig_sig > self.n_sensors:
            raise ConfigError("eig_sig cannot exceed n_sensors")

    @property
    def resolved_p_shallow(self):
        if self.p_shallow is not None:
            return self.p_shallow
        return int(math.floor(7 / 27 * self.p + 0.5))

    @property
    def resolved_patch_rank(self):
        if self.patch_rank_s is not None:
            return self.patch_rank_s
        return max(1, math.ceil(0.3 * self.k)) if self.k else None

    @property
    def resolved_eig_sig(self):
        return self.eig_sig if self.eig_sig is not None else self.l + self.k

    def snr_points(self):
        """(sinr, sbnr, smnr) triples in sweep order."""
        return [(a, b, c) for a in self.sinr_db for b in self.sbnr_db for c in self.smnr_db]

    def to_dict(self):
        return asdict(self)

    def resolved(self):
        d = self.to_dict()
        d["p_shallow"] = self.resolved_p_shallow
        d["patch_rank_s"] = self.resolved_patch_rank
        d["eig_sig"] = self.resolved_eig_sig
        return d

    def override(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def validate_dict(d):
    """Schema-check a raw config mapping; raise :class:`ConfigError`."""
    try:
        jsonschema.validate(d, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


def config_from_dict(d):
    validate_dict(d)
    names = {f.name for f in fields(ExperimentConfig)}
    return ExperimentConfig(**{k: v for k, v in d.items() if k in names})


def load_config(path):
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(d)


def shipped_config(name="default"):
    """One of the configs bundled with the package (``default`` or ``demo``)."""
    text = resources.files("mvpure.configs").joinpath(f"{name}.json").read_text()
    return config_from_dict(json.loads(text))


def shipped_config_path(name="default"):
    return resources.files("mvpure.configs").joinpath(f"{name}.json")
