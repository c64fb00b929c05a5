########################################################################
## IMPORTS
########################################################################
import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import List, Optional

from ..Errors import ConfigError

logger = logging.getLogger(__name__)

########################################################################
## EXPERIMENTS AND SEARCH PATH
########################################################################
EXPERIMENTS = (
    "int-eq",
    "kernel-id",
    "commutator",
    "diff-eq",
    "asymptotics",
    "fourier-gamma",
    "l2-eigen",
    "hr-eigen",
    "mu-asymptotic",
)
QUADRATURE_EXPERIMENTS = ("int-eq", "commutator")
SWEEP_AXES = ("xi", "lambda", "u-gap", "grid-refinement", "tau")

# first file found wins when no --config is given
CONFIG_SEARCH_PATH = ("experiment.json", "json/experiment.json", "jsonconfigs/experiment.json")
TEMPLATE_PATH = os.path.join(os.path.dirname(__file__), "experiment.json")

# names accepted in config files besides the field names
FIELD_ALIASES = {
    "lambda": "lam",
    "ShowLogs": "show_logs",
    "wall-guard": "wall_guard",
    "fd-order": "fd_order",
}


########################################################################
## EXPERIMENT CONFIG
########################################################################
@dataclass
class ExperimentConfig:
    '''
    One experiment run. ``lam`` is the coupling lambda = g/hbar; ``u`` and
    ``t`` left as None are filled in by the experiment (defaults or seeded
    random draws).
    '''
    experiment: str
    N: int = 2
    lam: float = 1.5
    u: Optional[List[float]] = None
    xi: float = 0.0
    xi2: float = 1.1
    t: Optional[List[float]] = None
    v: Optional[List[float]] = None
    tau: Optional[List[float]] = None
    hbar: float = 1.0
    mu: float = 1.0
    panels: Optional[int] = None
    order: int = 10
    R: Optional[float] = None
    wall_guard: float = 0.0
    margin: float = 12.0
    degree: int = 64
    tol: float = 1e-6
    h: float = 1e-3
    fd_order: int = 2
    samples: int = 10
    refine: bool = True
    threads: int = 1
    seed: int = 0
    json: Optional[str] = None
    csv: Optional[str] = None
    plot: Optional[str] = None
    show_logs: bool = False
    verbose: bool = False

    @property
    def exploratory(self):
        # below lambda = 1 residuals are reported without judgement
        return self.lam < 1.0

    def to_dict(self):
        return asdict(self)

    def replace(self, **changes):
        return replace(self, **changes)


EXPERIMENT_DEFAULTS = {
    "int-eq": {"N": 2, "lam": 2.5, "u": [0.8, -0.8], "xi": 0.3, "t": [-3.0, 3.0], "tol": 1e-4, "order": 10},
    "kernel-id": {"N": 2, "lam": 2.0, "tol": 1e-6, "h": 1e-3, "fd_order": 4, "samples": 10},
    "commutator": {"N": 2, "lam": 1.5, "xi": 0.4, "xi2": 1.1, "t": [-1.0, 1.0], "R": 16.0, "panels": 6,
                   "order": 10, "margin": 12.0, "tol": 1e-4},
    "diff-eq": {"N": 2, "lam": 1.7, "xi": 0.4, "tol": 1e-10, "samples": 10},
    "asymptotics": {"N": 3, "lam": 1.5, "u": [0.9, 0.1, -1.0], "degree": 32},
    "fourier-gamma": {"N": 1, "lam": 2.0, "tol": 1e-9},
    "l2-eigen": {"N": 3, "lam": 1.5, "u": [0.9, 0.1, -1.0], "t": [-3.0, 0.0, 3.0], "tol": 1e-5, "h": 1e-2,
                 "fd_order": 4},
    "hr-eigen": {"N": 2, "lam": 2.5, "u": [1.1, -0.5], "t": [-0.5, 1.5], "tol": 1e-5, "h": 1e-2, "fd_order": 4,
                 "samples": 20},
    "mu-asymptotic": {"N": 2, "lam": 1.5, "u": [0.6, -0.4], "xi": 0.3, "t": [-1.0, 2.0], "tol": 1e-8},
}

_FLOAT_FIELDS = ("lam", "xi", "xi2", "hbar", "mu", "R", "wall_guard", "margin", "tol", "h")
_INT_FIELDS = ("N", "panels", "order", "degree", "fd_order", "samples", "threads", "seed")
_BOOL_FIELDS = ("refine", "show_logs", "verbose")
_LIST_FIELDS = ("u", "t", "v", "tau")
_PATH_FIELDS = ("json", "csv", "plot")


########################################################################
## FILE READERS
########################################################################
def find_default_config(cwd=None):
    '''The first config file of CONFIG_SEARCH_PATH present in cwd, or None.'''
    cwd = os.getcwd() if cwd is None else cwd
    for candidate in CONFIG_SEARCH_PATH:
        path = os.path.join(cwd, candidate)
        if os.path.isfile(path):
            return path
    return None


def _parse_scalar(text):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", "null", ""):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_flat_config(text):
    '''
    Flat "key = value" config: one assignment per line, # starts a
    comment, comma separated values become lists ([..] brackets optional).
    '''
    data = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d is not a 'key = value' assignment: %r" % (number, raw.strip()))
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("line %d has an empty key" % number)
        if value.startswith("[") and value.endswith("]"):
            value = value[1:-1]
            data[key] = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        elif "," in value:
            data[key] = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        else:
            data[key] = _parse_scalar(value)
    return data


def read_config_file(path):
    if not os.path.isfile(path):
        raise ConfigError("Error loading your config files : '" + str(path) + "' does not exist")
    with open(path) as handle:
        text = handle.read()
    if path.endswith(".json"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as error:
            raise ConfigError("Error loading your config files : '%s' is not valid JSON (%s)" % (path, error))
    return parse_flat_config(text)


def section_for(data, experiment):
    '''
    Settings of one experiment from a parsed file: top-level keys, then the
    matching entry of an "Experiments" map on top.
    '''
    if not isinstance(data, dict):
        raise ConfigError("a config file must hold an object of settings")
    merged = {k: v for k, v in data.items() if k != "Experiments"}
    experiments = data.get("Experiments", {})
    if not isinstance(experiments, dict):
        raise ConfigError("'Experiments' must map experiment names to settings", field="Experiments")
    section = experiments.get(experiment, {})
    if not isinstance(section, dict):
        raise ConfigError("settings must be an object", field="Experiments." + experiment)
    merged.update(section)
    return merged


########################################################################
## COERCION AND VALIDATION
########################################################################
def _coerce(name, value):
    if value is None:
        return None
    try:
        if name in _FLOAT_FIELDS:
            return float(value)
        if name in _INT_FIELDS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if name in _BOOL_FIELDS:
            if isinstance(value, str):
                parsed = _parse_scalar(value)
                if not isinstance(parsed, bool):
                    raise ValueError(value)
                return parsed
            return bool(value)
        if name in _LIST_FIELDS:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            return [float(v) for v in value]
        if name in _PATH_FIELDS or name == "experiment":
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError("cannot read %r as a value of this field" % (value,), field=name)
    return value


def _normalise_keys(data):
    known = {f.name for f in fields(ExperimentConfig)}
    settings = {}
    for key, value in data.items():
        name = FIELD_ALIASES.get(key, key.replace("-", "_"))
        if name not in known:
            raise ConfigError("unknown setting", field=key)
        settings[name] = _coerce(name, value)
    return settings


def validate(config):
    '''Field-level checks; raises ConfigError naming the first offending field.'''
    if config.experiment not in EXPERIMENTS:
        raise ConfigError("unknown experiment '%s', expected one of %s" % (config.experiment, ", ".join(EXPERIMENTS)),
                          field="experiment")
    if config.experiment in QUADRATURE_EXPERIMENTS and config.N not in (1, 2, 3):
        raise ConfigError("quadrature experiments need N in {1, 2, 3}, got %d" % config.N, field="N")
    if config.N < 1:
        raise ConfigError("N must be >= 1, got %d" % config.N, field="N")
    if not config.lam > 0:
        raise ConfigError("lambda must be positive, got %g" % config.lam, field="lambda")
    for name in ("u", "t"):
        value = getattr(config, name)
        if value is not None and len(value) != config.N:
            raise ConfigError("expected %d values for N = %d, got %d" % (config.N, config.N, len(value)), field=name)
    if config.panels is not None and config.panels < 1:
        raise ConfigError("panels must be >= 1, got %d" % config.panels, field="panels")
    if not 4 <= config.order <= 16:
        raise ConfigError("order must lie in 4..16, got %d" % config.order, field="order")
    for name in ("tol", "h", "hbar", "mu"):
        if not getattr(config, name) > 0:
            raise ConfigError("must be positive, got %g" % getattr(config, name), field=name)
    if config.R is not None and not config.R > 0:
        raise ConfigError("must be positive, got %g" % config.R, field="R")
    if config.wall_guard < 0:
        raise ConfigError("must be nonnegative, got %g" % config.wall_guard, field="wall_guard")
    if config.fd_order not in (2, 4):
        raise ConfigError("finite-difference order must be 2 or 4, got %d" % config.fd_order, field="fd_order")
    if config.degree < 0:
        raise ConfigError("must be nonnegative, got %d" % config.degree, field="degree")
    if config.samples < 0:
        raise ConfigError("must be nonnegative, got %d" % config.samples, field="samples")
    if config.threads < 1:
        raise ConfigError("threads must be >= 1, got %d" % config.threads, field="threads")
    return config


########################################################################
## LOAD
########################################################################
def load_config(experiment, files=(), overrides=None, cwd=None):
    '''
    Defaults, then the experiment defaults, then config files (the
    auto-discovered one when ``files`` is empty), then ``overrides``.
    '''
    if experiment not in EXPERIMENTS:
        raise ConfigError("unknown experiment '%s', expected one of %s" % (experiment, ", ".join(EXPERIMENTS)),
                          field="experiment")
    defaults = dict(EXPERIMENT_DEFAULTS[experiment])

    files = list(files or ())
    if not files:
        found = find_default_config(cwd)
        if found is not None:
            logger.info("using config file %s", found)
            files = [found]
    explicit = {}
    for path in files:
        explicit.update(_normalise_keys(section_for(read_config_file(path), experiment)))
    if overrides:
        explicit.update(_normalise_keys({k: v for k, v in overrides.items() if v is not None}))

    N = explicit.get("N", defaults.get("N", 2))
    if N != defaults.get("N"):
        # default vectors belong to the default N
        defaults.pop("u", None)
        defaults.pop("t", None)
    if experiment == "int-eq" and N == 3:
        defaults.update(wall_guard=0.1, order=6, tol=1e-3)
    if experiment == "commutator" and N == 1:
        # plane-wave check: the truncation error at the margin must sit below 1e-8
        defaults.update(lam=2.0, R=40.0, margin=20.0, panels=None)
    if experiment == "commutator" and N == 3:
        defaults.update(order=6, panels=2, refine=False)

    settings = dict(defaults)
    settings.update(explicit)
    settings["experiment"] = experiment
    return validate(ExperimentConfig(**settings))
