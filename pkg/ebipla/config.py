"""
    Experiment configuration: one JSON document parsed into nested dataclasses.

    Keys named "_comment" are ignored at any level; any other unknown key is
    rejected with its dotted path. resolve_config fills the step sizes and the
    seed / thread overrides, config_echo writes the resolved document back out.
"""
import copy
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional

from ebipla.data.gaussian import sample_gaussian_location
from ebipla.data.io import load_dataset
from ebipla.data.swiss_roll import SwissRollSpec, sample_swiss_roll
from ebipla.errors import ConfigurationError, SchemaError
from ebipla.model.base import LinearDecoder
from ebipla.model.testbeds import GaussianLocationModel, GaussianScaleModel, IdentityDecoder
from ebipla.nn.mlp import MlpEnergy, MlpSpec
from ebipla.trainer.config import Algorithm, RunConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COMMENT_KEY = '_comment'
THREADS_ENV = 'EBIPLA_THREADS'


class ModelKind(str, Enum):
    MLP = 'mlp'
    GAUSSIAN_LOCATION = 'gaussian_location'
    GAUSSIAN_SCALE = 'gaussian_scale'


class DecoderKind(str, Enum):
    LINEAR = 'linear'
    IDENTITY = 'identity'


class DataKind(str, Enum):
    SWISS_ROLL = 'swiss_roll'
    GAUSSIAN_LOCATION = 'gaussian_location'
    FILE = 'file'


@dataclass
class ModelSection:
    kind: ModelKind = ModelKind.MLP
    d_x: int = 2
    hidden: list = field(default_factory=lambda: [128, 128, 128])
    activation: str = 'silu'
    prior_var: float = 1.0

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        if self.d_x < 1:
            raise ConfigurationError('must be >= 1', 'model.d_x')


@dataclass
class DecoderSection:
    kind: DecoderKind = DecoderKind.LINEAR
    d_y: int = 2
    sigma: float = 1.0
    bias: bool = True

    def __post_init__(self):
        self.kind = DecoderKind(self.kind)
        if not self.sigma > 0:
            raise ConfigurationError(f'must be > 0, got {self.sigma}', 'decoder.sigma')


@dataclass
class DataSection:
    kind: DataKind = DataKind.SWISS_ROLL
    path: Optional[str] = None
    M: int = 10000
    t_min: float = 1.5 * math.pi
    t_max: float = 4.5 * math.pi
    noise_std: float = 0.1
    rotation_deg: float = 45.0
    mean: float = 0.0
    seed: int = 0
    reference_size: int = 1000
    reference_seed: int = 1

    def __post_init__(self):
        self.kind = DataKind(self.kind)
        if self.kind is DataKind.FILE and not self.path:
            raise ConfigurationError('a file dataset needs a path', 'data.path')
        if self.M < 1:
            raise ConfigurationError(f'must be >= 1, got {self.M}', 'data.M')

    def swiss_roll(self, M=None, seed=None):
        return SwissRollSpec(M=self.M if M is None else M, t_min=self.t_min, t_max=self.t_max,
                             noise_std=self.noise_std, rotation_deg=self.rotation_deg,
                             seed=self.seed if seed is None else seed)


@dataclass
class EvalSection:
    bandwidth: float = 0.1
    samples: int = 1000
    prior_steps: int = 500
    gamma: Optional[float] = None
    add_decoder_noise: bool = False
    map_restarts: int = 4
    map_iters: int = 50

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigurationError(f'must be > 0, got {self.bandwidth}', 'eval.bandwidth')
        if self.samples < 0:
            raise ConfigurationError('must be >= 0', 'eval.samples')


@dataclass
class SweepSection:
    '''
    grid: {dotted path: [values]}, expanded as a Cartesian product.
    overrides: [{"when": {path: value}, "set": {path: value}}], applied to every
    cell whose grid values match all of "when" (e.g. a per-algorithm activation).
    '''
    grid: dict = field(default_factory=dict)
    overrides: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    processes: int = 1

    def __post_init__(self):
        self.grid = {key: list(values) for key, values in self.grid.items() if key != COMMENT_KEY}
        for key, values in self.grid.items():
            if not values:
                raise ConfigurationError('empty value list', f'sweep.grid.{key}')
        rules = []
        for i, rule in enumerate(self.overrides):
            where = f'sweep.overrides[{i}]'
            if not isinstance(rule, dict):
                raise ConfigurationError('expected an object with "when" and "set"', where)
            rule = {key: value for key, value in rule.items() if key != COMMENT_KEY}
            if set(rule) != {'when', 'set'} or not isinstance(rule['when'], dict) or not isinstance(rule['set'], dict):
                raise ConfigurationError('expected an object with "when" and "set"', where)
            unknown = set(rule['when']) - set(self.grid)
            if unknown:
                raise ConfigurationError(f'"when" names paths outside the grid: {sorted(unknown)}', where)
            rules.append(rule)
        self.overrides = rules
        if not self.seeds:
            raise ConfigurationError('need at least one seed', 'sweep.seeds')
        if self.processes < 1:
            raise ConfigurationError('must be >= 1', 'sweep.processes')

    @property
    def cells(self):
        return math.prod(len(values) for values in self.grid.values())

    def cell_overrides(self, cell):
        '''Extra {path: value} settings for one grid cell; later rules win'''
        extra = {}
        for rule in self.overrides:
            if all(_same_value(cell.get(path), value) for path, value in rule['when'].items()):
                extra.update(rule['set'])
        return extra


def _same_value(a, b):
    # grid values may be enum members or their JSON strings
    return (a.value if isinstance(a, Enum) else a) == (b.value if isinstance(b, Enum) else b)


@dataclass
class VerifySection:
    n_values: list = field(default_factory=lambda: [1, 4, 16, 64])
    h_values: list = field(default_factory=lambda: [0.05, 0.1])
    seeds: int = 20
    iterations: int = 2000
    burn_in: int = 500
    rescaling_steps: int = 100
    rescaling_particles: int = 4
    zeta_j: list = field(default_factory=lambda: [5, 50, 200])
    zeta_replications: int = 10000
    zeta_gamma: float = 0.01
    zeta_a: float = 4.0
    zeta_d: int = 2

    def __post_init__(self):
        if not self.n_values or not self.h_values:
            raise ConfigurationError('need at least one N and one h', 'verify.n_values')
        if self.burn_in >= self.iterations:
            raise ConfigurationError(f'burn-in {self.burn_in} >= iterations {self.iterations}', 'verify.burn_in')
        if not self.zeta_a > 0:
            raise ConfigurationError('must be > 0', 'verify.zeta_a')


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    run: RunConfig = field(default_factory=RunConfig)
    model: ModelSection = field(default_factory=ModelSection)
    decoder: DecoderSection = field(default_factory=DecoderSection)
    data: DataSection = field(default_factory=DataSection)
    eval: EvalSection = field(default_factory=EvalSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    verify: VerifySection = field(default_factory=VerifySection)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise SchemaError(f'config schema_version {self.schema_version} is not supported '
                              f'(expected {SCHEMA_VERSION})')


def _from_dict(cls, raw, path):
    if not isinstance(raw, dict):
        raise ConfigurationError(f'expected an object, got {type(raw).__name__}', path or 'config')
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key == COMMENT_KEY:
            continue
        where = f'{path}.{key}' if path else key
        if key not in known:
            raise ConfigurationError('unknown key', where)
        if is_dataclass(known[key].type) and value is not None:
            value = _from_dict(known[key].type, value, where)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ConfigurationError, SchemaError):
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc), path or 'config') from exc


def config_from_dict(raw):
    return _from_dict(ExperimentConfig, copy.deepcopy(raw), '')


def load_config(source):
    '''Parses a JSON file (or an already-decoded mapping) into an ExperimentConfig'''
    if isinstance(source, dict):
        return config_from_dict(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f'cannot read config file {path}: {exc.strerror}', 'config') from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f'{path}: malformed JSON at line {exc.lineno} column {exc.colno}') from exc
    logger.debug('loaded config %s', path)
    return config_from_dict(raw)


def thread_count(flag=None, environ=None, configured=1):
    '''Precedence: explicit flag, then EBIPLA_THREADS, then the config value'''
    if flag is not None:
        return int(flag)
    environ = os.environ if environ is None else environ
    value = environ.get(THREADS_ENV)
    if value:
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigurationError(f'not an integer: {value!r}', THREADS_ENV) from exc
    return configured


def resolve_config(cfg, seed=None, threads=None, environ=None):
    '''Returns a copy with overrides applied, step sizes filled and capabilities checked'''
    run = replace(cfg.run, seed=cfg.run.seed if seed is None else int(seed),
                  threads=thread_count(threads, environ, cfg.run.threads))
    run = run.validate()
    if run.algorithm is Algorithm.FULL_EXACT and cfg.model.kind is ModelKind.MLP:
        raise ConfigurationError('full_exact needs an analytic prior expectation; the MLP energy has none',
                                 'run.algorithm')
    if cfg.decoder.kind is DecoderKind.IDENTITY and cfg.decoder.d_y != cfg.model.d_x:
        raise ConfigurationError(f'identity decoder needs d_y == d_x ({cfg.model.d_x})', 'decoder.d_y')
    evaluation = cfg.eval if cfg.eval.gamma is not None else replace(cfg.eval, gamma=run.gamma)
    return replace(cfg, run=run, eval=evaluation)


def config_to_dict(cfg):
    return json.loads(json.dumps(asdict(cfg)))


def config_echo(cfg):
    return json.dumps(asdict(cfg), sort_keys=True, indent=2) + '\n'


def with_override(cfg, dotted, value):
    '''Copy of cfg with the value at a dotted path replaced, re-validated through the loader'''
    raw = config_to_dict(cfg)
    node, keys = raw, dotted.split('.')
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigurationError('unknown key', dotted)
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigurationError('unknown key', dotted)
    node[keys[-1]] = value
    return config_from_dict(raw)


def build_model(cfg):
    section = cfg.model
    if section.kind is ModelKind.MLP:
        return MlpEnergy(MlpSpec([section.d_x, *section.hidden, 1], section.activation))
    if section.kind is ModelKind.GAUSSIAN_LOCATION:
        return GaussianLocationModel(section.d_x, section.prior_var)
    return GaussianScaleModel(section.d_x)


def build_decoder(cfg):
    section = cfg.decoder
    if section.kind is DecoderKind.IDENTITY:
        return IdentityDecoder(cfg.model.d_x, section.sigma)
    return LinearDecoder(cfg.model.d_x, section.d_y, section.sigma, section.bias)


def build_dataset(cfg):
    section = cfg.data
    if section.kind is DataKind.FILE:
        return load_dataset(section.path)
    if section.kind is DataKind.GAUSSIAN_LOCATION:
        return sample_gaussian_location(section.M, cfg.model.d_x, section.mean, cfg.model.prior_var,
                                        cfg.decoder.sigma ** 2, section.seed)
    return sample_swiss_roll(section.swiss_roll())


def build_reference(cfg):
    '''Held-out sample for MMD scoring; only synthetic Swiss roll data has one'''
    section = cfg.data
    if section.kind is not DataKind.SWISS_ROLL or section.reference_size < 2:
        return None
    return sample_swiss_roll(section.swiss_roll(M=section.reference_size, seed=section.reference_seed))


def gaussian_location_defaults():
    '''Testbed configuration used by verify-bound when no config file is given'''
    return ExperimentConfig(
        run=RunConfig(algorithm=Algorithm.FULL_EXACT, iterations=2000, num_particles=1, prior_steps=0, h=0.1,
                      gamma=0.1),
        model=ModelSection(kind=ModelKind.GAUSSIAN_LOCATION, d_x=1),
        decoder=DecoderSection(kind=DecoderKind.IDENTITY, d_y=1, sigma=1.0, bias=False),
        data=DataSection(kind=DataKind.GAUSSIAN_LOCATION, M=100, mean=1.0),
    )
