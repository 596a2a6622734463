"""
Configuration Management Module

Run configurations for heisenmix: a defaults dictionary deep-merged with a JSON or YAML
file (JSON is read by the YAML loader), environment overrides for the output directory
and thread count, and validation into the typed objects the core modules take.
Validation errors are ConfigurationError with a dotted field name such as "params.s".
"""

import copy
import os
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .errors import ConfigurationError, DomainError
from .fields import Grid
from .fracsublap import OperatorParams, QuadratureSpec
from .functions import parse_function
from .hgroup import GaugeBall, GroupPoint, random_points
from .probes import get_suite_choices
from .solver import METHODS, DirichletProblem


DEFAULTS: Dict[str, Any] = {
    'params': {
        'alpha': 1.0,
        'beta': 1.0,
        'lambda': 1.0,
        'Lambda': 2.0,
        's': 0.5,
        'c_norm': 1.0,
        'N': 1,
    },
    'quadrature': {
        'inner_radius': 1e-3,
        'tail_radius': None,
        'annuli_per_decade': 4,
        'points_per_annulus': 8,
        'tail_tolerance': 1e-4,
        'polar_points': 16,
        'azimuth_points': 24,
    },
    'problem': {
        'center': None,
        'radius': 1.0,
        'f': 'const:0',
        'g': 'tanh_x:1',
    },
    'grid': {
        'shape': [33, 33, 65],
        'h_xy': None,
        'h_t': None,
    },
    'solver': {
        'tol': 1e-3,
        'max_iter': 20000,
        'method': 'policy',
        'quadrature': {
            'inner_radius': 1e-3,
            'tail_radius': None,
            'annuli_per_decade': 2,
            'points_per_annulus': 3,
            'tail_tolerance': 1e-3,
            'polar_points': 6,
            'azimuth_points': 8,
        },
    },
    'eval': {
        'function': 'gaussian_gauge',
        'points': [[0.0, 0.0, 0.0]],
        'random_points': 0,
        'scale': 1.0,
    },
    'barrier': {
        'R': 1.0,
        'target': -1.0,
        'C0': 1.0,
        'C_max': 1024.0,
        'bisection_steps': 6,
        'point': None,
    },
    'regularity': {
        'source': 'solve',
        'k_max': 4,
        'radius': 0.5,
        'center': None,
        'min_nodes': 8,
    },
    'bench': {
        'suites': get_suite_choices(),
    },
    'output_dir': 'runs',
    'threads': 1,
}

# Keys that change where or how fast a run happens, never what it computes
RUNTIME_KEYS = ('output_dir', 'threads')

_PARAM_FIELDS = {'alpha': 'alpha', 'beta': 'beta', 'lambda': 'lam', 'Lambda': 'Lam',
                 's': 's', 'c_norm': 'c_norm', 'N': 'N'}


def _merge(base: Dict[str, Any], updates: Dict[str, Any], path: str = "") -> Dict[str, Any]:
    """Recursive merge; keys missing from `base` are schema violations"""
    merged = copy.deepcopy(base)
    for key, value in updates.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(dotted, "unknown field")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(dotted, f"expected a mapping, got {type(value).__name__}")
            merged[key] = _merge(base[key], value, dotted + ".")
        else:
            merged[key] = value
    return merged


def _number(section: Dict[str, Any], key: str, field: str, integer: bool = False):
    value = section.get(key)
    if value is None or isinstance(value, bool):
        raise ConfigurationError(field, f"missing or invalid value {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(field, f"expected a number, got {value!r}")
    if integer:
        if not np.isfinite(number) or number != int(number):
            raise ConfigurationError(field, f"expected an integer, got {value!r}")
        return int(number)
    return number


def _point(value: Any, N: int, field: str) -> GroupPoint:
    if value is None:
        return GroupPoint.origin(N)
    try:
        point = GroupPoint.from_array(value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(field, str(e))
    if point.N != N:
        raise ConfigurationError(field, f"expected {2 * N + 1} coordinates for N = {N}, got {2 * point.N + 1}")
    return point


class Config:
    """Configuration management for heisenmix runs"""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None):
        self.config_path = config_path
        self.defaults = copy.deepcopy(DEFAULTS)
        self.config = self._load_config()
        if overrides:
            self.config = _merge(self.config, overrides)
        self._apply_environment()

    def _load_config(self) -> Dict[str, Any]:
        """Defaults merged with the config file, if one was given"""
        if self.config_path is None:
            return copy.deepcopy(self.defaults)
        if not os.path.exists(self.config_path):
            raise ConfigurationError('config', f"file not found: {self.config_path}")
        try:
            with open(self.config_path, 'r') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError('config', f"cannot parse {self.config_path}: {e}")
        if not isinstance(loaded, dict):
            raise ConfigurationError('config', "top level must be an object")
        return _merge(self.defaults, loaded)

    def _apply_environment(self) -> None:
        for key, value in get_environment_overrides().items():
            self.config[key] = value

    def get(self, key: str, default=None):
        """Value at a dotted key such as 'solver.tol'"""
        node: Any = self.config
        for part in key.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def update(self, updates: Dict[str, Any]) -> None:
        self.config = _merge(self.config, updates)

    def save(self, path: str) -> None:
        with open(path, 'w') as f:
            yaml.safe_dump(self.config, f, default_flow_style=False, sort_keys=True)

    def resolved(self) -> Dict[str, Any]:
        """Everything that determines results; embedded in output files"""
        return {k: copy.deepcopy(v) for k, v in self.config.items() if k not in RUNTIME_KEYS}

    def get_output_dir(self) -> str:
        return str(self.get('output_dir', 'runs'))

    def get_threads(self) -> int:
        threads = _number(self.config, 'threads', 'threads', integer=True)
        if threads < 1:
            raise ConfigurationError('threads', f"must be >= 1, got {threads}")
        return threads

    def params(self) -> OperatorParams:
        section = self.config['params']
        values = {attr: _number(section, key, f"params.{key}", integer=(key == 'N'))
                  for key, attr in _PARAM_FIELDS.items()}
        try:
            return OperatorParams(**values)
        except ConfigurationError as e:
            raise e.within('params')

    def quadrature(self, section: str = 'quadrature') -> QuadratureSpec:
        """QuadratureSpec from 'quadrature' or 'solver.quadrature'"""
        raw = self.get(section)
        values: Dict[str, Any] = {}
        for key in ('inner_radius', 'tail_tolerance'):
            values[key] = _number(raw, key, f"{section}.{key}")
        for key in ('annuli_per_decade', 'points_per_annulus', 'polar_points', 'azimuth_points'):
            values[key] = _number(raw, key, f"{section}.{key}", integer=True)
        if raw.get('tail_radius') is not None:
            values['tail_radius'] = _number(raw, 'tail_radius', f"{section}.tail_radius")
        params = self.params()
        try:
            spec = QuadratureSpec(**values)
            spec.resolved_tail_radius(params)
            return spec
        except ConfigurationError as e:
            raise e.within(section)

    def solver_quadrature(self) -> QuadratureSpec:
        return self.quadrature('solver.quadrature')

    def domain(self, params: Optional[OperatorParams] = None) -> GaugeBall:
        params = params or self.params()
        section = self.config['problem']
        center = _point(section.get('center'), params.N, 'problem.center')
        radius = _number(section, 'radius', 'problem.radius')
        if radius <= 0:
            raise ConfigurationError('problem.radius', f"must be > 0, got {radius}")
        return GaugeBall(center, radius)

    def problem(self) -> DirichletProblem:
        params = self.params()
        section = self.config['problem']
        f = parse_function(section.get('f'), 'problem.f')
        g = parse_function(section.get('g'), 'problem.g')
        try:
            return DirichletProblem(self.domain(params), f, g, params)
        except DomainError as e:
            raise ConfigurationError('problem.g', str(e))

    def grid(self, omega: GaugeBall) -> Grid:
        section = self.config['grid']
        try:
            if section.get('h_xy') is not None:
                h_xy = _number(section, 'h_xy', 'grid.h_xy')
                h_t = _number(section, 'h_t', 'grid.h_t') if section.get('h_t') is not None else None
                return Grid.covering(omega, h_xy, h_t)
            shape = section.get('shape')
            if not isinstance(shape, (list, tuple)):
                raise ConfigurationError('grid.shape', f"expected a list of node counts, got {shape!r}")
            if len(shape) != 2 * omega.N + 1:
                raise ConfigurationError('grid.shape', f"expected {2 * omega.N + 1} node counts, got {len(shape)}")
            counts = tuple(_number({'n': n}, 'n', 'grid.shape', integer=True) for n in shape)
            return Grid.from_shape(omega, counts)
        except DomainError as e:
            raise ConfigurationError('grid', str(e))

    def solver_settings(self) -> Dict[str, Any]:
        section = self.config['solver']
        tol = _number(section, 'tol', 'solver.tol')
        if tol <= 0:
            raise ConfigurationError('solver.tol', f"must be > 0, got {tol}")
        max_iter = _number(section, 'max_iter', 'solver.max_iter', integer=True)
        if max_iter < 0:
            raise ConfigurationError('solver.max_iter', f"must be >= 0, got {max_iter}")
        method = section.get('method')
        if method not in METHODS:
            raise ConfigurationError('solver.method', f"expected one of {', '.join(METHODS)}, got {method!r}")
        return {'tol': tol, 'max_iter': max_iter, 'method': method}

    def eval_points(self, N: int, seed: int = 0) -> np.ndarray:
        """Listed evaluation points followed by `random_points` uniform draws in [-scale, scale]"""
        section = self.config['eval']
        listed = section.get('points') or []
        if not isinstance(listed, list):
            raise ConfigurationError('eval.points', "expected a list of points")
        coords = [_point(p, N, f"eval.points[{i}]").to_array() for i, p in enumerate(listed)]
        count = _number(section, 'random_points', 'eval.random_points', integer=True)
        if count < 0:
            raise ConfigurationError('eval.random_points', f"must be >= 0, got {count}")
        scale = _number(section, 'scale', 'eval.scale')
        if count:
            coords.extend(random_points(np.random.default_rng(seed), count, N, scale))
        if not coords:
            raise ConfigurationError('eval.points', "no evaluation points given")
        return np.stack(coords)

    def barrier_settings(self) -> Dict[str, Any]:
        section = self.config['barrier']
        settings = {key: _number(section, key, f"barrier.{key}") for key in ('R', 'target', 'C0', 'C_max')}
        settings['bisection_steps'] = _number(section, 'bisection_steps', 'barrier.bisection_steps', integer=True)
        if settings['R'] <= 0:
            raise ConfigurationError('barrier.R', f"must be > 0, got {settings['R']}")
        if settings['C0'] <= 0 or settings['C_max'] < settings['C0']:
            raise ConfigurationError('barrier.C_max', "need 0 < C0 <= C_max")
        if settings['bisection_steps'] < 0:
            raise ConfigurationError('barrier.bisection_steps', "must be >= 0")
        settings['point'] = section.get('point')
        return settings

    def regularity_settings(self, N: int) -> Dict[str, Any]:
        section = self.config['regularity']
        source = section.get('source')
        if source != 'solve':
            parse_function(source, 'regularity.source')
        k_max = _number(section, 'k_max', 'regularity.k_max', integer=True)
        if k_max < 0:
            raise ConfigurationError('regularity.k_max', f"must be >= 0, got {k_max}")
        radius = _number(section, 'radius', 'regularity.radius')
        if radius <= 0:
            raise ConfigurationError('regularity.radius', f"must be > 0, got {radius}")
        min_nodes = _number(section, 'min_nodes', 'regularity.min_nodes', integer=True)
        if min_nodes < 2:
            raise ConfigurationError('regularity.min_nodes', f"must be >= 2, got {min_nodes}")
        return {
            'source': source,
            'k_max': k_max,
            'radius': radius,
            'center': _point(section.get('center'), N, 'regularity.center'),
            'min_nodes': min_nodes,
        }

    def bench_suites(self) -> List[str]:
        suites = self.get('bench.suites')
        if not isinstance(suites, list) or not suites:
            raise ConfigurationError('bench.suites', "expected a non-empty list of suite names")
        unknown = [s for s in suites if s not in get_suite_choices()]
        if unknown:
            raise ConfigurationError('bench.suites', f"unknown suite(s): {', '.join(map(str, unknown))}")
        return list(suites)

    def validate(self) -> None:
        """Check every section used by the commands"""
        params = self.params()
        self.quadrature()
        self.solver_quadrature()
        self.grid(self.domain(params))
        self.problem()
        self.solver_settings()
        self.eval_points(params.N)
        self.barrier_settings()
        self.regularity_settings(params.N)
        self.bench_suites()
        self.get_threads()


def load_project_config(config_path: Optional[str] = None) -> Config:
    """Load a run configuration from file (defaults when no path is given)"""
    return Config(config_path)


def get_environment_overrides() -> Dict[str, Any]:
    """HEISENMIX_* environment variable overrides"""
    overrides: Dict[str, Any] = {}
    env_vars = {
        'HEISENMIX_OUTPUT_DIR': 'output_dir',
        'HEISENMIX_THREADS': 'threads',
    }
    for env_var, config_key in env_vars.items():
        value = os.getenv(env_var)
        if value:
            overrides[config_key] = value
    return overrides
