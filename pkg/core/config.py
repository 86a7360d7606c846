"""
Run configuration: a JSON document validated by ``RunConfigSerializer``.
Values are kept in the cyclic units they were written in and converted
to angular units when the simulation objects are built.
"""
import dataclasses
import json
import logging
from dataclasses import dataclass, field

from rest_framework.renderers import JSONRenderer

from . import constants
from .exceptions import ConfigParseError, ConfigValidationError, OutputError
from .molecule import MoleculeParams
from .scattering import PortCouplings
from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    task: str
    seed: int = 0
    output_dir: str | None = None
    workers: int = 1
    tolerance: float = 1e-10
    molecule: dict = field(default_factory=dict)
    couplings: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def molecule_params(self):
        m = self.molecule
        return MoleculeParams(
            omega1=constants.to_angular(m['omega1_hz']),
            omega2=constants.to_angular(m['omega2_hz']),
            alpha1=constants.to_angular(m['alpha1_hz']),
            alpha2=constants.to_angular(m['alpha2_hz']),
            g=constants.to_angular(m['g_hz']),
            n_levels=m['n_levels'],
        )

    def port_couplings(self):
        c = self.couplings
        return PortCouplings(
            gamma_s=constants.to_angular(c['gamma_s_hz']),
            gamma_a=constants.to_angular(c['gamma_a_hz']),
            gamma_s_x=constants.to_angular(c['gamma_s_cross_hz']),
            gamma_a_x=constants.to_angular(c['gamma_a_cross_hz']),
            gamma_phi_s=constants.to_angular(c['gamma_phi_s_hz']),
            gamma_phi_a=constants.to_angular(c['gamma_phi_a_hz']),
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _plain(value):
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def parse_config(data):
    serializer = RunConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigValidationError(serializer.errors)
    return RunConfig(**_plain(dict(serializer.validated_data)))


def load_config(path):
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as exc:
        raise OutputError(f'Cannot read config {path}: {exc}') from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f'{path}: {exc.msg}', line=exc.lineno, column=exc.colno) from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f'{path}: top level must be an object', line=1, column=1)
    config = parse_config(data)
    logger.debug('Loaded %s config from %s', config.task, path)
    return config


def config_snapshot(config: RunConfig):
    return _plain(dict(RunConfigSerializer(config).data))


def serialize_config(config: RunConfig):
    return JSONRenderer().render(config_snapshot(config), renderer_context={'indent': 2}).decode('utf-8')


def default_config(task, **overrides):
    return parse_config({'task': task, **overrides})
