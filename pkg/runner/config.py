import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from chsh_scan.perturbations import PerturbationSpec
from chsh_scan.sweep import SweepSpec
from dynamics.response import ResponseFunction
from scenario.config import ExperimentConfig

from .exceptions import ConfigError
from .serializers import (
    DynamicsSerializer, OutputSerializer, RunConfigSerializer, SpacetimeSerializer, flatten_errors,
)

logger = logging.getLogger(__name__)

# file references inside a config resolve against the config's own directory
RELATIVE_PATHS = (('spacetime', 'grid_file'), ('worldviews', 'dag_file'))

DEFAULT_BLOCKS = {
    'spacetime': SpacetimeSerializer,
    'dynamics': DynamicsSerializer,
    'output': OutputSerializer,
}


def _block_defaults(serializer_class) -> Dict[str, Any]:
    serializer = serializer_class(data={})
    serializer.is_valid(raise_exception=True)
    return dict(serializer.validated_data)


def validate_config(payload: Any) -> Dict[str, Any]:
    serializer = RunConfigSerializer(data=payload)
    if not serializer.is_valid():
        fields = flatten_errors(serializer.errors)
        summary = '; '.join(f"{path}: {message}" for path, message in sorted(fields.items()))
        raise ConfigError(f"Invalid config: {summary}", fields)
    data = json.loads(json.dumps(serializer.validated_data))
    for block, serializer_class in DEFAULT_BLOCKS.items():
        if block not in data:
            data[block] = _block_defaults(serializer_class)
    return data


@dataclass
class RunConfig:
    data: Dict[str, Any]
    source: Optional[Path] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunConfig':
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}", {'config': f"line {e.lineno}: {e.msg}"})
        data = validate_config(payload)
        for block, key in RELATIVE_PATHS:
            if key in data.get(block, {}):
                data[block][key] = str(path.parent / Path(data[block][key]).expanduser())
        config = cls(data, source=path)
        logger.debug(f"Loaded config {path} with blocks {sorted(config.data)}")
        return config

    def override(self, seed: Optional[int] = None, out: Optional[str] = None, nodes: Optional[int] = None,
                 threads: Optional[int] = None) -> 'RunConfig':
        """Apply command-line flags on top of the validated config and re-validate."""
        data = json.loads(json.dumps(self.data))
        applied = {}
        if seed is not None:
            data['seed'] = applied['seed'] = seed
        if out is not None:
            data['output']['directory'] = applied['out'] = out
        if nodes is not None:
            data['dynamics']['nodes'] = applied['nodes'] = nodes
        if threads is not None:
            data['threads'] = applied['threads'] = threads
        return RunConfig(validate_config(data), source=self.source, overrides=applied)

    # blocks

    def require(self, block: str) -> Dict[str, Any]:
        if block not in self.data:
            raise ConfigError(f"This run needs a '{block}' block", {block: "Missing block."})
        return self.data[block]

    @property
    def seed(self) -> Optional[int]:
        return self.data.get('seed')

    @property
    def threads(self) -> Optional[int]:
        return self.data.get('threads')

    @property
    def spacetime(self) -> Dict[str, Any]:
        return self.data['spacetime']

    @property
    def dynamics(self) -> Dict[str, Any]:
        return self.data['dynamics']

    @property
    def output(self) -> Dict[str, Any]:
        return self.data['output']

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.require('scenario'))

    def response(self) -> ResponseFunction:
        block = self.dynamics.get('response') or {}
        return ResponseFunction(block.get('kind', 'malus-classical'), block.get('table'))

    def sweep_spec(self) -> SweepSpec:
        sweep = self.data.get('sweep', {})
        perturbation = sweep.get('perturbation')
        return SweepSpec(
            spacetime=self.spacetime,
            experiment=self.experiment(),
            parameter=sweep.get('parameter'),
            values=tuple(sweep.get('values', ())),
            chsh_angles=tuple(sweep['chsh_angles']) if sweep.get('chsh_angles') else None,
            theta_v_bins=self.dynamics['theta_v_bins'],
            psi_bins=self.dynamics['psi_bins'],
            nodes=self.dynamics.get('nodes'),
            mc_samples=self.dynamics['mc_samples'],
            seed=self.seed,
            perturbation=PerturbationSpec.from_dict(perturbation) if perturbation else None,
            threads=self.threads,
            response=self.response(),
        )

    def as_dict(self) -> Dict[str, Any]:
        return {**self.data, 'source': str(self.source) if self.source else None, 'overrides': self.overrides}
