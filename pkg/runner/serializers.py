import math
from collections.abc import Mapping
from typing import Any, Dict

from django.conf import settings
from rest_framework import serializers

from dynamics.monte_carlo import MIN_SAMPLES
from dynamics.response import KINDS as RESPONSE_KINDS
from geometry.spacetimes import CHRISTOFFEL_MODES
from inverse.problem import TARGET_MODES
from chsh_scan.perturbations import MIN_DRAWS

SPACETIME_KINDS = ('minkowski', 'weak-field', 'product-sphere', 'custom')
OUTPUT_FORMATS = ('json', 'csv')
SIEVE_POSETS = ('algebras', 'dag')


def default_theta_ab():
    return [0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2]


def angle_list(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), **kwargs)


def point_list(length: int, **kwargs):
    return serializers.ListField(child=serializers.FloatField(), min_length=length, max_length=length, **kwargs)


def flatten_errors(errors: Any, prefix: str = '') -> Dict[str, str]:
    """Nested serializer errors as {'scenario.tau_E': 'message'}."""
    flat: Dict[str, str] = {}
    if isinstance(errors, Mapping):
        for key, value in errors.items():
            path = prefix if key == 'non_field_errors' else (f"{prefix}.{key}" if prefix else str(key))
            flat.update(flatten_errors(value, path))
    elif isinstance(errors, (list, tuple)):
        if errors and all(isinstance(item, str) for item in errors):
            flat[prefix or 'config'] = ' '.join(str(item) for item in errors)
        else:
            for index, value in enumerate(errors):
                flat.update(flatten_errors(value, f"{prefix}.{index}" if prefix else str(index)))
    else:
        flat[prefix or 'config'] = str(errors)
    return flat


class StrictSerializer(serializers.Serializer):
    """Rejects keys it does not declare."""

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields)) if isinstance(data, Mapping) else []
        errors = {key: ["Unknown key."] for key in unknown}
        try:
            value = super().to_internal_value(data)
        except serializers.ValidationError as exc:
            if not errors:
                raise
            detail = exc.detail if isinstance(exc.detail, Mapping) else {'non_field_errors': exc.detail}
            raise serializers.ValidationError({**detail, **errors})
        if errors:
            raise serializers.ValidationError(errors)
        return value


class SpacetimeSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=SPACETIME_KINDS, default='minkowski')
    mass = serializers.FloatField(required=False, min_value=0.0)
    r_min = serializers.FloatField(required=False)
    center = point_list(3, required=False)
    radius = serializers.FloatField(required=False)
    grid_file = serializers.CharField(required=False)
    christoffel_mode = serializers.ChoiceField(choices=CHRISTOFFEL_MODES, default='closed-form')
    fd_step = serializers.FloatField(required=False, min_value=0.0)
    chart_bound = serializers.FloatField(required=False, min_value=0.0)

    def validate_r_min(self, value):
        if value <= 0.0:
            raise serializers.ValidationError("r_min must be positive")
        return value

    def validate_radius(self, value):
        if value <= 0.0:
            raise serializers.ValidationError("radius must be positive")
        return value

    def validate(self, data):
        kind = data['kind']
        if kind == 'weak-field':
            missing = [key for key in ('mass', 'r_min') if key not in data]
            if missing:
                raise serializers.ValidationError({key: ["Required for a weak-field spacetime."] for key in missing})
            if 2.0 * data['mass'] / data['r_min'] >= 1.0:
                raise serializers.ValidationError({'mass': ["2M/r_min must stay below 1."]})
        if kind == 'custom' and not data.get('grid_file'):
            raise serializers.ValidationError({'grid_file': ["Required for a custom spacetime."]})
        return data


class ScenarioSerializer(StrictSerializer):
    p_O = point_list(4, default=lambda: [0.0, 0.0, 0.0, 0.0])
    tau_E = serializers.FloatField()
    measurement_dirs_A = angle_list(min_length=1)
    measurement_dirs_B = angle_list(min_length=1)
    observer_speed = serializers.FloatField(default=0.5)
    d_O = point_list(4, required=False, allow_null=True)
    frame_rotation = serializers.FloatField(default=0.0)
    step = serializers.FloatField(required=False, allow_null=True)

    def validate_tau_E(self, value):
        if not (value > 0.0 and math.isfinite(value)):
            raise serializers.ValidationError("tau_E must be a positive proper time")
        return value

    def validate_observer_speed(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("observer_speed must lie in (0, 1)")
        return value

    def validate_step(self, value):
        if value is not None and value <= 0.0:
            raise serializers.ValidationError("step must be positive")
        return value


class ResponseSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=RESPONSE_KINDS, default='malus-classical')
    table = angle_list(required=False, min_length=8)

    def validate(self, data):
        if data['kind'] == 'custom-table' and 'table' not in data:
            raise serializers.ValidationError({'table': ["A custom-table response needs its table."]})
        return data


class DynamicsSerializer(StrictSerializer):
    theta_ab = angle_list(default=default_theta_ab, min_length=1)
    theta_v_bins = serializers.IntegerField(default=64, min_value=8)
    psi_bins = serializers.IntegerField(default=64)
    nodes = serializers.IntegerField(required=False)
    mc_samples = serializers.IntegerField(default=0, min_value=0)
    response = ResponseSerializer(required=False)

    def validate_psi_bins(self, value):
        if value < settings.QUADRATURE_MIN_NODES:
            raise serializers.ValidationError(f"psi_bins must be at least {settings.QUADRATURE_MIN_NODES}")
        return value

    def validate_nodes(self, value):
        if value < settings.QUADRATURE_MIN_NODES:
            raise serializers.ValidationError(f"nodes must be at least {settings.QUADRATURE_MIN_NODES}")
        return value

    def validate_mc_samples(self, value):
        if 0 < value < MIN_SAMPLES:
            raise serializers.ValidationError(f"Monte Carlo needs at least {MIN_SAMPLES} samples (or 0 to skip)")
        return value


class InverseSerializer(StrictSerializer):
    mode = serializers.ChoiceField(choices=TARGET_MODES, default='directions')
    size = serializers.IntegerField(required=False, min_value=1)
    targets = angle_list(required=False, min_length=1)
    bins = serializers.IntegerField(required=False, min_value=8)
    regularization = serializers.FloatField(default=0.0, min_value=0.0)
    max_iter = serializers.IntegerField(required=False, min_value=1)
    tol = serializers.FloatField(required=False, min_value=0.0)
    maximize_chsh = serializers.BooleanField(default=False)
    chsh_restarts = serializers.IntegerField(default=8, min_value=1)

    def validate(self, data):
        if data['mode'] == 'dense' and 'size' not in data:
            raise serializers.ValidationError({'size': ["A dense target grid needs its size."]})
        if data['mode'] == 'explicit' and 'targets' not in data:
            raise serializers.ValidationError({'targets': ["Explicit mode needs target angles."]})
        return data


class PerturbationSerializer(StrictSerializer):
    amplitude = serializers.FloatField(default=0.0, min_value=0.0)
    position_jitter = serializers.FloatField(default=0.0, min_value=0.0)
    n_draws = serializers.IntegerField(default=MIN_DRAWS, min_value=MIN_DRAWS)
    r_min = serializers.FloatField(required=False, allow_null=True)
    center = point_list(3, required=False, allow_null=True)


class SweepSerializer(StrictSerializer):
    parameter = serializers.CharField(required=False, allow_null=True)
    values = angle_list(default=list)
    chsh_angles = point_list(4, required=False, allow_null=True)
    perturbation = PerturbationSerializer(required=False, allow_null=True)

    def validate(self, data):
        if data.get('parameter') and not data['values']:
            raise serializers.ValidationError({'values': ["A swept parameter needs a non-empty grid."]})
        if data['values'] and not data.get('parameter'):
            raise serializers.ValidationError({'parameter': ["Grid values need a parameter to vary."]})
        return data


class MeasurementSerializer(StrictSerializer):
    p0 = serializers.CharField()
    region = serializers.ListField(child=serializers.CharField(), min_length=1)
    p1 = serializers.CharField()
    p2 = serializers.CharField()
    devices = serializers.ListField(child=serializers.CharField(), min_length=2, max_length=2, required=False)


class WorldviewsSerializer(StrictSerializer):
    dag_file = serializers.CharField()
    cap = serializers.IntegerField(required=False, min_value=1)
    sieve_poset = serializers.ChoiceField(choices=SIEVE_POSETS, default='algebras')
    measurement = MeasurementSerializer(required=False)


class OutputSerializer(StrictSerializer):
    directory = serializers.CharField(default='out')
    formats = serializers.ListField(child=serializers.ChoiceField(choices=OUTPUT_FORMATS),
                                    default=lambda: list(OUTPUT_FORMATS), min_length=1)


class RunConfigSerializer(StrictSerializer):
    seed = serializers.IntegerField(required=False, allow_null=True, min_value=0)
    threads = serializers.IntegerField(required=False, min_value=1)
    spacetime = SpacetimeSerializer(required=False)
    scenario = ScenarioSerializer(required=False)
    dynamics = DynamicsSerializer(required=False)
    inverse = InverseSerializer(required=False)
    sweep = SweepSerializer(required=False)
    worldviews = WorldviewsSerializer(required=False)
    output = OutputSerializer(required=False)

    def validate(self, data):
        mc_requested = data.get('dynamics', {}).get('mc_samples', 0) > 0
        perturbed = bool(data.get('sweep', {}).get('perturbation'))
        if (mc_requested or perturbed) and data.get('seed') is None and settings.MC_REQUIRE_SEED:
            raise serializers.ValidationError({'seed': ["Monte Carlo and perturbation runs need a seed."]})
        return data
