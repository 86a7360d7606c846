import math
import os

from django.conf import settings
from rest_framework import serializers

from . import constants

TASKS = ('eigen', 'dipoles', 'reflectance', 'fit', 'raman', 'bell', 'autler', 'shots')


class FiniteFloatField(serializers.FloatField):
    default_error_messages = {'not_finite': 'A finite number is required.'}

    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        if not math.isfinite(value):
            self.fail('not_finite')
        return value


class StrictSerializer(serializers.Serializer):
    """Serializer rejecting keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


def _rate(default):
    return FiniteFloatField(min_value=0.0, default=default)


class MoleculeParamsSerializer(StrictSerializer):
    omega1_hz = FiniteFloatField(min_value=0.0, default=constants.OMEGA_HZ)
    omega2_hz = FiniteFloatField(min_value=0.0, default=constants.OMEGA_HZ)
    alpha1_hz = FiniteFloatField(default=constants.ALPHA_HZ)
    alpha2_hz = FiniteFloatField(default=constants.ALPHA_HZ)
    g_hz = FiniteFloatField(min_value=0.0, default=constants.G_HZ)
    n_levels = serializers.IntegerField(min_value=2, max_value=12, default=constants.N_LEVELS)


class PortCouplingsSerializer(StrictSerializer):
    gamma_s_hz = _rate(constants.GAMMA_S_HZ)
    gamma_a_hz = _rate(constants.GAMMA_A_HZ)
    gamma_s_cross_hz = _rate(constants.GAMMA_S_CROSS_HZ)
    gamma_a_cross_hz = _rate(constants.GAMMA_A_CROSS_HZ)
    gamma_phi_s_hz = _rate(constants.GAMMA_PHI_S_HZ)
    gamma_phi_a_hz = _rate(constants.GAMMA_PHI_A_HZ)


class EigenOptionsSerializer(StrictSerializer):
    pass


class DipolesOptionsSerializer(StrictSerializer):
    convention = serializers.ChoiceField(choices=['normalized', 'unnormalized'], default='normalized')


class _ProbedResonanceSerializer(StrictSerializer):
    state = serializers.ChoiceField(choices=['s', 'a'], default='a')
    port = serializers.ChoiceField(choices=list(constants.PORTS), allow_null=True, default=None)
    span_hz = FiniteFloatField(min_value=0.0, default=3e6)
    points = serializers.IntegerField(min_value=3, default=401)

    def validate_span_hz(self, value):
        if value <= 0:
            raise serializers.ValidationError('Span must be greater than 0')
        return value

    def validate(self, attrs):
        if attrs.get('port') is None:
            attrs['port'] = 'S' if attrs['state'] == 's' else 'A'
        return attrs


class ReflectanceOptionsSerializer(_ProbedResonanceSerializer):
    amplitudes_hz = serializers.ListField(
        child=FiniteFloatField(min_value=0.0), min_length=1, default=lambda: [0.0, 0.1e6, 0.22e6, 0.5e6])


class FitOptionsSerializer(_ProbedResonanceSerializer):
    state = serializers.ChoiceField(choices=['s', 'a'], default='s')
    span_hz = FiniteFloatField(min_value=0.0, default=8e6)
    amplitudes = serializers.ListField(
        child=FiniteFloatField(min_value=0.0), min_length=2, default=lambda: [0.25, 0.5, 1.0, 2.0, 4.0])
    scale_hz = FiniteFloatField(min_value=0.0, default=0.5e6)
    snr_db = FiniteFloatField(allow_null=True, default=30.0)
    fit_dephasing = serializers.BooleanField(default=False)
    fit_scale = serializers.BooleanField(default=True)
    data_file = serializers.CharField(allow_null=True, default=None)

    def validate_amplitudes(self, value):
        if len(set(value)) < 2:
            raise serializers.ValidationError('At least two distinct amplitudes are required')
        return value

    def validate_data_file(self, value):
        if value is not None and not os.path.isfile(value):
            raise serializers.ValidationError(f'File does not exist: {value}')
        return value


class RamanOptionsSerializer(StrictSerializer):
    delta_hz = FiniteFloatField(default=constants.RAMAN_DELTA_HZ)
    rabi_min_hz = FiniteFloatField(min_value=0.0, default=1e6)
    rabi_max_hz = FiniteFloatField(min_value=0.0, default=30e6)
    rabi_points = serializers.IntegerField(min_value=1, default=59)
    probe_min_hz = FiniteFloatField(default=-4e6)
    probe_max_hz = FiniteFloatField(default=1e6)
    probe_points = serializers.IntegerField(min_value=1, default=501)
    driven = serializers.ChoiceField(choices=['s', 'a'], default='s')

    def validate_delta_hz(self, value):
        if value == 0:
            raise serializers.ValidationError('delta must be nonzero')
        return value

    def validate(self, attrs):
        if attrs['rabi_max_hz'] < attrs['rabi_min_hz']:
            raise serializers.ValidationError({'rabi_max_hz': ['Must be >= rabi_min_hz']})
        if attrs['probe_max_hz'] <= attrs['probe_min_hz']:
            raise serializers.ValidationError({'probe_max_hz': ['Must be > probe_min_hz']})
        return attrs


class _EmissionSerializer(StrictSerializer):
    with_pi2 = serializers.BooleanField(default=True)
    window_s = FiniteFloatField(min_value=0.0, default=constants.ACQUISITION_WINDOW_S)
    time_points = serializers.IntegerField(min_value=3, default=1001)
    normalization = serializers.ChoiceField(choices=['none', 'efficiency'], default='none')

    def validate_window_s(self, value):
        if value <= 0:
            raise serializers.ValidationError('Acquisition window must be greater than 0')
        return value


class BellOptionsSerializer(_EmissionSerializer):
    theta_start = FiniteFloatField(default=0.0)
    theta_stop = FiniteFloatField(default=2 * math.pi)
    theta_points = serializers.IntegerField(min_value=1, default=17)


class ShotsOptionsSerializer(_EmissionSerializer):
    theta = FiniteFloatField(default=math.pi)
    noise_photons = FiniteFloatField(min_value=0.0, default=10.0)
    n_shots = serializers.IntegerField(min_value=1, default=1_000_000)


class AutlerOptionsSerializer(StrictSerializer):
    pump_rabi_hz = serializers.ListField(
        child=FiniteFloatField(min_value=0.0), min_length=1, default=lambda: [constants.AUTLER_TOWNES_EXAMPLE_HZ])
    pump_detuning_hz = FiniteFloatField(default=0.0)
    probe_points = serializers.IntegerField(min_value=5, default=1201)
    mirrored = serializers.BooleanField(default=False)


TASK_OPTIONS = {
    'eigen': EigenOptionsSerializer,
    'dipoles': DipolesOptionsSerializer,
    'reflectance': ReflectanceOptionsSerializer,
    'fit': FitOptionsSerializer,
    'raman': RamanOptionsSerializer,
    'bell': BellOptionsSerializer,
    'autler': AutlerOptionsSerializer,
    'shots': ShotsOptionsSerializer,
}


class RunConfigSerializer(StrictSerializer):
    """
    Whole run configuration. Frequencies and rates are cyclic (Hz);
    missing sections are filled from the canonical parameter set.
    """
    task = serializers.ChoiceField(choices=list(TASKS))
    seed = serializers.IntegerField(min_value=0, default=0)
    output_dir = serializers.CharField(allow_null=True, default=None)
    workers = serializers.IntegerField(min_value=1, default=lambda: settings.SIM_DEFAULT_WORKERS)
    tolerance = FiniteFloatField(min_value=0.0, default=lambda: settings.SIM_DEFAULT_TOLERANCE)
    molecule = MoleculeParamsSerializer()
    couplings = PortCouplingsSerializer()
    options = serializers.DictField()

    def to_internal_value(self, data):
        if isinstance(data, dict):
            data = dict(data)
            for section in ('molecule', 'couplings', 'options'):
                if data.get(section) is None:
                    data[section] = {}
        return super().to_internal_value(data)

    def validate_tolerance(self, value):
        if value <= 0:
            raise serializers.ValidationError('Tolerance must be greater than 0')
        return value

    def validate(self, attrs):
        options = TASK_OPTIONS[attrs['task']](data=attrs['options'])
        if not options.is_valid():
            raise serializers.ValidationError({'options': options.errors})
        attrs['options'] = dict(options.validated_data)
        return attrs


# Report serializers

class EigenstateSerializer(serializers.Serializer):
    label = serializers.CharField()
    energy_hz = serializers.FloatField()
    manifold = serializers.IntegerField()
    symmetry = serializers.CharField()
    parity = serializers.FloatField()


class TransitionSerializer(serializers.Serializer):
    lower = serializers.CharField()
    upper = serializers.CharField()
    port = serializers.CharField()
    frequency_hz = serializers.FloatField()
    amplitude = serializers.FloatField()


class ReflectanceModelSerializer(serializers.Serializer):
    mode_freq = serializers.FloatField()
    gamma = serializers.FloatField()
    gamma_prime = serializers.FloatField()
    gamma_phi = serializers.FloatField()
    scale = serializers.FloatField()


class FitResultSerializer(serializers.Serializer):
    parameters = ReflectanceModelSerializer()
    residual_norm = serializers.FloatField()
    errors = serializers.DictField(child=serializers.FloatField())
    converged = serializers.BooleanField()
    iterations = serializers.IntegerField()
    free_parameters = serializers.ListField(child=serializers.CharField())
    rank_deficient = serializers.BooleanField()


class EmittedFileSerializer(serializers.Serializer):
    name = serializers.CharField()
    sha256 = serializers.CharField()
    size = serializers.IntegerField()


class RunManifestSerializer(serializers.Serializer):
    task = serializers.CharField()
    figure = serializers.CharField(allow_null=True)
    version = serializers.CharField()
    seed = serializers.IntegerField()
    duration_s = serializers.FloatField()
    config = serializers.DictField()
    files = EmittedFileSerializer(many=True)
