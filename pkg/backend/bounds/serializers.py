from rest_framework import serializers

from .conf import bounds_setting

ACTION_NAME = r'^[A-Za-z_][A-Za-z0-9_-]*$'


def _positive(value, label):
    if not value > 0:
        raise serializers.ValidationError(f"{label} must be positive")
    return value


class BoxSerializer(serializers.Serializer):
    lo = serializers.ListField(child=serializers.FloatField(), min_length=1, max_length=8)
    hi = serializers.ListField(child=serializers.FloatField(), min_length=1, max_length=8)

    def validate(self, attrs):
        if len(attrs['lo']) != len(attrs['hi']):
            raise serializers.ValidationError("lo and hi must have the same length")
        if any(a > b for a, b in zip(attrs['lo'], attrs['hi'])):
            raise serializers.ValidationError("lo must not exceed hi on any axis")
        return attrs


class ActionSpecSerializer(serializers.Serializer):
    name = serializers.RegexField(ACTION_NAME, max_length=64)
    drift = serializers.ListField(child=serializers.FloatField(), min_length=1, max_length=8)
    noise_half_width = serializers.FloatField()
    cost = serializers.FloatField(min_value=0.0)

    def validate_noise_half_width(self, value):
        return _positive(value, "noise_half_width")


class WalkerModelSerializer(serializers.Serializer):
    """Validates a walker model document (see docs/FORMATS.md)."""

    name = serializers.CharField(max_length=100, default='walker')
    domain = BoxSerializer()
    goal = BoxSerializer()
    failure = BoxSerializer()
    failure_penalty = serializers.FloatField(min_value=0.0, default=10.0)
    actions = ActionSpecSerializer(many=True, allow_empty=False)

    def validate(self, attrs):
        dimension = len(attrs['domain']['lo'])
        for key in ('goal', 'failure'):
            box = attrs[key]
            if len(box['lo']) != dimension:
                raise serializers.ValidationError({key: f"must have dimension {dimension}"})
            if any(a < d for a, d in zip(box['lo'], attrs['domain']['lo'])) or \
               any(b > d for b, d in zip(box['hi'], attrs['domain']['hi'])):
                raise serializers.ValidationError({key: "must lie inside the domain"})
        names = [a['name'] for a in attrs['actions']]
        if len(set(names)) != len(names):
            raise serializers.ValidationError({'actions': "action names must be unique"})
        if any(len(a['drift']) != dimension for a in attrs['actions']):
            raise serializers.ValidationError({'actions': f"every drift must have dimension {dimension}"})
        return attrs


class RunConfigSerializer(serializers.Serializer):
    """Experiment configuration; absent values fall back to ``settings.IMDP_BOUNDS``."""

    model = serializers.CharField()
    widths = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    mode = serializers.ChoiceField(choices=['interval', 'candidates'], default='interval')
    samples_per_axis = serializers.IntegerField(min_value=1, required=False)
    tol = serializers.FloatField(required=False)
    max_iter = serializers.IntegerField(min_value=1, required=False)
    divergence_cap = serializers.FloatField(required=False)
    mc_runs = serializers.IntegerField(min_value=1, required=False)
    mc_horizon = serializers.IntegerField(min_value=1, required=False)
    mc_seed = serializers.IntegerField(min_value=0, required=False)
    mc_probes = serializers.IntegerField(min_value=0, required=False)
    bounded_horizon_steps = serializers.IntegerField(min_value=1, required=False)
    section_times = serializers.ListField(child=serializers.FloatField(), required=False)
    threads = serializers.IntegerField(min_value=1, required=False)
    output_dir = serializers.CharField(required=False)
    external = serializers.CharField(required=False, allow_null=True, default=None)

    defaults = {
        'widths': 'WIDTHS', 'samples_per_axis': 'SAMPLES_PER_AXIS', 'tol': 'VI_TOL',
        'max_iter': 'VI_MAX_ITER', 'divergence_cap': 'DIVERGENCE_CAP', 'mc_runs': 'MC_RUNS',
        'mc_horizon': 'MC_HORIZON', 'mc_seed': 'MC_SEED', 'mc_probes': 'MC_PROBES',
        'bounded_horizon_steps': 'BOUNDED_HORIZON_STEPS', 'section_times': 'SECTION_TIMES',
        'threads': 'THREADS', 'output_dir': 'OUTPUT_DIR',
    }

    def validate_widths(self, value):
        for w in value:
            _positive(w, "every width")
        for coarse, fine in zip(value, value[1:]):
            ratio = coarse / fine
            if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise serializers.ValidationError(f"width {fine} does not subdivide width {coarse}")
        return value

    def validate_tol(self, value):
        return _positive(value, "tol")

    def validate_divergence_cap(self, value):
        return _positive(value, "divergence_cap")

    def validate(self, attrs):
        for key, setting in self.defaults.items():
            if attrs.get(key) is None:
                attrs[key] = bounds_setting(setting)
        return attrs


class ExternalRegionSerializer(serializers.Serializer):
    """One row of an external strategy file: a box, an action and an optional learned cost."""

    lo = serializers.ListField(child=serializers.FloatField(), min_length=1, max_length=8)
    hi = serializers.ListField(child=serializers.FloatField(), min_length=1, max_length=8)
    action = serializers.CharField(max_length=64)
    value = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        if len(attrs['lo']) != len(attrs['hi']):
            raise serializers.ValidationError("lo and hi columns must have the same length")
        if any(a >= b for a, b in zip(attrs['lo'], attrs['hi'])):
            raise serializers.ValidationError("region must have positive extent on every axis")
        return attrs
