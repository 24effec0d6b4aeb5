"""
Validation of command options and the shape of the JSON every command
prints. Options arrive as strings from the command line or as Python
values from call_command; both go through the same fields.
"""
import math

from rest_framework import serializers

from dagrid.circular import CircularConfig
from dagrid.conf import dagrid_settings
from dagrid.exceptions import InvalidArgument
from dagrid.gradcheck import GRADIENT_SUITES
from dagrid.io import PhantomKind
from dagrid.kernels import KernelKind
from dagrid.polar import FilterKind, GridFilter, PolarConfig


class IntegerListField(serializers.ListField):
    """Accepts "15,10,5" as well as [15, 10, 5]."""
    child = serializers.IntegerField(min_value=1)

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        elif isinstance(data, int):
            data = [data]
        return super().to_internal_value(data)


class FloatListField(serializers.ListField):
    child = serializers.FloatField()

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [item.strip() for item in data.split(',') if item.strip()]
        elif isinstance(data, (int, float)):
            data = [data]
        return super().to_internal_value(data)


def phantom_errors(kind, data, height, width, center=None):
    """Field errors for a phantom that `synth` would refuse."""
    errors = {}
    if kind == PhantomKind.RING:
        if not data['radius'] > 0:
            errors['radius'] = 'Ring radius must be > 0.'
        if not data['thickness'] > 0:
            errors['thickness'] = 'Ring thickness must be > 0.'
    if kind == PhantomKind.SMOOTH_BLOB and any(s <= 0 for s in data['sigmas']):
        errors['sigmas'] = 'Sigmas must be > 0.'
    if center is not None and not (0 <= center[0] <= height - 1 and 0 <= center[1] <= width - 1):
        errors['center'] = f'Center must lie inside the {height}x{width} image.'
    return errors


class RunConfigSerializer(serializers.Serializer):
    threads = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, default=0)
    metrics_out = serializers.CharField(required=False, allow_null=True, default=None)


class SourceSerializer(RunConfigSerializer):
    """An input image: a PGM/DGT file or a generated phantom."""
    in_path = serializers.CharField(required=False, allow_null=True, default=None)
    phantom = serializers.ChoiceField(choices=PhantomKind.choices, required=False,
                                      allow_null=True, default=None)
    size = serializers.IntegerField(min_value=1, default=64)
    radius = serializers.FloatField(min_value=0, default=8.0)
    thickness = serializers.FloatField(min_value=0, default=2.0)
    cell = serializers.IntegerField(min_value=1, default=8)
    sigmas = FloatListField(default=[8.0])
    noise = serializers.FloatField(min_value=0, default=0.0)

    def validate(self, data):
        if (data.get('in_path') is None) == (data.get('phantom') is None):
            raise serializers.ValidationError('Give exactly one of --in and --phantom.')
        if any(s <= 0 for s in data['sigmas']):
            raise serializers.ValidationError({'sigmas': 'Sigmas must be > 0.'})
        if data.get('phantom') is not None:
            errors = phantom_errors(data['phantom'], data, data['size'], data['size'])
            if errors:
                raise serializers.ValidationError(errors)
        return data


class PolarOptionsSerializer(SourceSerializer):
    hr = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    wpsi = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    s_r = serializers.FloatField(required=False, allow_null=True, default=None)
    s_theta = serializers.FloatField(required=False, allow_null=True, default=None)
    center = serializers.CharField(default='geometric')
    kernel = serializers.ChoiceField(choices=KernelKind.choices, default=KernelKind.BILINEAR)
    angular_wrap = serializers.BooleanField(default=True)
    cover_corners = serializers.BooleanField(default=False)
    epsilon = serializers.FloatField(required=False, allow_null=True, default=None)
    out = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_center(self, value):
        if value in ('geometric', 'mass'):
            return value
        try:
            row, col = (float(part) for part in value.split(','))
        except ValueError:
            raise serializers.ValidationError('Expected "geometric", "mass" or "row,col".')
        return (row, col)

    def validate_epsilon(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError('Epsilon must be > 0.')
        return value

    def validate_s_r(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError('Radial rate must be > 0.')
        return value

    def validate_s_theta(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError('Angular rate must be > 0.')
        return value

    def validate(self, data):
        data = super().validate(data)
        w_psi = data['wpsi'] or dagrid_settings.POLAR_SIZE
        if data['s_theta'] and data['angular_wrap'] and data['s_theta'] * w_psi < 2 * math.pi - 1e-9:
            raise serializers.ValidationError(
                {'s_theta': 'With angular wrap, s_theta × wpsi must cover 2π.'})
        return data

    def polar_config(self, image):
        """PolarConfig for the validated options and the loaded image."""
        data = self.validated_data
        center = data['center']
        height, width = image.shape[-2:]
        return PolarConfig.for_image(
            height, width, h_r=data['hr'], w_psi=data['wpsi'],
            center=None if center == 'geometric' else center,
            angular_wrap=data['angular_wrap'], cover_corners=data['cover_corners'], image=image,
            s_r=data['s_r'], s_theta=data['s_theta'])


class FilterOptionsSerializer(PolarOptionsSerializer):
    filter = serializers.ChoiceField(choices=FilterKind.choices, default=FilterKind.NONE)
    filter_radius = serializers.IntegerField(min_value=0, default=1)
    filter_sigma = serializers.FloatField(default=1.0)

    def validate_filter_sigma(self, value):
        if not value > 0:
            raise serializers.ValidationError('Sigma must be > 0.')
        return value

    def grid_filter(self):
        data = self.validated_data
        return GridFilter(data['filter'], data['filter_radius'], data['filter_sigma'])


class PolarRoundtripSerializer(FilterOptionsSerializer):
    slicing = serializers.ChoiceField(choices=['bilinear', 'parametric'], default='bilinear')
    fit_steps = serializers.IntegerField(min_value=0, default=50)
    learning_rate = serializers.FloatField(default=0.25)

    def validate_learning_rate(self, value):
        if not 0 < value <= 0.25:
            raise serializers.ValidationError('Learning rate must be in (0, 0.25].')
        return value

    def validate(self, data):
        data = super().validate(data)
        if data['slicing'] == 'parametric' and data['kernel'] != KernelKind.BILINEAR:
            raise serializers.ValidationError('Parametric slicing starts from the bilinear kernel.')
        if data['slicing'] == 'parametric' and data['filter'] != FilterKind.NONE:
            raise serializers.ValidationError('Parametric slicing is fitted without a grid filter.')
        return data


class PolarFilterSerializer(FilterOptionsSerializer):
    filter = serializers.ChoiceField(choices=FilterKind.choices, default=FilterKind.GAUSSIAN)
    polar_out = serializers.CharField(required=False, allow_null=True, default=None)


class PolarSampleSerializer(PolarOptionsSerializer):
    with_accumulator = serializers.BooleanField(default=False)


class CircleDetectSerializer(RunConfigSerializer):
    in_path = serializers.CharField(required=False, allow_null=True, default=None)
    ring = serializers.FloatField(required=False, allow_null=True, default=None)
    disk = serializers.FloatField(required=False, allow_null=True, default=None)
    size = serializers.IntegerField(min_value=3, default=64)
    thickness = serializers.FloatField(default=2.0)
    noise = serializers.FloatField(min_value=0, default=0.0)
    radii = IntegerListField(required=False, allow_null=True, default=None)
    # unset: one-directional for ring phantoms, symmetric otherwise
    symmetric = serializers.BooleanField(required=False, allow_null=True, default=None)
    shell = serializers.BooleanField(default=True)
    flip = serializers.BooleanField(default=False)
    kernel = serializers.ChoiceField(choices=KernelKind.choices, default=KernelKind.BILINEAR)
    epsilon = serializers.FloatField(required=False, allow_null=True, default=None)
    band = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    accumulator_out = serializers.CharField(required=False, allow_null=True, default=None)

    def validate(self, data):
        sources = [key for key in ('in_path', 'ring', 'disk') if data.get(key) is not None]
        if len(sources) != 1:
            raise serializers.ValidationError('Give exactly one of --in, --ring and --disk.')
        for key in ('ring', 'disk'):
            if data.get(key) is not None and not data[key] > 0:
                raise serializers.ValidationError({key: 'Radius must be > 0.'})
        if not data['thickness'] > 0:
            raise serializers.ValidationError({'thickness': 'Thickness must be > 0.'})
        if data['symmetric'] is None:
            # both edges of a thin ring reach the center at k = r, from opposite sides
            data['symmetric'] = data.get('ring') is None
        if data['radii'] is None:
            radius = data.get('ring') or data.get('disk')
            data['radii'] = [round(radius)] if radius else list(dagrid_settings.CIRCULAR_RADII)
        try:
            data['config'] = CircularConfig(
                radii=tuple(data['radii']), symmetric=data['symmetric'], epsilon=data['epsilon'],
                kernel=data['kernel'], shell=data['shell'], flip=data['flip'])
        except InvalidArgument as exc:
            raise serializers.ValidationError({'radii': exc.detail})
        return data


class GradcheckSerializer(RunConfigSerializer):
    op = serializers.ChoiceField(choices=sorted(GRADIENT_SUITES) + ['all'])
    kernel = serializers.ChoiceField(choices=KernelKind.choices, default=KernelKind.BILINEAR)
    trials = serializers.IntegerField(min_value=1, default=20)
    tol = serializers.FloatField(default=1e-6)
    h = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_tol(self, value):
        if not value > 0:
            raise serializers.ValidationError('Tolerance must be > 0.')
        return value

    def validate_h(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError('Step must be > 0.')
        return value


class AdjointSuiteSerializer(RunConfigSerializer):
    instances = serializers.IntegerField(min_value=1, default=100)
    tol = serializers.FloatField(default=1e-10)
    max_size = serializers.IntegerField(min_value=1, max_value=512, default=64)

    def validate_tol(self, value):
        if not value > 0:
            raise serializers.ValidationError('Tolerance must be > 0.')
        return value


class BenchSerializer(RunConfigSerializer):
    sizes = IntegerListField(default=[64, 224, 512])
    workers = IntegerListField(default=[1, 2, 4])
    repeats = serializers.IntegerField(min_value=1, default=1)


class SynthSerializer(RunConfigSerializer):
    kind = serializers.ChoiceField(choices=PhantomKind.choices)
    size = serializers.IntegerField(min_value=1, default=64)
    height = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    width = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    center = serializers.CharField(required=False, allow_null=True, default=None)
    radius = serializers.FloatField(min_value=0, default=8.0)
    thickness = serializers.FloatField(default=2.0)
    cell = serializers.IntegerField(min_value=1, default=8)
    sigmas = FloatListField(default=[8.0])
    noise = serializers.FloatField(min_value=0, default=0.0)
    out = serializers.CharField()

    def validate_center(self, value):
        if value is None:
            return None
        try:
            row, col = (float(part) for part in value.split(','))
        except ValueError:
            raise serializers.ValidationError('Expected "row,col".')
        return (row, col)

    def validate(self, data):
        data['height'] = data['height'] or data['size']
        data['width'] = data['width'] or data['size']
        errors = phantom_errors(data['kind'], data, data['height'], data['width'], data['center'])
        if errors:
            raise serializers.ValidationError(errors)
        return data


# Results

class RoundtripResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    shape = serializers.ListField(child=serializers.IntegerField())
    polar_shape = serializers.ListField(child=serializers.IntegerField())
    mse = serializers.FloatField()
    psnr = serializers.FloatField(allow_null=True)
    pixels = serializers.IntegerField()
    slicing = serializers.CharField()
    filter = serializers.CharField()
    fit_loss = serializers.ListField(child=serializers.FloatField(), required=False)
    out = serializers.CharField(allow_null=True)


class SampleResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    shape = serializers.ListField(child=serializers.IntegerField())
    checksum = serializers.CharField()
    mean = serializers.FloatField()
    out = serializers.CharField(allow_null=True)


class CircleResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    center = serializers.ListField(child=serializers.IntegerField())
    score = serializers.FloatField()
    radii = serializers.ListField(child=serializers.IntegerField())
    bands = serializers.ListField(child=serializers.ListField(child=serializers.IntegerField()))
    band = serializers.IntegerField(allow_null=True)
    symmetric = serializers.BooleanField()


class GradReportSerializer(serializers.Serializer):
    op_name = serializers.CharField()
    max_abs_err = serializers.FloatField()
    max_rel_err = serializers.FloatField()
    worst_index = serializers.ListField(child=serializers.IntegerField())
    passed = serializers.BooleanField()
    tolerance = serializers.FloatField()


class GradcheckResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    kernel = serializers.CharField()
    trials = serializers.IntegerField()
    passed = serializers.BooleanField()
    reports = GradReportSerializer(many=True)


class AdjointResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    instances = serializers.IntegerField()
    max_rel_err = serializers.FloatField()
    tolerance = serializers.FloatField()
    passed = serializers.BooleanField()


class BenchRunSerializer(serializers.Serializer):
    op = serializers.CharField()
    size = serializers.IntegerField()
    workers = serializers.IntegerField()
    seconds = serializers.FloatField()
    checksum = serializers.CharField()


class BenchResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    runs = BenchRunSerializer(many=True)
    consistent = serializers.BooleanField()


class SynthResultSerializer(serializers.Serializer):
    command = serializers.CharField()
    kind = serializers.CharField()
    shape = serializers.ListField(child=serializers.IntegerField())
    checksum = serializers.CharField()
    out = serializers.CharField()
