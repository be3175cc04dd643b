"""Run configuration: settings defaults <- JSON file <- `--set` overrides."""
import dataclasses
import json
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

ATTENTIVE = 'attentive'
PURE = 'pure'


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Validated, immutable configuration of one run."""
    dim: int
    image_vocab: int
    text_vocab: int
    max_tokens: int
    prompts: int
    tac_layers: int
    heads: int
    positional: bool
    image_positional: bool
    cross_attention: bool
    alpha: float
    beta: float
    tau: float
    batch_size: int
    epochs: int
    learning_rate: float
    seed: int
    share_text_projection: bool
    share_tac_branches: bool
    reference_features: str
    disable_tbia: bool
    disable_ctr: bool
    n_train: int
    n_val: int
    n_attributes: int
    objects: int
    text_len: int
    noise_sigma: float
    subset_size: int
    workers: int
    data_dir: str
    checkpoint: str
    report: str
    train_log: str

    def updated(self, **changes):
        """Return a re-validated copy with `changes` applied."""
        data = dump_config(self)
        data.update(changes)
        return parse_config(data)

    @property
    def effective_alpha(self):
        return 0.0 if self.disable_tbia else self.alpha

    @property
    def effective_beta(self):
        return 0.0 if self.disable_ctr else self.beta


class RunConfigSerializer(serializers.Serializer):
    """Serializer for run configuration documents."""
    dim = serializers.IntegerField(min_value=1)
    image_vocab = serializers.IntegerField(min_value=1)
    text_vocab = serializers.IntegerField(min_value=1)
    max_tokens = serializers.IntegerField(min_value=1)
    prompts = serializers.IntegerField(min_value=0)
    tac_layers = serializers.IntegerField(min_value=1)
    heads = serializers.IntegerField(min_value=1)
    positional = serializers.BooleanField()
    image_positional = serializers.BooleanField()
    cross_attention = serializers.BooleanField()

    alpha = serializers.FloatField(min_value=0.0)
    beta = serializers.FloatField(min_value=0.0)
    tau = serializers.FloatField()

    batch_size = serializers.IntegerField(min_value=1)
    epochs = serializers.IntegerField(min_value=0)
    learning_rate = serializers.FloatField()
    seed = serializers.IntegerField(min_value=0)

    share_text_projection = serializers.BooleanField()
    share_tac_branches = serializers.BooleanField()
    reference_features = serializers.ChoiceField(choices=[ATTENTIVE, PURE])
    disable_tbia = serializers.BooleanField()
    disable_ctr = serializers.BooleanField()

    n_train = serializers.IntegerField(min_value=1)
    n_val = serializers.IntegerField(min_value=1)
    n_attributes = serializers.IntegerField(min_value=1)
    objects = serializers.IntegerField(min_value=1)
    text_len = serializers.IntegerField(min_value=1)
    noise_sigma = serializers.FloatField(min_value=0.0)
    subset_size = serializers.IntegerField(min_value=1)

    workers = serializers.IntegerField(min_value=1)

    data_dir = serializers.CharField()
    checkpoint = serializers.CharField()
    report = serializers.CharField()
    train_log = serializers.CharField()

    def to_internal_value(self, data):
        """Reject keys the configuration does not define."""
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError(
                {key: ['Unknown configuration key.'] for key in unknown}
            )
        return super().to_internal_value(data)

    def validate_tau(self, value):
        if value <= 0:
            raise serializers.ValidationError('tau must be positive.')
        return value

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError(
                'learning_rate must be positive.')
        return value

    def validate(self, attrs):
        if attrs['dim'] % attrs['heads']:
            raise serializers.ValidationError(
                {'heads': ['heads must divide dim.']}
            )
        # targets hold one object more than references
        lengths = {'objects': attrs['objects'] + 1,
                   'text_len': attrs['text_len']}
        for key, length in lengths.items():
            if length > attrs['max_tokens']:
                raise serializers.ValidationError(
                    {key: ['Sequences would exceed max_tokens.']}
                )
        if attrs['objects'] >= attrs['n_attributes']:
            raise serializers.ValidationError(
                {'objects': ['objects must be below n_attributes.']}
            )
        return attrs

    def create(self, validated_data):
        return RunConfig(**validated_data)


def parse_config(data):
    """Validate a complete configuration mapping into a RunConfig."""
    serializer = RunConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def dump_config(config):
    return dict(RunConfigSerializer(config).data)


def parse_overrides(pairs):
    """Turn ['key=value', ...] into a dict; values stay strings."""
    overrides = {}
    for pair in pairs or ():
        key, sep, value = pair.partition('=')
        if not sep or not key.strip():
            raise serializers.ValidationError(
                f'Override {pair!r} is not of the form key=value.'
            )
        overrides[key.strip()] = value.strip()
    return overrides


def load_config(path=None, overrides=None):
    """Merge settings defaults, an optional JSON file and overrides."""
    data = dict(settings.CALA_DEFAULTS)
    if path:
        with Path(path).open(encoding='utf-8') as fh:
            document = json.load(fh)
        if not isinstance(document, dict):
            raise serializers.ValidationError(
                'Configuration file must hold a JSON object.'
            )
        data.update(document)
    data.update(overrides or {})
    return parse_config(data)


def save_config(config, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as fh:
        json.dump(dump_config(config), fh, indent=2)


def config_path_for(checkpoint):
    """Where the resolved config of a checkpoint is kept."""
    return Path(checkpoint).with_suffix('.config.json')
