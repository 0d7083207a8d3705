"""Experiment configuration documents.

A configuration is a JSON object validated by the serializers below;
every field has a default, so ``{}`` is a complete desk-scale config.
"""
import json
from collections.abc import Mapping

from rest_framework import serializers

from .envs import ENV_NAMES, POINT_OMNI, make_env_spec
from .exceptions import ConfigError
from .loop import ABLATIONS, ALGORITHMS, DCG_ME, NO_ABLATION, ExperimentConfig
from .rl import Td3Config
from .variation import GaParams, PgParams


def _positive(value):
    if not value > 0:
        raise serializers.ValidationError('must be positive')
    return value


class StrictSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['unknown key'] for key in unknown})
        return super().to_internal_value(data)


class EnvSerializer(StrictSerializer):
    name = serializers.ChoiceField(choices=ENV_NAMES, default=POINT_OMNI)
    episode_length = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    action_bound = serializers.FloatField(default=1.0, validators=[_positive])
    dt = serializers.FloatField(default=0.01, validators=[_positive])
    energy_coef = serializers.FloatField(min_value=0.0, default=0.5)
    forward_reward_weight = serializers.FloatField(min_value=0.0, default=0.0)


class Td3Serializer(StrictSerializer):
    gamma = serializers.FloatField(default=0.99, min_value=0.0, max_value=1.0)
    actor_delay = serializers.IntegerField(min_value=1, default=2)
    tau = serializers.FloatField(default=0.005, max_value=1.0, validators=[_positive])
    smoothing_noise_sigma = serializers.FloatField(min_value=0.0, default=0.2)
    smoothing_noise_clip = serializers.FloatField(min_value=0.0, default=0.5)
    batch_size = serializers.IntegerField(min_value=1, default=100)
    training_steps = serializers.IntegerField(min_value=0, default=300)
    lengthscale = serializers.FloatField(default=0.008, validators=[_positive])
    actor_lr = serializers.FloatField(default=3e-4, validators=[_positive])
    critic_lr = serializers.FloatField(default=3e-4, validators=[_positive])
    buffer_capacity = serializers.IntegerField(min_value=1, default=1_000_000)


class GaSerializer(StrictSerializer):
    sigma1 = serializers.FloatField(min_value=0.0, default=0.005)
    sigma2 = serializers.FloatField(min_value=0.0, default=0.05)


class PgSerializer(StrictSerializer):
    gradient_steps = serializers.IntegerField(min_value=0, default=30)
    batch_size = serializers.IntegerField(min_value=1, default=100)
    policy_lr = serializers.FloatField(default=5e-3, validators=[_positive])


def _hidden_field(default):
    return serializers.ListField(
        child=serializers.IntegerField(min_value=1), default=lambda: list(default)
    )


class ExperimentConfigSerializer(StrictSerializer):
    nested = ('env', 'td3', 'ga', 'pg')

    algorithm = serializers.ChoiceField(choices=ALGORITHMS, default=DCG_ME)
    ablation = serializers.ChoiceField(choices=ABLATIONS, default=NO_ABLATION)
    seed = serializers.IntegerField(min_value=0, default=0)
    eval_budget = serializers.IntegerField(min_value=1, default=51_200)
    batch_size = serializers.IntegerField(min_value=1, default=256)
    ga_count = serializers.IntegerField(min_value=0, default=128)
    num_centroids = serializers.IntegerField(min_value=1, default=1024)
    descriptor_noise_sigma = serializers.FloatField(min_value=0.0, default=0.0004)
    count_actor_evaluations = serializers.BooleanField(default=False)
    policy_hidden = _hidden_field((128, 128))
    actor_hidden = _hidden_field((256, 256))
    critic_hidden = _hidden_field((256, 256))
    env = EnvSerializer()
    td3 = Td3Serializer()
    ga = GaSerializer()
    pg = PgSerializer()
    replications = serializers.IntegerField(min_value=1, default=1)
    output_dir = serializers.CharField(default='runs')
    log_every = serializers.IntegerField(min_value=1, default=1)
    checkpoint_every = serializers.IntegerField(min_value=0, default=0)
    reevaluations = serializers.IntegerField(min_value=1, default=1)

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            # Absent sections still go through their serializer to pick up defaults.
            data = {**{name: {} for name in self.nested}, **data}
        return super().to_internal_value(data)

    def validate(self, attrs):
        errors = {}
        if attrs['ga_count'] > attrs['batch_size']:
            errors['ga_count'] = (
                f"constraint g ≤ b violated: g={attrs['ga_count']}, b={attrs['batch_size']}"
            )
        if attrs['eval_budget'] < attrs['batch_size']:
            errors['eval_budget'] = (
                f"constraint I ≥ b violated: I={attrs['eval_budget']}, b={attrs['batch_size']}"
            )
        if attrs['ablation'] != NO_ABLATION and attrs['algorithm'] != DCG_ME:
            errors['ablation'] = f"ablation {attrs['ablation']!r} requires algorithm dcg_me"
        if errors:
            raise serializers.ValidationError(errors)
        return attrs

    def create(self, validated_data):
        data = dict(validated_data)
        try:
            return ExperimentConfig(
                env=make_env_spec(**data.pop('env')),
                td3=Td3Config(**data.pop('td3')),
                ga=GaParams(**data.pop('ga')),
                pg=PgParams(**data.pop('pg')),
                policy_hidden=tuple(data.pop('policy_hidden')),
                actor_hidden=tuple(data.pop('actor_hidden')),
                critic_hidden=tuple(data.pop('critic_hidden')),
                **data,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError({'non_field_errors': [str(exc)]}) from exc


def parse_config(text):
    """Parse and validate a JSON configuration document into an ExperimentConfig."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError({'document': [f'malformed JSON: {exc}']}) from exc
    if not isinstance(data, dict):
        raise ConfigError({'document': ['top level must be an object']})
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigError(serializer.errors)
    return serializer.save()


def emit_config(config):
    """Render ``config`` as JSON with every field explicit."""
    return json.dumps(ExperimentConfigSerializer(config).data, indent=2) + '\n'
