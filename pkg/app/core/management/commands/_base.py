from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from core.config import load_config, parse_overrides


class ConfigCommand(BaseCommand):
    """Base for commands driven by a RunConfig."""

    def add_arguments(self, parser):
        parser.add_argument(
            '--config', default=None,
            help='JSON file with configuration keys.',
        )
        parser.add_argument(
            '--set', dest='overrides', action='append', default=[],
            metavar='KEY=VALUE',
            help='Override one configuration key; repeatable.',
        )

    def load_config(self, options):
        try:
            return load_config(options.get('config'),
                               parse_overrides(options.get('overrides')))
        except serializers.ValidationError as exc:
            raise CommandError(f'Invalid configuration: {exc.detail}')
        except (OSError, ValueError) as exc:
            raise CommandError(f'Cannot read configuration: {exc}')
