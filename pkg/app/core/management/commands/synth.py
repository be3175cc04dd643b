from pathlib import Path

from django.core.management.base import CommandError

from core.management.commands._base import ConfigCommand
from retrieval.synth import SynthSpec, generate, write_jsonl


class Command(ConfigCommand):
    """Write the synthetic train/val triplet files."""
    help = 'Generate the synthetic triplet benchmark as JSON Lines files.'

    def handle(self, *args, **options):
        config = self.load_config(options)
        try:
            train, val = generate(SynthSpec.from_config(config))
        except ValueError as exc:
            raise CommandError(f'Invalid synthetic spec: {exc}')

        data_dir = Path(config.data_dir)
        try:
            write_jsonl(data_dir / 'train.jsonl', train)
            write_jsonl(data_dir / 'val.jsonl', val)
        except OSError as exc:
            raise CommandError(f'Cannot write dataset: {exc}')

        self.stdout.write(f'train: {len(train)} records')
        self.stdout.write(f'val: {len(val)} records')
        self.stdout.write(self.style.SUCCESS(f'Dataset written to {data_dir}'))
