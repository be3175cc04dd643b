import json
from pathlib import Path

from django.core.management.base import CommandError

from core.checkpoint import CheckpointError, load_checkpoint
from core.management.commands._base import ConfigCommand
from cala.evaluation import evaluate
from cala.network import CalaNetwork
from retrieval.metrics import format_table
from retrieval.synth import DatasetError, read_jsonl


def write_report(report, base):
    """Write <base>.json (fractions) and <base>.txt (percent table)."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    with base.with_suffix('.json').open('w', encoding='utf-8') as fh:
        json.dump(report, fh, indent=2)
    with base.with_suffix('.txt').open('w', encoding='utf-8') as fh:
        fh.write(format_table(report) + '\n')


class Command(ConfigCommand):
    """Score the validation split through the query-target path."""
    help = 'Evaluate a checkpoint with Recall@K and subset recall.'

    def handle(self, *args, **options):
        config = self.load_config(options)
        try:
            records = read_jsonl(Path(config.data_dir) / 'val.jsonl')
        except DatasetError as exc:
            raise CommandError(str(exc))

        network = CalaNetwork(config)
        try:
            load_checkpoint(network.store, config.checkpoint)
        except (OSError, CheckpointError) as exc:
            raise CommandError(f'Cannot load checkpoint: {exc}')

        try:
            _, report = evaluate(network, records, config.workers)
        except ValueError as exc:
            raise CommandError(str(exc))
        try:
            write_report(report, config.report)
        except OSError as exc:
            raise CommandError(f'Cannot write report: {exc}')

        self.stdout.write(format_table(report))
        self.stdout.write(
            self.style.SUCCESS(f'Report written to {config.report}.json'))
