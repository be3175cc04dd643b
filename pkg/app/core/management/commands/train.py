from pathlib import Path

from django.core.management.base import CommandError

from core.autograd import NonFiniteError
from core.checkpoint import save_checkpoint
from core.config import config_path_for, save_config
from core.management.commands._base import ConfigCommand
from cala.network import CalaNetwork
from cala.trainer import train
from retrieval.synth import DatasetError, read_jsonl


class Command(ConfigCommand):
    """Train the joint objective and write a checkpoint."""
    help = 'Train L_QTM + alpha L_TBIA + beta L_CTR on the training split.'

    def handle(self, *args, **options):
        config = self.load_config(options)
        try:
            records = read_jsonl(Path(config.data_dir) / 'train.jsonl')
        except DatasetError as exc:
            raise CommandError(str(exc))

        network = CalaNetwork(config)
        self.stdout.write(
            f'training {network.store.count()} parameters on '
            f'{len(records)} triplets for {config.epochs} epochs'
        )
        try:
            history = train(network, records, config.train_log)
        except NonFiniteError as exc:
            raise CommandError(f'Training diverged: {exc}')
        except ValueError as exc:
            raise CommandError(str(exc))

        for epoch, summary in enumerate(history):
            self.stdout.write(
                f'epoch {epoch:3d}  total {summary.total:.6f}  '
                f'qtm {summary.qtm:.6f}  tbia {summary.tbia:.6f}  '
                f'ctr {summary.ctr:.6f}'
            )
        try:
            save_checkpoint(network.store, config.checkpoint)
            save_config(config, config_path_for(config.checkpoint))
        except OSError as exc:
            raise CommandError(f'Cannot write checkpoint: {exc}')
        self.stdout.write(
            self.style.SUCCESS(
                f'Checkpoint written to {config.checkpoint}, config to '
                f'{config_path_for(config.checkpoint)}'))
