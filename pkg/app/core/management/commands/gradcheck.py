from django.core.management.base import CommandError

from core import gradcheck
from core.management.commands._base import ConfigCommand
from cala.network import CalaNetwork
from retrieval.synth import SynthSpec, generate

BATCH = 3


def gradcheck_config(config):
    """Small model the finite-difference sweep can afford."""
    return config.updated(dim=8, heads=1, batch_size=BATCH, tac_layers=2,
                          n_train=BATCH, n_val=config.subset_size)


class Command(ConfigCommand):
    """Compare every gradient of the joint loss with finite differences."""
    help = 'Gradient check of the full objective at d=8, B=3, M=2.'

    def handle(self, *args, **options):
        config = gradcheck_config(self.load_config(options))
        network = CalaNetwork(config)
        records, _ = generate(SynthSpec.from_config(config))

        def loss_fn():
            return network.losses(records)[0]

        checks = gradcheck.check_gradients(network.store, loss_fn)
        for check in checks:
            if check.skipped:
                self.stdout.write(f'{check.group:<20} skipped (frozen)')
                continue
            line = (f'{check.group:<20} max norm-wise rel err '
                    f'{check.max_error:.3e}')
            style = self.style.SUCCESS if check.passed else self.style.ERROR
            self.stdout.write(style(line))

        failed = [c.group for c in checks if not c.passed]
        if failed:
            raise CommandError(f'Gradient check failed for {failed}.')
        self.stdout.write(self.style.SUCCESS('All gradient groups pass.'))
