import json
from pathlib import Path

from django.core.management.base import CommandError
from rest_framework import serializers

from core.autograd import NonFiniteError
from core.management.commands._base import ConfigCommand
from cala.evaluation import evaluate
from cala.network import CalaNetwork
from cala.trainer import train
from retrieval.metrics import format_comparison
from retrieval.synth import SynthSpec, generate

NO_HARM_MARGIN = 0.02


def ablation_configs(config):
    """The four objective variants, all on the same seed."""
    return {
        'baseline': config.updated(disable_tbia=True, disable_ctr=True),
        '+tbia': config.updated(disable_tbia=False, disable_ctr=True),
        '+ctr': config.updated(disable_tbia=True, disable_ctr=False),
        'full': config.updated(disable_tbia=False, disable_ctr=False),
    }


def sweep_configs(config, sweeps):
    """One run per value of each `key=v1,v2,...`, named `key=value`."""
    runs = {}
    for sweep in sweeps:
        key, sep, values = sweep.partition('=')
        key = key.strip()
        values = [v.strip() for v in values.split(',') if v.strip()]
        if not sep or not key or not values:
            raise serializers.ValidationError(
                f'Sweep {sweep!r} is not of the form key=v1,v2.'
            )
        for value in values:
            runs[f'{key}={value}'] = config.updated(**{key: value})
    return runs


def no_harm(reports, margin=NO_HARM_MARGIN):
    return reports['full']['recall@1'] >= \
        reports['baseline']['recall@1'] - margin


class Command(ConfigCommand):
    """Train and evaluate the objective ablations side by side."""
    help = ('Compare baseline, +TBIA, +CTR and full objectives, or the '
            'values of --sweep.')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--sweep', action='append', default=[], metavar='KEY=V1,V2',
            help='Compare these values of one key instead; repeatable.',
        )

    def handle(self, *args, **options):
        config = self.load_config(options)
        try:
            runs = sweep_configs(config, options['sweep']) \
                if options['sweep'] else ablation_configs(config)
        except serializers.ValidationError as exc:
            raise CommandError(f'Invalid sweep: {exc.detail}')
        train_set, val_set = generate(SynthSpec.from_config(config))

        reports = {}
        for run, variant in runs.items():
            self.stdout.write(f'training {run} '
                              f'(alpha={variant.effective_alpha}, '
                              f'beta={variant.effective_beta})')
            network = CalaNetwork(variant)
            try:
                train(network, train_set)
            except NonFiniteError as exc:
                raise CommandError(f'{run} diverged: {exc}')
            _, reports[run] = evaluate(network, val_set, variant.workers)

        self.stdout.write(format_comparison(reports))
        path = Path(config.report).with_name('ablation.json')
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open('w', encoding='utf-8') as fh:
                json.dump(reports, fh, indent=2)
        except OSError as exc:
            raise CommandError(f'Cannot write ablation report: {exc}')

        if 'baseline' not in reports or 'full' not in reports:
            self.stdout.write(
                self.style.SUCCESS(f'Sweep report written to {path}'))
        elif no_harm(reports):
            self.stdout.write(self.style.SUCCESS(
                f'Full objective holds Recall@1 within {NO_HARM_MARGIN} '
                f'of the baseline. Report written to {path}'))
        else:
            self.stdout.write(self.style.ERROR(
                'Full objective falls below the baseline Recall@1 '
                f'by more than {NO_HARM_MARGIN}.'))
