import json

from django.core.management.base import BaseCommand, CommandError

from runner.config import RunConfig
from runner.exceptions import PartialOutputs
from runner.helper_functions import command_failure
from runner.pipelines import PIPELINES, SUBCOMMANDS
from runner.reports import ReportWriter


class Command(BaseCommand):
    help = 'Run one stage (geometry, probabilities, inverse, sweep, worldviews) and write its reports'

    def add_arguments(self, parser):
        parser.add_argument('subcommand', choices=SUBCOMMANDS)
        parser.add_argument('config', help='Path to the JSON run config')
        parser.add_argument('--seed', type=int, help='Override the config seed')
        parser.add_argument('--out', help='Override the output directory')
        parser.add_argument('--nodes', type=int, help='Override the quadrature node count')
        parser.add_argument('--threads', type=int, help='Worker threads (results do not depend on it)')
        parser.add_argument('--record', action='store_true', help='Also store sweep runs in the database')

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        try:
            config = RunConfig.load(options['config']).override(
                seed=options.get('seed'), out=options.get('out'), nodes=options.get('nodes'),
                threads=options.get('threads'),
            )
            result = PIPELINES[subcommand](config, record=options.get('record', False))
            result.payload['config'] = config.as_dict()
            writer = ReportWriter(config.output['directory'], config.output['formats'])
            written = writer.write(result)
        except CommandError:
            raise
        except Exception as e:
            raise command_failure(self, e)

        self.stdout.write(json.dumps({'subcommand': subcommand, 'files': written, 'partial': result.partial}))
        if result.partial:
            self.stdout.write(self.style.WARNING(result.summary))
            raise command_failure(self, PartialOutputs(f"{subcommand} wrote partial outputs to "
                                                       f"{config.output['directory']}"))
        self.stdout.write(self.style.SUCCESS(result.summary))
