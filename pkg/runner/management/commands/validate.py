import json

from django.core.management.base import BaseCommand

from runner.config import RunConfig
from runner.helper_functions import command_failure
from runner.pipelines import dry_run


class Command(BaseCommand):
    help = 'Schema-check a run config and build its geometry without running anything'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Path to the JSON run config')

    def handle(self, *args, **options):
        try:
            config = RunConfig.load(options['config'])
            checks = dry_run(config)
        except Exception as e:
            raise command_failure(self, e)
        self.stdout.write(json.dumps({'valid': True, **checks}, sort_keys=True, default=str))
        self.stdout.write(self.style.SUCCESS(f"{options['config']} is valid"))
