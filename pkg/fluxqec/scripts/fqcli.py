"""Fluxqec command line interface.
"""

import logging

import click

from fluxqec.core.config import load_config
from fluxqec.core.errors import ConfigError, FluxQecError
from fluxqec.core.main_flow import MainWorkflow


WORKFLOW = MainWorkflow()


@click.group()
@click.option('--config', 'config_path', default=None,
              type=click.Path(dir_okay=False),
              help='YAML experiment file.')
@click.option('--seed', default=None, type=click.IntRange(0, 2 ** 64 - 1),
              help='If provided, overrides seeds.master of the config.')
@click.option('--threads', default=1, type=click.IntRange(1, None),
              help='Cap on worker processes.')
@click.option('--out', default=None, type=click.Path(file_okay=False),
              help='If provided, overrides output_dir of the config.')
@click.option('--loglevel', default=None, type=click.Choice([
    'DEBUG', 'INFO', 'WARNING', 'CRITICAL', 'ERROR', 'FATAL']),
              help=('If provided, set root log level to this.'))
@click.pass_context
def cli(ctx, config_path, seed, threads, out, loglevel):
    "Fluxqec command line interface."
    if loglevel:
        logging.getLogger('').setLevel(getattr(logging, loglevel))
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, seed=seed, threads=threads,
                   out=out)


@cli.command()
@click.argument('name', required=False)
def topics(name):
    "Show help for workflow commands."
    click.echo(WORKFLOW.help_text(name))


def run_workflow(ctx, name: str):
    """Load the config named on the command line and run one command.

Any FluxQecError is logged and turned into its exit code.
    """
    opts = ctx.obj
    try:
        if not opts['config_path']:
            raise ConfigError('Command %s needs --config' % name)
        config = load_config(opts['config_path'], opts['seed'], opts['out'])
        WORKFLOW.run(name, config, opts['threads'])
    except FluxQecError as problem:
        logging.error('%s failed: %s', name, problem)
        click.echo('Error: %s' % problem, err=True)
        ctx.exit(problem.exit_code)


def make_workflow_command(name: str, cmd) -> click.Command:
    "Wrap a WorkflowCmd as a click command."

    @click.pass_context
    def callback(ctx):
        run_workflow(ctx, name)

    return click.Command(name, callback=callback,
                         help=cmd.get_help_docs(),
                         short_help=cmd.get_help_docs().split('\n')[0])


def prep_cmd_line():
    """Prepare command line by adding more sub-command lines.
    """
    for name, cmd in WORKFLOW.cmds_dict.items():
        if name not in cli.commands:
            cli.add_command(make_workflow_command(name, cmd))


def main(**kwargs):
    "Run cmd line"
    prep_cmd_line()
    cli(**kwargs)


if __name__ == '__main__':
    main(auto_envvar_prefix='FLUXQEC')
