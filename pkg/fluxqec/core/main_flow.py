"""Registry of workflow commands behind the command line.
"""

import logging
import typing

from fluxqec.core import commands
from fluxqec.core.commands import WorkflowCmd
from fluxqec.core.config import ExperimentConfig


class MainWorkflow:
    """Named collection of workflow commands.
    """

    def __init__(self, name: str = 'fluxqec', cmds: typing.Optional[
            typing.Sequence[WorkflowCmd]] = None):
        self.flow_name = name
        self.cmds_dict = {c.name(): c for c in (cmds or [])}
        if not self.cmds_dict:
            self.cmds_dict = {c.name(): c for c in self.make_cmds()}
        for cmd_name in self.cmds_dict:
            logging.debug('Registered command %s', cmd_name)
        self.validate()

    def validate(self):
        """Validate workflow setup correctly.
        """
        if not self.flow_name:
            raise ValueError('No name provided for workflow.')
        if not self.cmds_dict:
            raise ValueError('No commands provided for workflow.')
        for name, cmd in self.cmds_dict.items():
            assert name == cmd.name(), (
                f'Mismatch in command name for {name} != {cmd.name()}.')

    @classmethod
    def make_cmds(cls) -> typing.Sequence[WorkflowCmd]:
        """Return sequence of WorkflowCmd.

Sub-classes may override to change the default commands used when `cmds`
is not provided in `__init__`.
        """
        return [commands.WalshCmd(), commands.GateErrorsCmd(),
                commands.QecCmd(), commands.GradCmd(), commands.ToyCmd()]

    def get_cmd(self, name: str) -> WorkflowCmd:
        "Command registered under name, or ValueError."
        try:
            return self.cmds_dict[name]
        except KeyError:
            raise ValueError('Unknown command %r; choose from %s' % (
                name, sorted(self.cmds_dict))) from None

    def run(self, name: str, config: ExperimentConfig,
            threads: int = 1) -> typing.Dict[str, typing.Any]:
        "Run one command on config."
        if threads < 1:
            raise ValueError('threads must be >= 1, got %s' % threads)
        return self.get_cmd(name)(config, threads)

    def help_text(self, name: typing.Optional[str] = None) -> str:
        """Documentation for one command or a summary of all of them.
        """
        docs = {n: c.get_help_docs() for n, c in self.cmds_dict.items()
                if c.show_help}
        if name is None:
            return '\n'.join([
                'Help is available for the following commands:\n'] + [
                    '%s : %s' % (n.ljust(12), docs[n].split('\n')[0])
                    for n in sorted(docs)] + [
                        '', 'Type "fqcli topics NAME" for one of the '
                        'topics above.'])
        if name in docs:
            return 'Help for command %s:\n%s' % (name, docs[name])
        return 'No help available for "%s"' % name
