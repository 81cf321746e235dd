from config_mgr import ConfigMgr
from views import CliPipelineView

class App:

    """
    Implementation of the main class of the App.

    """

    def __init__(self, args):
        """
        Initialize the app internal data.

        :args: Command line arguments.

        """
        self.args = args

    def run(self):
        """
        Run the app according to the specified args.

        :returns: The exit code of the command.

        """
        config = ConfigMgr.load(
            self.args.config,
            seed_override=self.args.seed_override,
            threads=self.args.threads
        )

        view = CliPipelineView(config, self.args.out, self.args.command)

        return view.run()
