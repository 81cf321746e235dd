from tqdm import tqdm

from os import get_terminal_size
from commands import COMMANDS
from pipeline_listener import PipelineListener

class CliPipelineView:

    """
    Implementation of the pipeline view.

    """

    class EventHandler(PipelineListener):

        """
        Implementation of the event handler class, which will be responsible to
        receive the pipeline events and propagate them to the view.

        """

        def __init__(self, view):
            """
            Initialize the event handler internal data.

            """
            super().__init__()

            self.view = view

        def on_stage_start(self, stage):
            """
            Trigger a stage_start event, which indicates that a stage of the
            pipeline has started.

            :stage: Description of the stage.

            """
            self.view.on_stage_start(stage)

        def on_stage_progress(self, stage, cur_count, max_count):
            """
            Trigger a stage_progress event, which reports the current progress
            of a stage.

            """
            self.view.on_stage_progress(stage, cur_count, max_count)

        def on_stage_finish(self, stage):
            """
            Trigger a stage_finish event, which indicates that a stage of the
            pipeline has finished.

            :stage: Description of the stage.

            """
            self.view.on_stage_finish(stage)

        def on_result(self, name, summary):
            """
            Trigger a result event, which reports the summary of a command.

            :name: Name of the command.
            :summary: Short human-readable summary.

            """
            self.view.on_result(name, summary)

        def on_error(self, msg):
            """
            Trigger an error event, which reports an error of the pipeline.

            :msg: The error message.

            """
            self.view.on_error(msg)

    def __init__(self, config, out_dir, command):
        """
        Initialize the pipeline view internal data.

        :config: The SystemConfig.
        :out_dir: Output directory.
        :command: Name of the command.

        """
        self.cmd = COMMANDS[command](config, out_dir)
        self.event_handler = CliPipelineView.EventHandler(self)
        self.prog_bar = None

    def run(self):
        """
        Trigger the command.

        :returns: The exit code.

        """
        return self.cmd.execute(self.event_handler)

    def on_stage_start(self, stage):
        """
        Trigger a stage_start event, which indicates that a stage of the
        pipeline has started.

        :stage: Description of the stage.

        """
        bar_width = int(get_terminal_size().columns * 0.3)

        self.prog_bar = tqdm(
            bar_format=
                '    {percentage:3.0f}% |{bar:' + str(bar_width) + '}|' +
                ' [{elapsed}/{remaining}]{desc}'
        )
        self.prog_bar.set_description_str(' ' + stage)

    def on_stage_progress(self, stage, cur_count, max_count):
        """
        Trigger a stage_progress event, which reports the current progress
        of a stage.

        """
        if self.prog_bar is not None:
            if self.prog_bar.total != max_count:
                self.prog_bar.total = max_count

            self.prog_bar.n = cur_count
            self.prog_bar.refresh()

    def on_stage_finish(self, stage):
        """
        Trigger a stage_finish event, which indicates that a stage of the
        pipeline has finished.

        :stage: Description of the stage.

        """
        if self.prog_bar is not None:
            # stages without progress events still end at 100 %
            self.prog_bar.total = self.prog_bar.total or 1
            self.prog_bar.n = self.prog_bar.total
            self.prog_bar.set_description_str(self.prog_bar.desc + ' OK')
            self.prog_bar.close()
            self.prog_bar = None

    def on_result(self, name, summary):
        """
        Trigger a result event, which reports the summary of a command.

        :name: Name of the command.
        :summary: Short human-readable summary.

        """
        print('[{}] {}'.format(name, summary))

    def on_error(self, msg):
        """
        Trigger an error event, which reports an error of the pipeline.

        :msg: The error message.

        """
        if self.prog_bar is not None:
            self.prog_bar.set_description_str(self.prog_bar.desc + ' ERROR')
            self.prog_bar.close()
            self.prog_bar = None

        print('ERROR: ' + msg)
