from abc import ABC, abstractmethod

class PipelineListener(ABC):

    """
    Definition of the interface for the pipeline command events.

    """

    @abstractmethod
    def on_stage_start(self, stage):
        """
        Trigger a stage_start event, which indicates that a stage of the
        pipeline has started.

        :stage: Description of the stage.

        """
        pass # pragma: no cover

    @abstractmethod
    def on_stage_progress(self, stage, cur_count, max_count):
        """
        Trigger a stage_progress event, which reports the current progress
        of a stage.

        :stage: Description of the stage.
        :cur_count: Completed work units.
        :max_count: Total work units.

        """
        pass # pragma: no cover

    @abstractmethod
    def on_stage_finish(self, stage):
        """
        Trigger a stage_finish event, which indicates that a stage of the
        pipeline has finished.

        :stage: Description of the stage.

        """
        pass # pragma: no cover

    @abstractmethod
    def on_result(self, name, summary):
        """
        Trigger a result event, which reports the summary of a command.

        :name: Name of the command.
        :summary: Short human-readable summary.

        """
        pass # pragma: no cover

    @abstractmethod
    def on_error(self, msg):
        """
        Trigger an error event, which reports an error of the pipeline.

        :msg: The error message.

        """
        pass # pragma: no cover
