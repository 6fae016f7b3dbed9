class AdapterError(Exception):
    """Raised when a pipeline stage fails; the message names the stage."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        super().__init__(f"{stage}: {detail}")
