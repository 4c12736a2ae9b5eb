"""Exception hierarchy shared by every stage.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""


class ListSNAError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ListSNAError):
    """Bad user input: arguments, alias rules, topic queries, config files."""


class DataError(ListSNAError):
    """The input data (or a persisted stage dataset) is malformed."""


class MboxFormatError(DataError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DataIntegrityError(DataError):
    def __init__(self, message: str, msg_id: str | None = None):
        super().__init__(message if msg_id is None else f"{message}: {msg_id}")
        self.msg_id = msg_id


class StageError(ListSNAError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
