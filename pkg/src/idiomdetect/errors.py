"""Exception types shared across the toolkit."""


class IdiomDetectError(Exception):
    """Base class for all toolkit errors."""


class CorpusFormatError(IdiomDetectError):
    """A corpus file violates its on-disk format."""

    def __init__(self, message, path=None, line=None):
        location = str(path) if path is not None else ""
        if line is not None:
            location += f":{line}"
        super().__init__(f"{location}: {message}" if location else message)
        self.path = path
        self.line = line


class ArchiveFormatError(IdiomDetectError):
    """An embedding archive file is malformed or internally inconsistent."""


class CheckpointFormatError(IdiomDetectError):
    """A model checkpoint file is malformed."""


class MissingEmbeddingError(IdiomDetectError):
    """Sentences lack entries in the supplied embedding archive."""

    def __init__(self, sentence_ids):
        self.sentence_ids = tuple(sentence_ids)
        super().__init__(
            "no embedding archive entry for: " + ", ".join(self.sentence_ids)
        )


class TrainingDivergedError(IdiomDetectError):
    """Training produced a non-finite loss."""


class ConfigError(IdiomDetectError):
    """An experiment configuration is invalid."""
