"""Exception hierarchy shared by every fsakit module."""


class FsaError(Exception):
    """Base class for all fsakit errors."""

    exit_code = 1


class InputError(FsaError, ValueError):
    """Malformed automaton, word, option or file."""

    exit_code = 2


class ResourceError(FsaError):
    """A state-count cap, id-space or disk budget was exceeded."""

    exit_code = 3

    def __init__(self, message, manifest=None):
        super().__init__(message)
        self.manifest = manifest


class IntegrityError(FsaError):
    """A spill or run file failed its checksum or header check."""

    exit_code = 3


class InvariantError(FsaError):
    """An internal invariant was violated (e.g. a non-converged partition)."""

    exit_code = 4
