"""Exception hierarchy shared by all unifft modules."""


class UnifftError(Exception):
    """Base class for all errors raised by unifft."""


class BackendUnavailable(UnifftError):
    """Requested FFT backend is not registered."""

    def __init__(self, backend_id, available=()):
        self.backend_id = backend_id
        self.available = tuple(available)
        msg = f"unknown FFT backend {backend_id!r}"
        if self.available:
            msg += f" (available: {', '.join(self.available)})"
        super().__init__(msg)


class InvalidGrid(UnifftError):
    """Grid dimensions or lengths outside the supported range."""


class ShapeError(UnifftError):
    """Array shape does not match the plan or operator layout."""


class BadParameters(UnifftError):
    """Global shape cannot be decomposed over the given process count."""


class LayoutMismatch(UnifftError):
    """Block layouts passed to a redistribution do not agree."""


class DeadlockDetected(UnifftError):
    """Ranks blocked on incompatible collective calls."""


class RankFailure(UnifftError):
    """A rank raised inside an SPMD program."""

    def __init__(self, rank, original):
        self.rank = rank
        self.original = original
        super().__init__(f"rank {rank} failed: {original!r}")


class EmptyInput(UnifftError):
    """Operation received an empty record set."""
