"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or call parameters; maps to CLI exit code 1."""


class FormatError(ValueError):
    """Malformed input file (IDX/CSV)."""


class ContractError(RuntimeError):
    """An API was used outside its contract (stale cache, mid-training capture, ...)."""


class OvershootError(ValueError):
    """eta * strength * max(importance) exceeds 1: the anchored decay step would overshoot."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss during training; maps to CLI exit code 2.

    Carries a small diagnostic snapshot of where training blew up.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}
