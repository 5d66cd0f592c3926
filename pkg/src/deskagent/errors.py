"""Exception hierarchy shared across the package."""


class DeskAgentError(Exception):
    """Base class for every error raised by deskagent."""


class ParseError(DeskAgentError):
    """Malformed accessibility-tree input."""


class CompileError(DeskAgentError):
    """An action could not be compiled against an observation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid action")


class ModelError(DeskAgentError):
    """Chat backend failure. ``kind`` is one of transport, status, empty-reply."""

    def __init__(self, message, kind="transport"):
        super().__init__(message)
        self.kind = kind


class ScriptExhausted(ModelError):
    """The scripted backend had no rule matching a prompt."""

    def __init__(self, digest):
        super().__init__(f"no scripted reply for prompt {digest}", kind="script")
        self.digest = digest


class BackendError(DeskAgentError):
    """Embedding or search transport failure."""


class PersistError(DeskAgentError):
    pass


class PlanParseError(DeskAgentError):
    pass


class ResponseParseError(DeskAgentError):
    pass


class EnvError(DeskAgentError):
    """Environment failure. ``trajectory`` holds the partial episode when known."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class TaskLoadError(DeskAgentError):
    pass


class MissingStoreError(DeskAgentError):
    pass


class ConfigError(DeskAgentError):
    pass
