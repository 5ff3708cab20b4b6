"""Exception hierarchy shared by every module."""


class SocialSimError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SocialSimError, ValueError):
    """An operation received input that violates its contract."""


class ContractViolation(SocialSimError, ValueError):
    """A precondition was not met by the caller."""


class CognitionError(SocialSimError, RuntimeError):
    """A cognition backend failed; callers may retry."""


class RenderError(SocialSimError, KeyError):
    """A prompt template references a variable missing from the context."""

    def __init__(self, variable: str, template: str = ""):
        self.variable = variable
        self.template = template
        where = f" in template {template!r}" if template else ""
        super().__init__(f"missing variable {variable!r}{where}")

    def __str__(self) -> str:
        return self.args[0]


class ConfigError(SocialSimError, ValueError):
    """A run configuration failed validation."""

    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = errors or []


class SchemaVersionError(SocialSimError, ValueError):
    """A persisted file carries an unknown schema tag or major version."""
