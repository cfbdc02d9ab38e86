class ApplicationError(Exception):
    exit_code = 1

    def __init__(self, message: str, extra: dict | None = None):
        self.message = message
        self.extra = extra or {}
        super().__init__(message)

    def as_payload(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "extra": self.extra,
        }


class ConfigurationError(ApplicationError):
    exit_code = 1


class PreconditionError(ApplicationError):
    exit_code = 1


class DomainError(ApplicationError):
    exit_code = 1


class ContainmentError(PreconditionError):
    exit_code = 1


class NumericFailure(ApplicationError):
    exit_code = 2


class ResourceCapExceeded(ApplicationError):
    exit_code = 3
