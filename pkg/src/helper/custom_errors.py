from typing import Optional


class GenericError(Exception):
    exit_code: int
    error_message: str
    error: Exception

    def __init__(
        self,
        exit_code: int,
        error_message: str,
        error: Exception = None,
    ) -> None:
        super().__init__()
        self.error = error
        self.exit_code = exit_code
        self.error_message = error_message
        self.error_detail = {
            "response": None,
            "error": {"errorMessage": self.error_message},
            "status": "failure",
        }

    def __str__(self):
        return f"{self.error_message}"


#################################################
#### CALLER ERRORS (exit code 2) ####
#################################################


class ConfigurationError(GenericError):
    def __init__(self, error_message: str, fields: Optional[list] = None):
        super().__init__(exit_code=2, error_message=error_message)
        self.fields = fields or []
        if self.fields:
            self.error_detail["error"]["fields"] = self.fields


class DomainError(GenericError):
    def __init__(self, error_message: str):
        super().__init__(exit_code=2, error_message=error_message)


class OutOfRangeError(GenericError):
    def __init__(self, error_message: str):
        super().__init__(exit_code=2, error_message=error_message)


class UnsupportedConfigurationError(GenericError):
    def __init__(self, error_message: str):
        super().__init__(exit_code=2, error_message=error_message)


#################################################
#### NUMERICAL FAILURES (exit code 3) ####
#################################################


class ConvergenceError(GenericError):
    def __init__(self, error_message: str, partial_value: float = float("nan")):
        super().__init__(exit_code=3, error_message=error_message)
        self.partial_value = partial_value
        self.error_detail["error"]["partialValue"] = partial_value


class IntegrationBlowUpError(GenericError):
    def __init__(self, error_message: str, last_valid_time: float):
        super().__init__(exit_code=3, error_message=error_message)
        self.last_valid_time = last_valid_time
        self.error_detail["error"]["lastValidTime"] = last_valid_time


class PositivityViolationError(GenericError):
    def __init__(self, error_message: str):
        super().__init__(exit_code=3, error_message=error_message)


class InvariantViolationError(GenericError):
    def __init__(self, error_message: str):
        super().__init__(exit_code=3, error_message=error_message)
