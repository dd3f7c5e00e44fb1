"""Error hierarchy shared by the library and the CLI"""


class UpliftError(Exception):
    """Base error. ``code`` is the short machine-readable tag the CLI prints."""

    code = "uplift_error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def __str__(self) -> str:
        return self.detail


class SchemaError(UpliftError, ValueError):
    code = "schema_invalid"


class DatasetError(UpliftError, ValueError):
    code = "dataset_invalid"


class ParameterError(UpliftError, ValueError):
    code = "params_invalid"


class EvaluationError(UpliftError, ValueError):
    code = "evaluation_invalid"


class ModelFormatError(UpliftError):
    code = "model_malformed"


class ModelVersionError(ModelFormatError):
    code = "model_version"


class ConfigError(UpliftError):
    code = "config_invalid"
