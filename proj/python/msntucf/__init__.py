"""Tensor completion with multi-head self-attending neural Tucker factorization."""

from ._core import (
    ConfigError,
    DataError,
    MsntucfError,
    NumericalError,
    default_settings,
    generate_synthetic,
    load_wsdream,
    metrics,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "MsntucfError",
    "NumericalError",
    "default_settings",
    "generate_synthetic",
    "load_wsdream",
    "metrics",
    "train",
]
