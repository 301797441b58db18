"""Python bindings for the vector detection network library."""

from ._vdn import (
    CHECKPOINT_VERSION,
    TEMPLATE_VERSION,
    DataError,
    Model,
    NumericError,
    ShapeError,
    config_hash,
    decode,
    encode_heatmap,
    encode_scalarmap,
    estimate_homography,
    gradcheck,
    hungarian,
    oks_pair,
    read_meter,
    render_dial,
    vds_pair,
)

__all__ = [
    "CHECKPOINT_VERSION",
    "TEMPLATE_VERSION",
    "DataError",
    "Model",
    "NumericError",
    "ShapeError",
    "config_hash",
    "decode",
    "encode_heatmap",
    "encode_scalarmap",
    "estimate_homography",
    "gradcheck",
    "hungarian",
    "oks_pair",
    "read_meter",
    "render_dial",
    "vds_pair",
]
