from ._core import (
    ComputeError,
    FormatError,
    InvalidArgument,
    IoError,
    distance_map,
    mask_from_annotations,
    peel,
    run,
    segment,
    shells,
    track_3d,
)

__all__ = [
    "ComputeError",
    "FormatError",
    "InvalidArgument",
    "IoError",
    "distance_map",
    "mask_from_annotations",
    "peel",
    "run",
    "segment",
    "shells",
    "track_3d",
]
