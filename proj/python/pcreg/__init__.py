"""Correspondence-free point cloud registration.

Point arrays are float64 of shape (N, 3); transforms are 4x4 homogeneous
matrices. A registration result maps the source cloud onto the template.
"""

from ._pcreg import (
    Model,
    add_gaussian_noise,
    apply,
    auc,
    chamfer,
    compose,
    emd,
    euler_to_transform,
    farthest_point_sample,
    grad_check,
    icp,
    inverse,
    load_cloud,
    rotation_error,
    save_cloud,
    se3_exp,
    se3_log,
    synth_shape,
    train,
    translation_error,
)

__all__ = [
    "Model",
    "add_gaussian_noise",
    "apply",
    "auc",
    "chamfer",
    "compose",
    "emd",
    "euler_to_transform",
    "farthest_point_sample",
    "grad_check",
    "icp",
    "inverse",
    "load_cloud",
    "rotation_error",
    "save_cloud",
    "se3_exp",
    "se3_log",
    "synth_shape",
    "train",
    "translation_error",
]
