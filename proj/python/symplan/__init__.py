# SPDX-License-Identifier: Apache-2.0
"""Symmetric value-iteration planners on grids (bindings to the C++ library)."""

from ._core import (
    CheckpointError,
    DatasetError,
    FiberRep,
    OccupancyMap,
    Padding,
    PlannerConfig,
    PlannerModel,
    Variant,
    bfs_distances,
    evaluate,
    exact_value_iteration,
    expert_labels,
    gen_data,
    gen_manip_map,
    gen_maze,
    load_checkpoint,
    render_ascii,
    rollout,
    train,
    transform_map,
)

__all__ = [
    "CheckpointError",
    "DatasetError",
    "FiberRep",
    "OccupancyMap",
    "Padding",
    "PlannerConfig",
    "PlannerModel",
    "Variant",
    "bfs_distances",
    "evaluate",
    "exact_value_iteration",
    "expert_labels",
    "gen_data",
    "gen_manip_map",
    "gen_maze",
    "load_checkpoint",
    "render_ascii",
    "rollout",
    "train",
    "transform_map",
]
