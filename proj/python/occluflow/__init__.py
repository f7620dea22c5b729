"""Occlusion-robust facial expression analysis from motion fields."""

from pathlib import Path

from ._core import (  # noqa: F401
    Layout,
    Model,
    Stack,
    StageError,
    ValidationError,
    apply_occlusion,
    cross_validate,
    enumerate_configurations,
    graph_distances,
    is_connected,
    load_masks,
    run_plan,
    sequence_gmd,
    synth_gmd,
    train_binary,
    weight_map,
)

__all__ = [
    "Layout",
    "Model",
    "Stack",
    "StageError",
    "ValidationError",
    "apply_occlusion",
    "cross_validate",
    "data_path",
    "enumerate_configurations",
    "graph_distances",
    "is_connected",
    "load_masks",
    "run_plan",
    "sequence_gmd",
    "synth_gmd",
    "train_binary",
    "weight_map",
]


def data_path(name: str) -> str:
    """Path to a bundled data file (default layout, masks, archetypes)."""
    path = Path(__file__).parent / "data" / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled data file named {name!r}")
    return str(path)
