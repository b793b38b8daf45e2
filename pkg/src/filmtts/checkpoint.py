"""JSON checkpoints: portable, diffable, and exact.

Parameters are stored as nested lists of float64 values; Python's repr-based
float serialization makes the round trip bit-exact, so a reloaded model
reproduces the original's outputs to the last ulp.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .data import read_json, write_json

SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    """Structurally invalid or incompatible checkpoint."""


@dataclass(frozen=True)
class Checkpoint:
    schema_version: int
    kind: str
    config: dict
    seed: int
    params: dict


def save_checkpoint(
    path: Path | str, kind: str, config: dict, seed: int, model: nn.Module
) -> Path:
    path = Path(path)
    params = {
        name: tensor.detach().cpu().numpy().tolist()
        for name, tensor in model.state_dict().items()
    }
    write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "config": config,
            "seed": seed,
            "params": params,
        },
    )
    return path


def load_checkpoint(path: Path | str, expect_kind: str | None = None) -> Checkpoint:
    """Read and structurally validate a checkpoint.

    A newer schema_version raises CheckpointError (the file is from a future
    version of this package); corrupt JSON raises json.JSONDecodeError.
    """
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise CheckpointError(f"{path}: checkpoint must hold an object")
    missing = [k for k in ("schema_version", "kind", "config", "seed", "params") if k not in obj]
    if missing:
        raise CheckpointError(f"{path}: missing keys: {', '.join(missing)}")
    version = int(obj["schema_version"])
    if version > SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: schema_version {version} is newer than the supported "
            f"version {SCHEMA_VERSION}; upgrade this package to read it"
        )
    kind = str(obj["kind"])
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointError(f"{path}: expected a {expect_kind!r} checkpoint, found {kind!r}")
    if not isinstance(obj["params"], dict):
        raise CheckpointError(f"{path}: params must be an object")
    return Checkpoint(
        schema_version=version,
        kind=kind,
        config=dict(obj["config"]),
        seed=int(obj["seed"]),
        params=dict(obj["params"]),
    )


def load_params(model: nn.Module, params: dict) -> None:
    """Copy checkpoint parameters into a freshly built model, strictly."""
    state = model.state_dict()
    missing = sorted(set(state) - set(params))
    unexpected = sorted(set(params) - set(state))
    if missing or unexpected:
        raise CheckpointError(
            f"parameter names do not match model: missing {missing}, unexpected {unexpected}"
        )
    new_state = {}
    for name, expected in state.items():
        tensor = torch.tensor(params[name], dtype=expected.dtype)
        if tuple(tensor.shape) != tuple(expected.shape):
            raise CheckpointError(
                f"parameter {name!r} has shape {tuple(tensor.shape)}, "
                f"expected {tuple(expected.shape)}"
            )
        new_state[name] = tensor
    model.load_state_dict(new_state)


def describe_checkpoint(checkpoint: Checkpoint) -> str:
    """Human-readable summary: header, config, and per-parameter shapes."""
    lines = [
        f"kind: {checkpoint.kind}",
        f"schema_version: {checkpoint.schema_version}",
        f"seed: {checkpoint.seed}",
        "config:",
    ]
    for key in sorted(checkpoint.config):
        lines.append(f"  {key}: {checkpoint.config[key]}")
    lines.append("parameters:")
    total = 0
    for name in sorted(checkpoint.params):
        shape = _nested_shape(checkpoint.params[name])
        count = 1
        for side in shape:
            count *= side
        total += count
        shape_text = "x".join(str(s) for s in shape) if shape else "scalar"
        lines.append(f"  {name}: {shape_text} ({count})")
    lines.append(f"total parameters: {total}")
    return "\n".join(lines)


def _nested_shape(value: object) -> tuple[int, ...]:
    shape: list[int] = []
    while isinstance(value, list):
        shape.append(len(value))
        value = value[0] if value else None
    return tuple(shape)
