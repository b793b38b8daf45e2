import json

import pytest
import torch
from torch import nn

from filmtts.checkpoint import (
    SCHEMA_VERSION,
    CheckpointError,
    describe_checkpoint,
    load_checkpoint,
    load_params,
    save_checkpoint,
)


class TinyNet(nn.Module):
    def __init__(self, width=3):
        super().__init__()
        self.linear = nn.Linear(width, 2, dtype=torch.float64)
        self.scale = nn.Parameter(torch.tensor(1.5, dtype=torch.float64))


def test_round_trip_is_bit_exact(tmp_path):
    torch.manual_seed(0)
    model = TinyNet()
    path = save_checkpoint(
        tmp_path / "net.json", kind="annotator", config={"width": 3}, seed=0,
        model=model,
    )
    checkpoint = load_checkpoint(path)
    assert checkpoint.schema_version == SCHEMA_VERSION
    assert checkpoint.kind == "annotator"
    assert checkpoint.config == {"width": 3}
    assert checkpoint.seed == 0
    restored = TinyNet()
    load_params(restored, checkpoint.params)
    for original, loaded in zip(model.parameters(), restored.parameters()):
        assert torch.equal(original, loaded)


def test_checkpoint_file_is_stable(tmp_path):
    torch.manual_seed(1)
    model = TinyNet()
    first = save_checkpoint(
        tmp_path / "a.json", kind="tts", config={}, seed=1, model=model
    )
    second = save_checkpoint(
        tmp_path / "b.json", kind="tts", config={}, seed=1, model=model
    )
    assert first.read_bytes() == second.read_bytes()


def test_future_schema_version_rejected(tmp_path):
    torch.manual_seed(2)
    path = save_checkpoint(
        tmp_path / "net.json", kind="tts", config={}, seed=2, model=TinyNet()
    )
    payload = json.loads(path.read_text())
    payload["schema_version"] = SCHEMA_VERSION + 1
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="schema"):
        load_checkpoint(path)


def test_expect_kind_guard(tmp_path):
    torch.manual_seed(3)
    path = save_checkpoint(
        tmp_path / "net.json", kind="tts", config={}, seed=3, model=TinyNet()
    )
    load_checkpoint(path, expect_kind="tts")
    with pytest.raises(CheckpointError, match="tts"):
        load_checkpoint(path, expect_kind="annotator")


def test_missing_key_rejected(tmp_path):
    torch.manual_seed(4)
    path = save_checkpoint(
        tmp_path / "net.json", kind="tts", config={}, seed=4, model=TinyNet()
    )
    payload = json.loads(path.read_text())
    del payload["params"]
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="params"):
        load_checkpoint(path)


def test_non_object_rejected(tmp_path):
    path = tmp_path / "net.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_corrupt_json_raises_decode_error(tmp_path):
    path = tmp_path / "net.json"
    path.write_text("{ not json")
    with pytest.raises(json.JSONDecodeError):
        load_checkpoint(path)


def test_load_params_rejects_name_and_shape_mismatch(tmp_path):
    torch.manual_seed(5)
    path = save_checkpoint(
        tmp_path / "net.json", kind="tts", config={}, seed=5, model=TinyNet(width=3)
    )
    checkpoint = load_checkpoint(path)
    with pytest.raises(CheckpointError, match="shape"):
        load_params(TinyNet(width=4), checkpoint.params)
    renamed = dict(checkpoint.params)
    renamed["other.weight"] = renamed.pop("linear.weight")
    with pytest.raises(CheckpointError, match="other.weight"):
        load_params(TinyNet(width=3), renamed)


def test_describe_reports_shapes_and_totals(tmp_path):
    torch.manual_seed(6)
    path = save_checkpoint(
        tmp_path / "net.json",
        kind="annotator",
        config={"width": 3, "depth": 1},
        seed=6,
        model=TinyNet(),
    )
    text = describe_checkpoint(load_checkpoint(path))
    assert "kind: annotator" in text
    assert "seed: 6" in text
    assert "linear.weight: 2x3 (6)" in text
    assert "linear.bias: 2 (2)" in text
    assert "scale: scalar (1)" in text
    assert "total parameters: 9" in text
    assert "depth: 1" in text
