"""Tests for the checkpoint container and model artifacts."""

import numpy as np
import pytest

from src.nn.architectures import desk_student
from src.nn.network import init_network
from src.nn.optim import OptimizerState, sgd_step
from src.training.artifacts import (
    load_model,
    load_regressor,
    model_checkpoint,
    regressor_checkpoint,
    restore_model,
    restore_optimizer,
    restore_regressor,
    save_model,
)
from src.training.ktan import Model, Regressor
from src.training.regressor import RegressorState, init_regressor, solve_regressor_geometry
from src.utils.checkpoint import (
    MAGIC,
    Checkpoint,
    CheckpointError,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from src.utils.hashing import hash_arrays, hash_parameters


def _model(seed: int = 0) -> Model:
    spec = desk_student((1, 8, 8), classes=3)
    return Model(spec, init_network(spec, seed=seed))


class TestCheckpointContainer:
    """Tests for encode_checkpoint and decode_checkpoint."""

    def test_mixed_precision_roundtrip(self):
        """Arrays of both precisions and metadata come back unchanged."""
        checkpoint = Checkpoint(
            "student",
            {"a/x": np.arange(6, dtype=np.float32).reshape(2, 3), "a/y": np.array([1.5, -2.0])},
            {"cursor": {"phase": "eval", "iteration": 4}},
        )
        decoded = decode_checkpoint(encode_checkpoint(checkpoint))
        assert decoded.role == "student"
        assert decoded.metadata == checkpoint.metadata
        assert hash_arrays(decoded.tensors) == hash_arrays(checkpoint.tensors)
        assert decoded.tensors["a/y"].dtype == np.float64

    def test_encoding_is_deterministic(self):
        """Insertion order does not change the bytes."""
        a = Checkpoint("teacher", {"x": np.ones(2), "y": np.zeros(3)}, {"b": 1, "a": 2})
        b = Checkpoint("teacher", {"y": np.zeros(3), "x": np.ones(2)}, {"a": 2, "b": 1})
        assert encode_checkpoint(a) == encode_checkpoint(b)

    def test_bad_magic(self):
        """Foreign files are rejected."""
        raw = b"XXXX" + encode_checkpoint(Checkpoint("teacher"))[4:]
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(raw)

    def test_version_mismatch(self):
        """Other format versions are rejected."""
        raw = bytearray(encode_checkpoint(Checkpoint("teacher")))
        raw[4] = 99
        with pytest.raises(CheckpointError, match="version"):
            decode_checkpoint(bytes(raw))

    def test_truncated_blob(self):
        """Missing tensor bytes are detected."""
        raw = encode_checkpoint(Checkpoint("teacher", {"x": np.ones(10)}))
        with pytest.raises(CheckpointError):
            decode_checkpoint(raw[:-8])

    def test_too_short(self):
        """A bare magic is not a checkpoint."""
        with pytest.raises(CheckpointError):
            decode_checkpoint(MAGIC)

    def test_unserializable_metadata(self):
        """Metadata must be plain data."""
        with pytest.raises(CheckpointError):
            encode_checkpoint(Checkpoint("teacher", metadata={"x": object()}))

    def test_section(self):
        """Sections strip their prefix."""
        checkpoint = Checkpoint("student", {"network/w": np.ones(1), "velocity/w": np.zeros(1)})
        assert list(checkpoint.section("network")) == ["w"]

    def test_load_missing_and_role(self, tmp_path):
        """Missing files and wrong roles raise."""
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "none.ckpt")
        path = tmp_path / "teacher.ckpt"
        save_checkpoint(Checkpoint("teacher"), path)
        assert load_checkpoint(path, role="teacher").role == "teacher"
        with pytest.raises(CheckpointError, match="expected a student"):
            load_checkpoint(path, role="student")


class TestModelArtifacts:
    """Tests for model and regressor checkpoints."""

    def test_model_roundtrip(self, tmp_path):
        """A saved network reloads bit-identically with its frozen map."""
        model = _model()
        model = Model(model.spec, model.state.frozen_copy(["generator.0"]))
        path = tmp_path / "student.ckpt"
        save_model(path, "student", model, config_hash="sha256:abc", cursor={"phase": "eval"})
        loaded = load_model(path, role="student")
        assert loaded.spec == model.spec
        assert hash_parameters(loaded.state.parameters) == hash_parameters(model.state.parameters)
        assert loaded.state.is_frozen("generator.0.weight")
        assert not loaded.state.is_frozen("generator.2.weight")
        assert load_checkpoint(path).metadata["config_hash"] == "sha256:abc"

    def test_optimizer_roundtrip(self):
        """Velocities and hyperparameters survive a checkpoint."""
        model = _model()
        opt = OptimizerState(0.05, momentum=0.8, weight_decay=0.0)
        grads = {name: np.ones(t.shape, dtype=np.float32) for name, t in model.state.parameters.items()}
        model = Model(model.spec, sgd_step(model.state, grads, opt))
        restored = restore_optimizer(decode_checkpoint(encode_checkpoint(model_checkpoint("student", model, opt))))
        assert restored is not None
        assert (restored.learning_rate, restored.momentum, restored.weight_decay) == (0.05, 0.8, 0.0)
        assert hash_arrays(restored.velocity) == hash_arrays(opt.velocity)

    def test_no_optimizer(self):
        """A checkpoint without optimizer state restores None."""
        assert restore_optimizer(model_checkpoint("teacher", _model())) is None

    def test_missing_parameter(self):
        """A checkpoint lacking a parameter is refused."""
        checkpoint = model_checkpoint("student", _model())
        del checkpoint.tensors["network/classifier.1.bias"]
        with pytest.raises(CheckpointError):
            restore_model(checkpoint)

    def test_wrong_shape(self):
        """A parameter of the wrong shape is refused."""
        checkpoint = model_checkpoint("student", _model())
        checkpoint.tensors["network/classifier.1.bias"] = np.zeros(7, dtype=np.float32)
        with pytest.raises(CheckpointError):
            restore_model(checkpoint)

    def test_regressor_roundtrip(self, tmp_path):
        """Regressor geometry, weights and trained flag reload."""
        spec = solve_regressor_geometry((64, 4, 4), (16, 2, 2))
        state = init_regressor(spec, seed=0)
        regressor = Regressor(spec, RegressorState(state.weight, state.bias, trained=True))
        path = tmp_path / "regressor.ckpt"
        save_checkpoint(regressor_checkpoint(regressor), path)
        loaded = load_regressor(path)
        assert loaded.spec == spec
        assert loaded.state.trained
        np.testing.assert_array_equal(loaded.state.weight.data, state.weight.data)

    def test_regressor_kernel_mismatch(self):
        """Weights that do not fit the stored kernel are refused."""
        spec = solve_regressor_geometry((64, 4, 4), (16, 2, 2))
        checkpoint = regressor_checkpoint(Regressor(spec, init_regressor(spec, seed=0)))
        checkpoint.tensors["regressor/weight"] = np.zeros((16, 64, 2, 2), dtype=np.float32)
        with pytest.raises(CheckpointError):
            restore_regressor(checkpoint)

    def test_network_checkpoint_is_not_a_regressor(self):
        """Loading a regressor from a network checkpoint fails."""
        with pytest.raises(CheckpointError):
            restore_regressor(model_checkpoint("student", _model()))
