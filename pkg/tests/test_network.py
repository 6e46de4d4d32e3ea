"""Tests for layer specs, architectures and forward passes."""

import numpy as np
import pytest

from src.nn.architectures import ARCHITECTURES, build_architecture, desk_student, desk_teacher, discriminator
from src.nn.layers import ConvLayer, DenseLayer, FlattenLayer, MaxPoolLayer, NetworkSpec, NetworkSpecError
from src.nn.network import (
    NetworkState,
    classifier_parameters,
    forward,
    forward_classifier,
    forward_generator,
    generator_parameters,
    group_of,
    init_network,
)
from src.tensor.geometry import ConvGeometry
from src.tensor.tensor import ShapeError, Tensor
from src.utils.hashing import hash_parameters


class TestNetworkSpec:
    """Tests for NetworkSpec class."""

    def test_desk_shapes(self):
        """Teacher and student feature maps differ in size on 16x16 inputs."""
        teacher = desk_teacher((1, 16, 16), classes=4)
        student = desk_student((1, 16, 16), classes=4)
        assert teacher.feature_shape == (64, 8, 8)
        assert student.feature_shape == (16, 6, 6)
        assert teacher.output_size == student.output_size == 4

    def test_discriminator_is_single_unit(self):
        """The discriminator ends in one sigmoid unit."""
        spec = discriminator((16, 6, 6), channels=8)
        assert spec.output_size == 1
        assert spec.classifier_layers[-1].activation == "sigmoid"

    def test_discriminator_skips_pool_on_odd_maps(self):
        """Odd extents are not pooled."""
        spec = discriminator((16, 3, 3))
        assert not any(isinstance(layer, MaxPoolLayer) for layer in spec.generator_layers)

    def test_incompatible_layers(self):
        """A dense layer of the wrong width is rejected."""
        with pytest.raises(NetworkSpecError):
            NetworkSpec(
                "broken",
                (1, 4, 4),
                (ConvLayer(ConvGeometry.square(1, 2, 3, padding=1)),),
                (FlattenLayer(), DenseLayer(31, 2)),
            )

    def test_pool_that_does_not_tile(self):
        """Geometry errors surface as spec errors."""
        with pytest.raises(NetworkSpecError):
            NetworkSpec("odd", (1, 5, 5), (MaxPoolLayer(2),))

    def test_unknown_activation(self):
        """Activations come from a fixed set."""
        with pytest.raises(NetworkSpecError):
            NetworkSpec("act", (1, 4, 4), (ConvLayer(ConvGeometry.square(1, 1, 1), "tanh"),))

    def test_dict_roundtrip(self):
        """Specs survive serialization."""
        spec = desk_teacher((3, 8, 8), classes=5)
        assert NetworkSpec.from_dict(spec.to_dict()) == spec

    def test_registry(self):
        """Names resolve through the registry; unknown names fail."""
        assert set(ARCHITECTURES) >= {"desk-teacher", "desk-student", "discriminator"}
        assert build_architecture("desk-student", (1, 8, 8), classes=3).output_size == 3
        with pytest.raises(NetworkSpecError):
            build_architecture("resnet", (1, 8, 8), classes=3)
        with pytest.raises(NetworkSpecError):
            build_architecture("desk-student", (1, 8, 8), colours=3)


class TestNetworkState:
    """Tests for NetworkState and init_network."""

    def test_parameter_names_follow_spec(self):
        """Every parameter layer yields a weight and a bias."""
        spec = desk_student((1, 8, 8), classes=3)
        state = init_network(spec, seed=0)
        assert {n: t.shape for n, t in state.parameters.items()} == spec.parameter_shapes()
        assert group_of("generator.0.weight") == "generator.0"

    def test_init_is_deterministic(self):
        """The same seed gives bit-identical parameters."""
        spec = desk_student((1, 8, 8), classes=3)
        a = init_network(spec, seed=11)
        b = init_network(spec, seed=11)
        c = init_network(spec, seed=12)
        assert hash_parameters(a.parameters) == hash_parameters(b.parameters)
        assert hash_parameters(a.parameters) != hash_parameters(c.parameters)

    def test_biases_start_at_zero(self):
        """Biases are zero-initialised."""
        state = init_network(desk_student((1, 8, 8), classes=3), seed=0)
        for name, tensor in state.parameters.items():
            if name.endswith(".bias"):
                assert not tensor.data.any()

    def test_precision(self):
        """Double precision is honoured."""
        state = init_network(desk_student((1, 8, 8), classes=3), seed=0, precision="double")
        assert all(t.precision == "double" for t in state.parameters.values())

    def test_frozen_copy(self):
        """Freezing marks groups without copying tensors."""
        state = init_network(desk_student((1, 8, 8), classes=3), seed=0)
        frozen = state.frozen_copy()
        assert frozen.trainable() == {}
        assert frozen.parameters["generator.0.weight"] is state.parameters["generator.0.weight"]
        assert frozen.unfrozen_copy().trainable().keys() == state.parameters.keys()

    def test_partial_freeze(self):
        """Only the named groups are frozen."""
        state = init_network(desk_student((1, 8, 8), classes=3), seed=0)
        partial = state.frozen_copy(["generator.0"])
        assert partial.is_frozen("generator.0.weight")
        assert not partial.is_frozen("generator.2.weight")

    def test_parameter_split(self):
        """Generator and classifier parameters partition the state."""
        state = init_network(desk_student((1, 8, 8), classes=3), seed=0)
        gen, cls = generator_parameters(state), classifier_parameters(state)
        assert set(gen) | set(cls) == set(state.parameters)
        assert not set(gen) & set(cls)


class TestForward:
    """Tests for forward passes."""

    def test_shapes(self, rng):
        """Generator yields the feature map; classifier yields logits."""
        spec = desk_student((1, 8, 8), classes=3)
        state = init_network(spec, seed=0)
        batch = Tensor(rng.standard_normal((5, 1, 8, 8)))
        m_s = forward_generator(state, spec, batch)
        assert m_s.shape == (5, *spec.feature_shape)
        assert forward_classifier(state, spec, m_s).shape == (5, 3)
        np.testing.assert_array_equal(forward(state, spec, batch).data, forward_classifier(state, spec, m_s).data)

    def test_wrong_input_shape(self, rng):
        """Images of the wrong size are a shape error."""
        spec = desk_student((1, 8, 8), classes=3)
        state = init_network(spec, seed=0)
        with pytest.raises(ShapeError):
            forward(state, spec, Tensor(rng.standard_normal((2, 1, 9, 9))))

    def test_classifier_rejects_foreign_maps(self, rng):
        """A classifier only accepts maps of its own split point."""
        spec = desk_student((1, 8, 8), classes=3)
        state = init_network(spec, seed=0)
        with pytest.raises(ShapeError):
            forward_classifier(state, spec, Tensor(rng.standard_normal((2, 64, 4, 4))))

    def test_discriminator_outputs_probabilities(self, rng):
        """Discriminator outputs lie in [0, 1]."""
        spec = discriminator((16, 2, 2))
        state = init_network(spec, seed=0)
        out = forward(state, spec, Tensor(rng.standard_normal((4, 16, 2, 2))))
        assert out.shape == (4, 1)
        assert ((out.data >= 0) & (out.data <= 1)).all()

    def test_empty_state_has_no_groups(self):
        """A state without parameters has no groups."""
        assert NetworkState({}).groups == []
