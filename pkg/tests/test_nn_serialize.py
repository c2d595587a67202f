import numpy as np
import pytest

from stutterkit import nn


def small_model() -> nn.ModelGraph:
    model = nn.ModelGraph(
        (2, 6, 1),
        [nn.Conv2D(1, 3, 2, 1, 2), nn.Activation("relu"), nn.Reshape((4, 2)),
         nn.GRU(3), nn.Dropout(0.2), nn.Dense(1), nn.Activation("sigmoid")],
    )
    model.init_params(np.random.default_rng(42))
    return model


class TestRoundTrip:
    def test_tensors_bit_exact(self):
        model = small_model()
        rebuilt, _meta = nn.deserialize_model(nn.serialize_model(model))
        original = dict(model.parameters())
        for key, param in rebuilt.parameters():
            np.testing.assert_array_equal(param, original[key])

    def test_predictions_preserved(self):
        model = small_model()
        rebuilt, _ = nn.deserialize_model(nn.serialize_model(model))
        x = np.random.default_rng(1).normal(size=(2, 6, 1))
        assert abs(nn.predict(model, x) - nn.predict(rebuilt, x)) <= 1e-12

    def test_metadata_carried(self):
        blob = nn.serialize_model(small_model(), extra_metadata={"threshold": 0.5, "note": "x"})
        _, meta = nn.deserialize_model(blob)
        assert meta["threshold"] == 0.5
        assert meta["note"] == "x"
        assert meta["input_shape"] == [2, 6, 1]

    def test_reserved_metadata_keys_rejected(self):
        with pytest.raises(ValueError):
            nn.serialize_model(small_model(), extra_metadata={"layers": []})


class TestCorruption:
    def test_bad_magic(self):
        blob = bytearray(nn.serialize_model(small_model()))
        blob[:4] = b"NOPE"
        with pytest.raises(nn.CorruptModel):
            nn.deserialize_model(bytes(blob))

    def test_unsupported_version_reported(self):
        blob = bytearray(nn.serialize_model(small_model()))
        blob[4:8] = (99).to_bytes(4, "little")
        with pytest.raises(nn.CorruptModel, match="version 99"):
            nn.deserialize_model(bytes(blob))

    @pytest.mark.parametrize("keep", [10, 50, 200, -1])
    def test_truncation(self, keep):
        blob = nn.serialize_model(small_model())
        with pytest.raises(nn.CorruptModel):
            nn.deserialize_model(blob[:keep])

    def test_trailing_garbage(self):
        blob = nn.serialize_model(small_model())
        with pytest.raises(nn.CorruptModel):
            nn.deserialize_model(blob + b"extra")

    def test_corrupt_metadata(self):
        model = small_model()
        blob = bytearray(nn.serialize_model(model))
        blob[12] ^= 0xFF  # first metadata byte
        with pytest.raises(nn.CorruptModel):
            nn.deserialize_model(bytes(blob))
