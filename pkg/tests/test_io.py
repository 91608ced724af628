import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldforge.errors import ModelFileError, ModelVersionError
from fieldforge.io import HEADER, dumps_model, load_model, loads_model, save_model
from fieldforge.model import FieldModel
from fieldforge.patterns import pattern


def sample_model():
    feats = (pattern("[a-z]"), pattern("ism<*>"), pattern(r"\[x"))
    return FieldModel(feats, [math.log(6.99), -50.0, 1e-300], [0.0, 0.25, 0.5, 0.25])


class TestSave:
    def test_layout(self, tmp_path):
        path = tmp_path / "m.txt"
        save_model(sample_model(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "fieldforge-model v1"
        assert lines[1:5] == ["LEN 0 0", "LEN 1 0.25", "LEN 2 0.5", "LEN 3 0.25"]
        assert lines[5] == "FEAT [a-z] 1.944480556245719"
        assert lines[6] == "FEAT ism<*> -50"

    def test_zero_features(self):
        text = dumps_model(FieldModel.uniform([0.5, 0.5]))
        assert text == f"{HEADER}\nLEN 0 0.5\nLEN 1 0.5\n"

    def test_round_trip_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        save_model(sample_model(), a)
        save_model(load_model(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable(self, tmp_path):
        with pytest.raises(ModelFileError) as info:
            save_model(sample_model(), tmp_path / "missing" / "m.txt")
        assert "missing" in str(info.value)


@settings(max_examples=100)
@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=4))
def test_weights_round_trip_exactly(ws):
    feats = tuple(pattern(t) for t in ["a", "b", "ab", "<*>a"][: len(ws)])
    m = FieldModel(feats, ws, [0.3, 0.7])
    back = loads_model(dumps_model(m))
    assert np.array_equal(back.weights, m.weights)
    assert np.array_equal(back.length_dist, m.length_dist)
    assert back.features == m.features


class TestLoad:
    def test_equal_model(self, tmp_path):
        path = tmp_path / "m.txt"
        m = sample_model()
        save_model(m, path)
        back = load_model(path)
        assert back.features == m.features
        assert np.array_equal(back.weights, m.weights)

    @pytest.mark.parametrize(
        "text, line",
        [
            ("", 1),
            ("fieldforge-model v1\n", 1),
            ("hello\n", 1),
            ("fieldforge-model v1\nLEN 0 1\nFEAT a\n", 3),
            ("fieldforge-model v1\nLEN 1 1\n", 2),
            ("fieldforge-model v1\nLEN 0 x\n", 2),
            ("fieldforge-model v1\nLEN 0 1\nFEAT <*>a<*> 1\n", 3),
            ("fieldforge-model v1\nLEN 0 1\nFEAT a inf\n", 3),
            ("fieldforge-model v1\nLEN 0 1\nFEAT a 1\nFEAT a 2\n", 4),
            ("fieldforge-model v1\nLEN 0 1\nFEAT a 1\nLEN 1 0\n", 4),
            ("fieldforge-model v1\nLEN 0 0.5\n", 2),
            ("fieldforge-model v1\nWEIGHT a 1\n", 2),
        ],
    )
    def test_errors_have_line_numbers(self, text, line):
        with pytest.raises(ModelFileError) as info:
            loads_model(text)
        if text:
            assert info.value.line == line

    def test_unknown_version(self):
        with pytest.raises(ModelVersionError):
            loads_model("fieldforge-model v2\nLEN 0 1\n")

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "m.txt"
        save_model(sample_model(), path)
        path.write_bytes(path.read_bytes()[:30])
        with pytest.raises(ModelFileError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model(tmp_path / "nope")

    def test_alphabet_is_supplied(self):
        m = loads_model("fieldforge-model v1\nLEN 0 0\nLEN 1 1\n", alphabet="ab")
        assert m.alphabet == "ab"
