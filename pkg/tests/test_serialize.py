import math

import numpy as np

from polylab.serialize import csv_text, dumps, format_float, loads, write_jsonl


def test_float_format_has_seventeen_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1.0"
    assert format_float(1.0 / 3.0) == "0.33333333333333331"
    assert format_float(math.inf) == "inf"


def test_round_trip_is_exact():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal(100) * 10.0 ** rng.integers(-20, 20, 100)
    back = loads(dumps({"x": xs}))
    assert np.array_equal(np.array(back["x"]), xs)


def test_non_finite_and_numpy_values():
    obj = {"a": np.float64("nan"), "b": -math.inf, "c": np.int64(3), "d": np.array([[1.5, 2.0]]), "e": None}
    text = dumps(obj, indent=None)
    assert '"a": "nan"' in text and '"b": "-inf"' in text
    back = loads(text)
    assert math.isnan(back["a"]) and back["b"] == -math.inf
    assert back["c"] == 3 and back["d"] == [[1.5, 2.0]] and back["e"] is None


def test_dumps_is_deterministic_and_ordered():
    obj = {"z": 1, "a": [True, "x"]}
    assert dumps(obj) == dumps(dict(obj))
    assert dumps(obj, indent=None) == '{"z": 1, "a": [true, "x"]}'


def test_csv_header_and_rows():
    text = csv_text(["k", "v"], [{"k": 1, "v": 0.5}, [2, None]])
    assert text == "k,v\n1,0.5\n2,\n"


def test_jsonl(tmp_path):
    write_jsonl(tmp_path / "t.jsonl", [{"i": 0}, {"i": 1}])
    assert (tmp_path / "t.jsonl").read_text() == '{"i": 0}\n{"i": 1}\n'
