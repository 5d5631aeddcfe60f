import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from volspan import VolspanError
from volspan.geometry import PointSet, SpannerSet
from volspan.io import (
    dumps,
    parse_points_csv,
    read_halfspaces,
    read_points,
    read_spanner,
    write_points,
    write_spanner,
)

finite = st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 20), st.integers(1, 6)), elements=finite),
       st.sampled_from(["csv", "json"]))
def test_points_round_trip_exact(tmp_path_factory, X, ext):
    path = tmp_path_factory.mktemp("io") / f"pts.{ext}"
    write_points(path, PointSet(X))
    assert np.array_equal(read_points(path).points, X)


def test_csv_comments_and_header(tmp_path):
    path = tmp_path / "k.csv"
    write_points(path, np.eye(2), header="two points\nsecond line")
    text = path.read_text()
    assert text.startswith("# two points\n# second line\n")
    assert np.array_equal(read_points(path).points, np.eye(2))


def test_parse_error_reports_line():
    with pytest.raises(VolspanError) as ei:
        parse_points_csv("# c\n1,2\n3,x\n")
    assert ei.value.code == "parse_error" and ei.value.details["line"] == 3
    with pytest.raises(VolspanError) as ei:
        parse_points_csv("1,2\n\n3,4,5\n")
    assert ei.value.details["line"] == 3
    with pytest.raises(VolspanError):
        parse_points_csv("# only a comment\n")


def test_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"points": [[1, 2],\n oops]}')
    with pytest.raises(VolspanError) as ei:
        read_points(bad)
    assert ei.value.code == "parse_error" and ei.value.details["line"] == 2
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"dim": 3, "points": [[1, 2]]}))
    with pytest.raises(VolspanError):
        read_points(wrong)


def test_missing_file(tmp_path):
    with pytest.raises(VolspanError) as ei:
        read_points(tmp_path / "nope.csv")
    assert ei.value.code == "io_missing_input"


def test_spanner_round_trip(tmp_path):
    K = PointSet(np.random.default_rng(0).standard_normal((8, 3)))
    S = SpannerSet.from_points(K, [1, 4, 4, 7])
    path = tmp_path / "s.json"
    write_spanner(path, S, 0.75, extra={"note": "x"})
    obj = json.loads(path.read_text())
    assert obj["indices"] == [1, 4, 7] and obj["multiplicities"] == [1, 2, 1]
    back = read_spanner(path, K)
    assert np.array_equal(back.gram, S.gram)


def test_spanner_bad_index(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"indices": [0, 9]}))
    with pytest.raises(VolspanError) as ei:
        read_spanner(path, PointSet(np.eye(2)))
    assert ei.value.code == "bad_index"


def test_halfspaces(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("1,0,1\n-1,0,1\n0,1,1\n0,-1,1\n")
    A, b = read_halfspaces(path)
    assert A.shape == (4, 2) and np.array_equal(b, np.ones(4))


def test_dumps_is_deterministic():
    assert dumps({"b": 0.1, "a": [1, 2]}) == dumps({"a": [1, 2], "b": 0.1})
    assert json.loads(dumps({"x": 0.1 + 0.2}))["x"] == 0.1 + 0.2
