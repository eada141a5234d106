"""
Tests for extended-real arithmetic.
"""
import numpy as np
import pytest

from monotone_rep.errors import ExtendedRealError
from monotone_rep.extended import INF, ext_add, format_ext


def test_saturating_sum():
    assert ext_add(1.0, 2.0) == 3.0
    assert ext_add(1.0, INF) == INF
    assert ext_add(INF, INF) == INF
    out = ext_add(np.array([1.0, INF]), np.array([2.0, 3.0]))
    assert out.tolist() == [3.0, INF]


def test_inf_minus_inf_is_refused():
    with pytest.raises(ExtendedRealError):
        ext_add(INF, -INF)


def test_subtraction_of_finite_terms():
    assert ext_add(INF, -5.0) == INF
    assert ext_add(2.0, -0.5) == 1.5


def test_json_formatting():
    data = {"a": np.float64(INF), "b": [np.int64(2), -INF], "c": np.array([0.5]), "d": np.bool_(False)}
    assert format_ext(data) == {"a": "inf", "b": [2, "-inf"], "c": [0.5], "d": False}


if __name__ == "__main__":
    print("=" * 60)
    print("Testing extended reals")
    print("=" * 60)
    raise SystemExit(pytest.main([__file__, "-q"]))
