import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vscreen.errors import ArgumentError, ShapeError
from vscreen.ml import apply_scaler, fit_scaler


def test_known_quartiles():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0], [100.0, 5.0]])
    p = fit_scaler(X)
    # linear interpolation: q1 = 2, median = 3, q3 = 4
    assert p.median.tolist() == [3.0, 5.0]
    assert p.iqr.tolist() == [2.0, 0.0]
    out = apply_scaler(X, p)
    assert out[:, 0].tolist() == [-1.0, -0.5, 0.0, 0.5, 48.5]
    assert (out[:, 1] == 0).all()


def test_width_mismatch_and_empty():
    p = fit_scaler(np.ones((3, 2)))
    with pytest.raises(ShapeError):
        apply_scaler(np.ones((3, 3)), p)
    with pytest.raises(ArgumentError):
        fit_scaler(np.empty((0, 2)))


@given(arrays(np.float64, st.tuples(st.integers(4, 40), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6)),
       st.floats(0.5, 10.0), st.floats(-100, 100))
@settings(max_examples=60, deadline=None)
def test_affine_invariance(X, a, b):
    """Scaled output does not change under a positive affine map of the inputs."""
    base = apply_scaler(X, fit_scaler(X))
    moved = a * X + b
    out = apply_scaler(moved, fit_scaler(moved))
    keep = fit_scaler(X).iqr > 1e-6 * (np.abs(X).max(axis=0) + 1)
    np.testing.assert_allclose(out[:, keep], base[:, keep], rtol=1e-6, atol=1e-6)
