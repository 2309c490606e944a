import warnings

import numpy as np
import pytest
from hypothesis import given

import reference_models as ref
from conftest import models
from gstmar.model import NU_MAX, ModelError, ModelOrder
from gstmar.params import layout_for, pack, unpack


def test_reference_lengths():
    assert pack(ref.gstmar_512()).size == 25
    assert pack(ref.gstmar_512_shared()).size == 15
    assert pack(ref.gstmar_511()).size == 16


def test_natural_layout():
    vec = pack(ref.gstmar_512())
    np.testing.assert_allclose(vec[:7], [-0.013, 0.580, -0.079, 0.042, 0.006, 0.209, 3.070e-4])
    np.testing.assert_allclose(vec[-4:], [0.043, 0.592, 2.196, 4.320])


def test_shared_layout():
    vec = pack(ref.gstmar_512_shared())
    np.testing.assert_allclose(vec[:8], [-0.007, -0.079, -0.011, 0.782, -0.058, 0.134, -0.040, 0.036])


def test_names():
    names = layout_for(ModelOrder(2, 1, 1)).names()
    assert names == ["phi1,0", "phi1,1", "phi1,2", "sigma2_1", "phi2,0", "phi2,1", "phi2,2", "sigma2_2",
                     "alpha1", "nu2"]
    assert layout_for(ModelOrder(2, 1, 1), True).names()[2:4] == ["phi1", "phi2"]


@given(models())
def test_roundtrip(model):
    back = unpack(pack(model), model.order)
    np.testing.assert_allclose(pack(back), pack(model), rtol=0, atol=0)


@given(models())
def test_search_and_unconstrained_inverses(model):
    layout = layout_for(model.order)
    vec = pack(model)
    np.testing.assert_allclose(layout.from_search(layout.to_search(vec)), vec, rtol=1e-12)
    np.testing.assert_allclose(layout.from_unconstrained(layout.to_unconstrained(vec)), vec, rtol=1e-10)


def test_unconstrained_is_always_admissible(rng):
    order = ModelOrder(1, 1, 2)
    layout = layout_for(order)
    for _ in range(200):
        x = rng.normal(scale=5, size=layout.size)
        vec = layout.from_unconstrained(x)
        idx = layout.index
        assert np.all(vec[idx["sigma2"]] >= 0)
        a = vec[idx["alpha"]]
        assert np.all(a > 0) and a.sum() < 1
        assert np.all(vec[idx["nu"]] > 2)


def test_nu_clamped_quietly():
    layout = layout_for(ModelOrder(1, 0, 1))
    vec = layout.from_search([0.0, 0.5, 1.0, 100.0])
    assert vec[-1] == pytest.approx(1e7)


def test_unpack_errors():
    with pytest.raises(ModelError, match="length"):
        unpack(np.zeros(3), ModelOrder(1, 1, 1))
    bad = pack(ref.gstmar_512())
    bad[1] = 1.5  # non-stationary regime 1
    with pytest.raises(ModelError, match="stationary"):
        unpack(bad, ModelOrder(5, 1, 2))


def test_search_cap_has_no_roundoff_overshoot():
    order = ModelOrder(1, 0, 1)
    vec = layout_for(order).from_search([0.0, 0.5, 1.0, 1e3])
    assert vec[-1] == NU_MAX
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        unpack(vec, order)
