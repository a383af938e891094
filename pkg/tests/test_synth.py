import numpy as np
import pytest
from scipy.integrate import trapezoid

from mei_dispatch.errors import InvalidParams
from mei_dispatch.mei import SegmentationConfig, segment_indices
from mei_dispatch.synth import GroundTruth, ResponseCurve, SynthParams, synth_generate


def test_same_seed_same_series():
    p = SynthParams(horizon_hours=200, seed=7)
    a, ta = synth_generate(p)
    b, tb = synth_generate(p)
    assert a == b and ta == tb
    c, _ = synth_generate(SynthParams(horizon_hours=200, seed=8))
    assert not a == c


def test_balance_identity_holds_exactly_without_noise():
    s, truth = synth_generate(SynthParams(horizon_hours=500, noise_scale=0.0))
    x = s.residual_demand()
    np.testing.assert_allclose(s.gen["gas"], truth.evaluate("gas", x), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(s.gen["hydro"], truth.evaluate("hydro", x), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(s.net_imports, x - s.gen["gas"] - s.gen["hydro"], atol=1e-9)


def test_response_curve_shape():
    c = ResponseCurve(100.0, 0.0, 50.0, 0.0, 10.0)
    assert c(0.0) == 100.0
    assert c(10.0) == pytest.approx(150.0)
    assert c(-10.0) == pytest.approx(50.0)
    assert c.slope(10.0) == pytest.approx(0.0)
    xs = np.linspace(-10, 10, 11)
    np.testing.assert_allclose(c.polynomial()(xs), c(xs))


def test_ground_truth_chord_is_mean_slope():
    truth = GroundTruth(ResponseCurve(1.0, 0.2, 3.0, 5.0, 8.0), ResponseCurve(0.0, 0.1, 1.0, 2.0, 6.0))
    lo, hi = 1.0, 4.0
    xs = np.linspace(lo, hi, 20001)
    for r in ("gas", "hydro", "import"):
        slope = np.gradient(truth.evaluate(r, xs), xs)
        assert truth.chord(r, lo, hi) == pytest.approx(trapezoid(slope, xs) / (hi - lo), abs=1e-6)
    total = sum(truth.chord(r, lo, hi) for r in ("gas", "hydro", "import"))
    assert total == pytest.approx(1.0)


def test_defaults_cover_every_segment(half_year):
    s, _ = half_year
    counts = np.bincount(segment_indices(s.residual_demand(), SegmentationConfig()), minlength=16)[1:]
    assert np.all(counts > 0)
    assert len(s) == 4380


@pytest.mark.parametrize("kw", [{"horizon_hours": 0}, {"horizon_hours": 10}, {"noise_scale": -1.0},
                                {"wind_persistence": 1.0}])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        SynthParams(**kw)
