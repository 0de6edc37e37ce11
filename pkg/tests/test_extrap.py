import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcebench.circuit import Circuit, Gate, mirror, random_clifford_circuit
from pcebench.extrap import (
    CSV_HEADER,
    FitResult,
    Series,
    exponential_grid,
    fit_exponential,
    fit_linear,
    fit_model,
    pce_pipeline,
    richardson,
    richardson_weights,
    spawn_seeds,
    z_all,
    zne_pipeline,
)
from pcebench.noise import NoiseModel


def brute_force_exponential(x, y, lo=0.6, hi=1.2, step=1e-5):
    """Independent grid search: batched pseudo-inverse solve for (a, c) at each b."""
    bs = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    basis = bs[:, None] ** x[None, :]
    design = np.stack([basis, np.ones_like(basis)], axis=2)
    coef = (np.linalg.pinv(design) @ y[:, None])[..., 0]
    rss = ((design @ coef[..., None])[..., 0] - y) ** 2
    i = int(np.argmin(rss.sum(axis=1)))
    return coef[i, 0], bs[i], coef[i, 1]


def vandermonde_weights(scales):
    c = np.asarray(scales, dtype=float)
    v = np.vander(c, increasing=True).T
    rhs = np.zeros(len(c))
    rhs[0] = 1.0
    return np.linalg.solve(v, rhs)


def test_series_requires_increasing_abscissas():
    with pytest.raises(ValueError):
        Series.from_values([1, 1, 2], [0, 0, 0])


def test_linear_fit_exact():
    s = Series.from_values([1, 2, 3], [0.5, 0.7, 0.9])
    f = fit_linear(s, 4)
    assert f.params == pytest.approx((0.3, 0.2))
    assert f.extrapolated == pytest.approx(1.1)
    assert f.residual_ss == pytest.approx(0, abs=1e-24)


@pytest.mark.parametrize("a,b,c", [(0.5, 0.9, 0.1), (-0.3, 0.75, 0.8), (0.2, 1.15, -0.1)])
def test_exponential_recovers_parameters(a, b, c):
    x = np.arange(1, 5, dtype=float)
    s = Series.from_values(x, a * b ** x + c)
    f = fit_exponential(s, 4)
    assert np.allclose(f.params, (a, b, c), atol=1e-6)
    assert np.allclose(brute_force_exponential(x, s.y), (a, b, c), atol=1e-6)


def test_exponential_matches_finer_grid_on_noisy_series():
    rng = np.random.default_rng(0)
    x = np.arange(1, 5, dtype=float)
    y = 0.6 * 0.85 ** x + 0.2 + rng.normal(0, 0.01, 4)
    f = fit_exponential(Series.from_values(x, y), 8)
    a, b, c = brute_force_exponential(x, y)
    # The coarse grid is within half a step of the finer optimum.
    assert abs(f.params[1] - b) <= 0.5e-4 + 1e-9


def test_exponential_ties_go_to_smallest_b():
    # A flat series is fit equally well by every b (with a = 0).
    f = fit_exponential(Series.from_values([1, 2, 3], [0.4, 0.4, 0.4]), 4)
    assert f.params[1] == 0.6 and f.extrapolated == pytest.approx(0.4)


def test_exponential_grid():
    g = exponential_grid((0.6, 1.2))
    assert len(g) == 6001 and g[0] == 0.6 and g[-1] == pytest.approx(1.2)
    with pytest.raises(ValueError):
        exponential_grid((1.0, 0.5))


def test_richardson_weights_135():
    assert np.allclose(richardson_weights([1, 3, 5]), [15 / 8, -5 / 4, 3 / 8], atol=1e-15)
    assert np.allclose(vandermonde_weights([1, 3, 5]), [15 / 8, -5 / 4, 3 / 8], atol=1e-12)


@given(st.lists(st.integers(1, 9), min_size=2, max_size=5, unique=True))
def test_richardson_matches_vandermonde_and_is_exact_on_polynomials(scales):
    scales = sorted(scales)
    w = richardson_weights(scales)
    assert np.allclose(w, vandermonde_weights(scales), atol=1e-8)
    coeffs = np.arange(1, len(scales) + 1) / 7.0
    ys = np.polyval(coeffs[::-1], np.array(scales, dtype=float))
    assert richardson(Series.from_values(scales, ys)).extrapolated == pytest.approx(coeffs[0], abs=1e-7)


def test_richardson_rejects_duplicates():
    with pytest.raises(ValueError):
        richardson_weights([1, 1])


def test_fit_model_dispatch():
    s = Series.from_values([1, 3, 5], [0.9, 0.7, 0.5])
    assert fit_model("richardson", s, 0).extrapolated == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_model("richardson", s, 2)
    with pytest.raises(ValueError):
        fit_model("quadratic", s, 0)


def test_csv_rows():
    assert CSV_HEADER.count(",") == 6
    assert FitResult("linear", (1.0, 2.0), 0.0, 4.0, 9.0).csv_row() == "linear,1.0,2.0,,0.0,4.0,9.0"
    row = richardson(Series.from_values([1, 3], [1.0, 0.5])).csv_row()
    assert row.startswith("richardson,1.5;-0.5,,,")


def test_spawn_seeds_deterministic():
    assert spawn_seeds(5, 3) == spawn_seeds(5, 3)
    assert len(set(spawn_seeds(5, 3))) == 3


def test_pce_pipeline_noiseless_mirror():
    c = mirror(random_clifford_circuit(3, 5, np.random.default_rng(1)))
    res = pce_pipeline(c, NoiseModel.noiseless(), 3, "exponential", 300, 0)
    assert res.extrapolated == pytest.approx(1.0, abs=1e-9)
    assert res.abscissas == [1, 2, 3] and res.fit.target == 3
    assert [e.kept_shots for e in res.estimates] == [100, 100, 100]


def test_pce_pipeline_argument_checks():
    c = Circuit(n_data=2, gates=(Gate("H", (0,)),))
    with pytest.raises(ValueError):
        pce_pipeline(c, NoiseModel.noiseless(), 2, "exponential", 100, 0)
    with pytest.raises(ValueError):
        pce_pipeline(c, NoiseModel.noiseless(), 3, "linear", 100, 0)


def test_zne_pipeline_noiseless():
    c = Circuit(n_data=2, gates=(Gate("X", (0,)), Gate("CX", (0, 1))))
    res = zne_pipeline(c, NoiseModel.noiseless(), [1, 3, 5], "richardson", 300, 0)
    assert res.extrapolated == pytest.approx(1.0)
    with pytest.raises(ValueError):
        zne_pipeline(c, NoiseModel.noiseless(), [2, 3], "linear", 300, 0)
