import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcebench.circuit import Circuit, Gate, tableau_to_gates
from pcebench.noise import NoiseModel
from pcebench.pauli import CliffordTableau, PauliString, enumerate_single_qubit_cliffords, random_clifford
from pcebench.shadows import (
    EstimatorConfig,
    RsCalibration,
    ShadowData,
    ShadowSample,
    SAMPLE_HEADER,
    collect_shadows,
    default_observables,
    estimate_from_data,
    estimate_pauli,
    ideal_expectations,
    median_of_means,
    pauli_rotation_gates,
    rotation_prep,
    rs_estimate,
    rs_sample_count,
    select_circuits,
    shadow_rights,
    snapshot_values,
    zero_state_probability,
)

from dense import circuit_unitary, zero_state


def _dense_u(t: CliffordTableau) -> np.ndarray:
    return circuit_unitary(Circuit(n_data=t.n, gates=tuple(tableau_to_gates(t))))


def _dense_index(b: int, n: int) -> int:
    return sum(((b >> j) & 1) << (n - 1 - j) for j in range(n))


def _label(s):
    return PauliString.from_label(s)


def test_snapshot_worked_examples():
    # |0>, U = I, outcome 0: the Z snapshot is (d+1) = 3, the X snapshot is 0.
    cfg = EstimatorConfig(n_groups=1, subset_sizes=())
    s = [ShadowSample(CliffordTableau.identity(1), "0")]
    assert estimate_pauli(s, _label("Z"), cfg) == 3.0
    assert estimate_pauli(s, _label("X"), cfg) == 0.0
    assert estimate_pauli([ShadowSample(CliffordTableau.identity(1), "1")], _label("Z"), cfg) == -3.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_snapshot_values_match_dense(n, rng):
    for _ in range(4):
        t = random_clifford(n, rng)
        u = _dense_u(t)
        outcomes = np.arange(1 << n, dtype=np.int64)[None, :]
        data = ShadowData(n, [t], [0], outcomes, np.ones_like(outcomes, dtype=bool))
        for obs in ["".join(p) for p in itertools.product("IXYZ", repeat=n)][1:]:
            o = _label(obs)
            vals = snapshot_values(data, o)[0]
            m = u @ o.to_matrix() @ u.conj().T
            exact = [np.real(m[_dense_index(b, n), _dense_index(b, n)]) for b in range(1 << n)]
            assert np.allclose(vals, exact)


def test_single_qubit_snapshots_are_unbiased_exhaustively():
    # Average over the whole Clifford group with Born weights recovers <O>.
    psi = np.array([np.cos(0.3), np.exp(0.4j) * np.sin(0.3)])
    rho = np.outer(psi, psi.conj())
    for obs in "XYZ":
        o = _label(obs)
        total = 0.0
        for t in enumerate_single_qubit_cliffords():
            u = _dense_u(t)
            m = u @ o.to_matrix() @ u.conj().T
            for b in range(2):
                prob = np.real((u @ rho @ u.conj().T)[b, b])
                total += prob * 3 * np.real(m[b, b])
        assert total / 24 == pytest.approx(np.real(np.trace(o.to_matrix() @ rho)), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_zero_state_probability_matches_dense(n, rng):
    for _ in range(8):
        t = random_clifford(n, rng)
        amps = _dense_u(t) @ zero_state(n)
        b = np.arange(1 << n, dtype=np.int64)
        exact = np.abs(amps[[_dense_index(v, n) for v in b]]) ** 2
        assert np.allclose(zero_state_probability(t, b), exact)


def test_noiseless_calibration_value_is_exact_for_one_qubit():
    total = 0.0
    for t in enumerate_single_qubit_cliffords():
        p = zero_state_probability(t, np.array([0, 1]))
        total += float((p * (2 * p - 1)).sum())
    assert total / 24 == pytest.approx(1 / 3, abs=1e-15)


def test_pauli_rotation_matches_dense():
    p = _label("YXZ")
    c = Circuit(n_data=3, gates=tuple(pauli_rotation_gates(p, 0.7)))
    expected = math.cos(0.35) * np.eye(8) - 1j * math.sin(0.35) * p.to_matrix()
    assert np.allclose(circuit_unitary(c), expected)


def test_rotation_prep_ideal_values():
    prep = rotation_prep(4)
    ideal = ideal_expectations(prep, default_observables(4))
    assert len(ideal) == 10
    for key, v in ideal.items():
        if key.count("Z") == 1:
            assert abs(v) == pytest.approx(0.9004, abs=5e-4)
    assert len(shadow_rights(prep, "full_circuit", 4)) == 4


def test_bell_state_shadows():
    prep = Circuit(n_data=2, gates=(Gate("H", (0,)), Gate("CX", (0, 1))))
    cfg = EstimatorConfig(n_groups=10, shadow_circuits=3000, shots_per_circuit=1, subset_sizes=())
    data = collect_shadows(prep, NoiseModel.noiseless(), cfg, rng=3)
    for obs, exact in [("ZZ", 1.0), ("XX", 1.0), ("YY", -1.0), ("ZI", 0.0), ("XZ", 0.0)]:
        est = estimate_from_data(data, _label(obs), cfg)
        assert abs(est.value - exact) < 4 * est.std_error + 1e-9


def test_protected_noiseless_shadows_keep_everything():
    prep = rotation_prep(4)
    cfg = EstimatorConfig(n_groups=5, shadow_circuits=50, shots_per_circuit=4, subset_sizes=())
    for scope in ("clifford_only", "full_circuit"):
        data = collect_shadows(prep, NoiseModel.noiseless(), cfg, scope, 2, rng=1)
        assert data.keep_rate() == 1.0 and data.layers == 2


def test_collection_is_seeded_and_shares_cliffords_across_layers():
    prep = rotation_prep(4)
    cfg = EstimatorConfig(n_groups=5, shadow_circuits=20, shots_per_circuit=3, subset_sizes=())
    noise = NoiseModel(p1=0.01, p2=0.05)
    a = collect_shadows(prep, noise, cfg, "full_circuit", 1, rng=9)
    b = collect_shadows(prep, noise, cfg, "full_circuit", 1, rng=9)
    c = collect_shadows(prep, noise, cfg, "full_circuit", 3, rng=9)
    assert np.array_equal(a.outcomes, b.outcomes) and a.csv_lines() == b.csv_lines()
    assert [t.key() for t in a.tableaux] == [t.key() for t in c.tableaux]
    assert a.csv_lines()[0] == SAMPLE_HEADER and len(a.csv_lines()) == 61


def test_median_of_means_resists_outliers():
    sums = np.ones(100)
    sums[:5] = 1e6
    est = median_of_means(sums, np.ones(100), 20)
    assert est.value == 1.0
    assert np.mean(sums) > 1e4


def test_median_of_means_validation():
    with pytest.raises(ValueError):
        median_of_means(np.ones(7), np.ones(7), 2)


@given(st.integers(1, 500), st.integers(0, 2**31))
def test_select_circuits(size, seed):
    idx = select_circuits(500, size, seed)
    assert len(set(idx.tolist())) == size and idx.max() < 500
    assert np.array_equal(idx, select_circuits(500, size, seed))


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(n_groups=20, shadow_circuits=1000, subset_sizes=(110,))
    with pytest.raises(ValueError):
        EstimatorConfig(n_groups=20, shadow_circuits=100, subset_sizes=(400,))


def test_robust_estimate_with_ideal_calibration_equals_standard():
    prep = rotation_prep(4)
    cfg = EstimatorConfig(n_groups=5, shadow_circuits=100, shots_per_circuit=2, subset_sizes=())
    data = collect_shadows(prep, NoiseModel.noiseless(), cfg, rng=2)
    cal = RsCalibration(1 / 17, 100, 4)
    o = _label("ZIII")
    assert rs_estimate(data, o, cal, cfg).value == pytest.approx(estimate_from_data(data, o, cfg).value)
    assert rs_estimate(data.samples()[:100], o, cal, cfg).value == pytest.approx(
        estimate_pauli(data.samples()[:100], o, cfg))
    with pytest.raises(ValueError):
        rs_estimate(data, o, RsCalibration(0.0, 100, 4), cfg)


def test_rs_sample_count_arithmetic():
    # 136 ln(40) (1.01) (17/16)^2 / (0.01 (15/16)^2) = 65083.38
    assert rs_sample_count(0.1, 0.05, 16, 1.0) == 65084
    with pytest.raises(ValueError):
        rs_sample_count(0.1, 0.05, 16, 1 / 16)


@pytest.mark.parametrize("d", [4, 16, 256])
def test_rs_sample_count_epsilon_factor(d):
    base = 136 * math.log(2 / 0.05) * (1 + 1 / d) ** 2 / (1 - 1 / d) ** 2
    assert rs_sample_count(0.01, 0.05, d) / base == pytest.approx(1 / 0.01**2, rel=2e-4)
