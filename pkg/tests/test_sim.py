import math

import numpy as np
import pytest

from pcebench.circuit import Circuit, Gate
from pcebench.noise import ChannelSpec, NoiseModel
from pcebench.pauli import PauliString
from pcebench.pcs import SandwichPlan, build_sandwich, z_rights
from pcebench.sim import (
    PostSelectionStarved,
    density_matrix_reference,
    expectation_z_basis,
    run_shots,
)


def _z(label):
    return PauliString.from_label(label)


def test_single_qubit_depolarizing_closed_form():
    # X then depolarizing p: X and Y errors flip Z, so <Z> = -(1 - 4p/3).
    p = 0.09
    c = Circuit(n_data=1, gates=(Gate("X", (0,)),)).with_measurements()
    rho = density_matrix_reference(c, NoiseModel(p1=p))
    assert rho.expectation(_z("Z")) == pytest.approx(-(1 - 4 * p / 3), abs=1e-12)
    est = expectation_z_basis(run_shots(c, NoiseModel(p1=p), 40000, 1), _z("Z"))
    assert abs(est.value + (1 - 4 * p / 3)) < 4 * est.std_error


def test_two_qubit_depolarizing_closed_form():
    # 8 of the 15 two-qubit Paulis anticommute with ZI.
    p = 0.06
    c = Circuit(n_data=2, gates=(Gate("CX", (0, 1)),)).with_measurements()
    rho = density_matrix_reference(c, NoiseModel(p2=p))
    assert rho.expectation(_z("ZI")) == pytest.approx(1 - 16 * p / 15, abs=1e-12)


def test_noiseless_bell_parities():
    c = Circuit(n_data=2, gates=(Gate("H", (0,)), Gate("CX", (0, 1)))).with_measurements()
    rec = run_shots(c, NoiseModel.noiseless(), 2000, 3)
    assert expectation_z_basis(rec, _z("ZZ")).value == 1.0
    assert abs(expectation_z_basis(rec, _z("ZI")).value) < 0.1


def _non_clifford_sandwich():
    payload = Circuit(n_data=3, gates=(Gate("H", (0,)), Gate("RY", (1,), angle=0.7), Gate("CX", (0, 1)),
                                      Gate("RZ", (2,), angle=0.3), Gate("CX", (1, 2)), Gate("S", (2,))))
    rights = [_z("ZII"), _z("IIZ")]
    return build_sandwich(SandwichPlan.from_rights(payload, rights))


@pytest.mark.parametrize("obs", ["ZII", "IZZ", "ZZZ"])
def test_trajectories_match_density_reference(obs):
    c = _non_clifford_sandwich()
    noise = NoiseModel(p1=0.02, p2=0.05)
    exact = density_matrix_reference(c, noise)
    rec = run_shots(c, noise, 60000, 11)
    est = expectation_z_basis(rec, _z(obs))
    assert abs(est.value - exact.expectation(_z(obs))) < 4 * est.std_error
    keep = exact.keep_probability()
    assert abs(est.keep_rate - keep) < 4 * math.sqrt(keep * (1 - keep) / est.total_shots)


def test_labelled_channel_matches_density():
    c = Circuit(n_data=2, gates=(Gate("H", (0,)), Gate("CX", (0, 1)),
                                Gate("CHANNEL", (0, 1), label="g"))).with_measurements()
    noise = NoiseModel(channels={"g": ChannelSpec(0.3, "global_depolarizing")})
    exact = density_matrix_reference(c, noise).expectation(_z("ZZ"))
    assert exact == pytest.approx(0.7, abs=1e-12)
    est = expectation_z_basis(run_shots(c, noise, 40000, 2), _z("ZZ"))
    assert abs(est.value - exact) < 4 * est.std_error


def test_seeded_runs_are_reproducible():
    c = _non_clifford_sandwich()
    noise = NoiseModel(p1=0.02, p2=0.05)
    a = run_shots(c, noise, 25000, 42)
    b = run_shots(c, noise, 25000, 42)
    assert np.array_equal(a.data, b.data) and np.array_equal(a.ancilla, b.ancilla)
    assert not np.array_equal(a.data, run_shots(c, noise, 25000, 43).data)


def test_chunks_are_prefix_stable():
    # The first chunk of a longer run equals a run of exactly one chunk.
    c = _non_clifford_sandwich()
    noise = NoiseModel(p1=0.02, p2=0.05)
    short = run_shots(c, noise, 10000, 5)
    long = run_shots(c, noise, 15000, 5)
    assert np.array_equal(short.data, long.data[:10000])


def test_record_access():
    c = Circuit(n_data=2, gates=(Gate("X", (1,)),))
    rec = run_shots(build_sandwich(SandwichPlan.from_rights(c, z_rights(2, 1))), NoiseModel.noiseless(), 5, 0)
    assert rec[0].data_bits == "01" and rec[0].ancilla_bits == "0"
    assert expectation_z_basis(list(rec), _z("ZZ")).value == -1.0


def test_starved_post_selection():
    c = Circuit(n_data=1, n_ancilla=1, gates=(Gate("X", (1,)),)).with_measurements()
    with pytest.raises(PostSelectionStarved):
        expectation_z_basis(run_shots(c, NoiseModel.noiseless(), 10, 0), _z("Z"))


def test_observable_must_be_diagonal():
    c = Circuit(n_data=1, gates=(Gate("H", (0,)),)).with_measurements()
    with pytest.raises(ValueError):
        expectation_z_basis(run_shots(c, NoiseModel.noiseless(), 10, 0), _z("X"))
