import json

import pytest

from pcebench.noise import ChannelSpec, GaussianSpec, NoiseModel


def test_json_round_trip(tmp_path):
    m = NoiseModel(p1=1e-3, p2=1e-2, per_qubit={1: (2e-3, 3e-2)}, per_edge={(2, 0): 0.05}, noisy_checks=False,
                   gaussian=GaussianSpec(1e-3, 2e-4, 1e-2, 2e-3, 9),
                   channels={"shadow": ChannelSpec(0.1, "global_depolarizing")})
    path = tmp_path / "noise.json"
    path.write_text(m.to_json())
    assert NoiseModel.load(path) == m
    assert json.loads(m.to_json())["per_edge"] == [{"qubits": [0, 2], "p2": 0.05}]


def test_rates_and_overrides():
    m = NoiseModel(p1=1e-3, p2=1e-2, per_qubit={1: (2e-3, 3e-2)}, per_edge={(0, 2): 0.05})
    assert m.rate_1q(0) == 1e-3 and m.rate_1q(1) == 2e-3
    assert m.rate_2q(2, 0) == 0.05
    assert m.rate_2q(0, 1) == pytest.approx(0.5 * (1e-2 + 3e-2))
    assert m.rate_2q(2, 3) == 1e-2


@pytest.mark.parametrize("bad", [dict(p1=-0.1), dict(p2=1.0), dict(per_edge={(0, 1): 1.5})])
def test_rejects_bad_rates(bad):
    with pytest.raises(ValueError):
        NoiseModel(**bad)


def test_rejects_unknown_channel_kind():
    with pytest.raises(ValueError):
        ChannelSpec(0.1, "amplitude")


def test_override_for_missing_qubit():
    with pytest.raises(ValueError):
        NoiseModel(per_qubit={7: (0.1, 0.1)}).resolve(4)


def test_gaussian_resolution_is_stable():
    m = NoiseModel(p1=0, p2=0, gaussian=GaussianSpec(0.002, 0.0005, 0.02, 0.005, 11))
    small, large = m.resolve(4), m.resolve(9)
    assert small.gaussian is None
    # A qubit's rate does not depend on how many qubits were resolved.
    assert all(small.per_qubit[q] == large.per_qubit[q] for q in range(4))
    assert all(small.per_edge[e] == large.per_edge[e] for e in small.per_edge)
    assert len({r[0] for r in large.per_qubit.values()}) == 9
    assert m.resolve(4) == small


def test_noiseless_flag():
    assert NoiseModel.noiseless().is_noiseless
    assert not NoiseModel(channels={"x": ChannelSpec(0.1)}).is_noiseless
