"""Stochastic Pauli noise models and their JSON file format."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CHANNEL_KINDS = ("depolarizing", "bitflip", "global_depolarizing")


@dataclass(frozen=True)
class ChannelSpec:
    """Rate and kind of a labelled ``CHANNEL`` marker.

    ``depolarizing``: with probability ``p`` a uniformly random non-identity
    Pauli on the marked qubits.  ``bitflip``: the same restricted to X-type
    strings.  ``global_depolarizing``: with probability ``p`` a uniformly
    random Pauli from the full group (identity included), i.e. the channel
    ``rho -> (1 - p) rho + p I / d``.
    """

    p: float
    kind: str = "depolarizing"

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise ValueError(f"channel rate {self.p} outside [0, 1)")
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")


@dataclass(frozen=True)
class GaussianSpec:
    mean1: float
    sd1: float
    mean2: float
    sd2: float
    seed: int


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate depolarizing rates with optional qubit/edge overrides.

    Every gate is followed, with the gate's rate, by a uniformly random
    non-identity Pauli on its support.  When ``noisy_checks`` is false every
    gate touching an ancilla is noiseless.
    """

    p1: float = 0.0
    p2: float = 0.0
    per_qubit: dict[int, tuple[float, float]] = field(default_factory=dict)
    per_edge: dict[tuple[int, int], float] = field(default_factory=dict)
    noisy_checks: bool = True
    gaussian: GaussianSpec | None = None
    channels: dict[str, ChannelSpec] = field(default_factory=dict)

    def __post_init__(self):
        rates = [self.p1, self.p2, *self.per_edge.values()]
        rates += [r for pair in self.per_qubit.values() for r in pair]
        for r in rates:
            if not 0 <= r < 1:
                raise ValueError(f"error rate {r} outside [0, 1)")
        edges = {tuple(sorted(k)): v for k, v in self.per_edge.items()}
        object.__setattr__(self, "per_edge", edges)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls()

    @property
    def is_noiseless(self) -> bool:
        return (
            self.p1 == 0 and self.p2 == 0 and self.gaussian is None
            and not any(self.per_qubit.values()) and not any(self.per_edge.values())
            and all(ch.p == 0 for ch in self.channels.values())
        )

    def rate_1q(self, q: int) -> float:
        if q in self.per_qubit:
            return self.per_qubit[q][0]
        return self.p1

    def rate_2q(self, a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        if key in self.per_edge:
            return self.per_edge[key]
        if a in self.per_qubit or b in self.per_qubit:
            pa = self.per_qubit.get(a, (self.p1, self.p2))[1]
            pb = self.per_qubit.get(b, (self.p1, self.p2))[1]
            return 0.5 * (pa + pb)
        return self.p2

    def channel(self, label: str) -> ChannelSpec | None:
        return self.channels.get(label)

    def validate_for(self, n_qubits: int) -> None:
        for q in self.per_qubit:
            if not 0 <= q < n_qubits:
                raise ValueError(f"override for undeclared qubit {q}")
        for a, b in self.per_edge:
            if not (0 <= a < n_qubits and 0 <= b < n_qubits):
                raise ValueError(f"override for undeclared edge {(a, b)}")

    def resolve(self, n_qubits: int) -> "NoiseModel":
        """Draw Gaussian per-qubit p1 and per-edge p2 rates, clamped to [0, 1).

        Returns a model with explicit tables and no Gaussian spec; explicit
        overrides already present win over the drawn values.
        """
        if self.gaussian is None:
            self.validate_for(n_qubits)
            return self
        g = self.gaussian
        ceiling = np.nextafter(1.0, 0.0)
        # One stream per qubit / edge so a rate does not depend on how many
        # qubits the circuit happens to have (e.g. extra check ancillas).
        per_qubit = {
            q: (float(np.clip(np.random.default_rng([g.seed, 0, q]).normal(g.mean1, g.sd1), 0.0, ceiling)), g.mean2)
            for q in range(n_qubits)
        }
        per_qubit.update(self.per_qubit)
        per_edge = {
            (a, b): float(np.clip(np.random.default_rng([g.seed, 1, a, b]).normal(g.mean2, g.sd2), 0.0, ceiling))
            for a, b in itertools.combinations(range(n_qubits), 2)
        }
        per_edge.update(self.per_edge)
        resolved = replace(self, per_qubit=per_qubit, per_edge=per_edge, gaussian=None)
        resolved.validate_for(n_qubits)
        return resolved

    # file format ----------------------------------------------------------
    def to_dict(self) -> dict:
        out: dict = {"p1": self.p1, "p2": self.p2, "noisy_checks": self.noisy_checks}
        if self.per_qubit:
            out["per_qubit"] = [
                {"qubit": q, "p1": r[0], "p2": r[1]} for q, r in sorted(self.per_qubit.items())
            ]
        if self.per_edge:
            out["per_edge"] = [
                {"qubits": [a, b], "p2": r} for (a, b), r in sorted(self.per_edge.items())
            ]
        if self.gaussian is not None:
            g = self.gaussian
            out["gaussian"] = {"mean1": g.mean1, "sd1": g.sd1, "mean2": g.mean2, "sd2": g.sd2, "seed": g.seed}
        if self.channels:
            out["channels"] = {k: {"p": c.p, "kind": c.kind} for k, c in sorted(self.channels.items())}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        gaussian = d.get("gaussian")
        return cls(
            p1=float(d.get("p1", 0.0)),
            p2=float(d.get("p2", 0.0)),
            per_qubit={int(e["qubit"]): (float(e.get("p1", d.get("p1", 0.0))), float(e.get("p2", d.get("p2", 0.0))))
                       for e in d.get("per_qubit", [])},
            per_edge={tuple(sorted(int(q) for q in e["qubits"])): float(e["p2"]) for e in d.get("per_edge", [])},
            noisy_checks=bool(d.get("noisy_checks", True)),
            gaussian=GaussianSpec(**gaussian) if gaussian else None,
            channels={k: ChannelSpec(float(v["p"]), v.get("kind", "depolarizing"))
                      for k, v in d.get("channels", {}).items()},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "NoiseModel":
        return cls.from_json(Path(path).read_text())
