"""Classical shadows over the global Clifford group.

Standard estimation, robust-shadow calibration and inversion, and shadows
whose circuits are protected by check sandwiches (optionally extrapolated in
the number of check layers).
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, tableau_to_gates
from .extrap import DEFAULT_B_BOUNDS, FitResult, Series, fit_model
from .noise import NoiseModel
from .pauli import CliffordTableau, PauliString, random_clifford
from .pcs import CheckNotFound, CheckPair, SandwichPlan, build_sandwich, find_check_pair, max_checks, propagate, search_rights, z_rights
from .sim import PostSelectionStarved, density_matrix_reference, run_shots

PROTECTIONS = ("none", "clifford_only", "full_circuit")
# Label of the CHANNEL marker placed right after the random Clifford.  It is
# a no-op unless the noise model defines a channel under this label.
SHADOW_CHANNEL = "shadow"
DEFAULT_SUBSETS = (100, 400, 1000, 4000, 10000)
SAMPLE_HEADER = "circuit_idx,seed,clifford_id,outcome_bits,kept,layers"
ESTIMATE_HEADER = "observable,N,method,estimate,abs_error"


@dataclass(frozen=True)
class EstimatorConfig:
    n_groups: int = 20
    shadow_circuits: int = 10000
    shots_per_circuit: int = 100
    subset_sizes: tuple[int, ...] = DEFAULT_SUBSETS

    def __post_init__(self):
        object.__setattr__(self, "subset_sizes", tuple(int(v) for v in self.subset_sizes))
        if self.n_groups < 1 or self.shadow_circuits < 1 or self.shots_per_circuit < 1:
            raise ValueError("counts must be positive")
        for size in self.subset_sizes:
            if size % self.n_groups:
                raise ValueError(f"n_groups={self.n_groups} does not divide N={size}")
            if size > self.shadow_circuits:
                raise ValueError(f"N={size} exceeds the {self.shadow_circuits} collected circuits")


@dataclass(frozen=True)
class ShadowSample:
    clifford: CliffordTableau
    outcome: str
    protected: bool = False
    kept: bool = True
    circuit_idx: int = 0

    def __post_init__(self):
        if len(self.outcome) != self.clifford.n:
            raise ValueError("outcome width must equal the register size")
        if not self.protected and not self.kept:
            raise ValueError("unprotected samples are always kept")


def clifford_id(t: CliffordTableau) -> str:
    return hashlib.sha1(repr(t.key()).encode()).hexdigest()[:16]


@dataclass
class ShadowData:
    """Outcomes of ``C`` shadow circuits with ``S`` shots each.

    ``outcomes[i, s]`` packs the measured bits with qubit ``j`` at bit ``j``;
    ``kept`` is the post-selection verdict (all true when unprotected).
    """

    n: int
    tableaux: list[CliffordTableau]
    seeds: list[int]
    outcomes: np.ndarray
    kept: np.ndarray
    layers: int = 0
    protection: str = "none"
    rights: tuple[PauliString, ...] = ()

    @property
    def n_circuits(self) -> int:
        return len(self.tableaux)

    @property
    def shots_per_circuit(self) -> int:
        return self.outcomes.shape[1]

    @property
    def protected(self) -> bool:
        return self.layers > 0

    def keep_rate(self) -> float:
        return float(self.kept.mean())

    def samples(self) -> list[ShadowSample]:
        out = []
        for i, t in enumerate(self.tableaux):
            for s in range(self.shots_per_circuit):
                bits = "".join(str((int(self.outcomes[i, s]) >> j) & 1) for j in range(self.n))
                out.append(ShadowSample(t, bits, self.protected, bool(self.kept[i, s]), i))
        return out

    def csv_lines(self) -> list[str]:
        lines = [SAMPLE_HEADER]
        for i, t in enumerate(self.tableaux):
            cid = clifford_id(t)
            for s in range(self.shots_per_circuit):
                bits = "".join(str((int(self.outcomes[i, s]) >> j) & 1) for j in range(self.n))
                lines.append(f"{i},{self.seeds[i]},{cid},{bits},{int(self.kept[i, s])},{self.layers}")
        return lines


# ---------------------------------------------------------------------------
# preparation circuits


def pauli_rotation_gates(p: PauliString, theta: float) -> list[Gate]:
    """``exp(-i theta P / 2)`` as basis changes, a CX ladder and one RZ."""
    qs = p.qubits()
    if not qs:
        raise ValueError("rotation generator must be non-identity")
    into: list[Gate] = []
    for q in qs:
        c = p.char(q)
        if c == "X":
            into.append(Gate("H", (q,)))
        elif c == "Y":
            into += [Gate("SDG", (q,)), Gate("H", (q,))]
    ladder = [Gate("CX", (a, b)) for a, b in zip(qs, qs[1:])]
    body = into + ladder + [Gate("RZ", (qs[-1],), angle=float(theta))]
    undo = [g.inverse() for g in reversed(into + ladder)]
    sign = p.sign
    if sign < 0:
        body[-1] = Gate("RZ", (qs[-1],), angle=-float(theta))
    return body + undo


# Stand-ins for small chemistry ansatzes: reference occupation followed by
# Pauli-exponential entanglers.  Generators within a set commute, so n
# independent commuting rights pass through the whole preparation.
_DEFAULT_GENERATORS = {
    4: (("YXXX", 0.9), ("XYXX", -0.45)),
    8: (("YXXXIIII", 0.8), ("IIIIYXXX", -0.6), ("IIXXXYII", 0.35), ("XYIIIIXX", 0.25)),
}


def rotation_prep(n: int, generators: Sequence[tuple[str, float]] | None = None,
                  occupied: Sequence[int] | None = None, seed: int | None = None) -> Circuit:
    """Reference state ``X`` on ``occupied`` qubits, then Pauli rotations.

    Without explicit generators the built-in set for ``n`` is used; if there
    is none, ``seed`` draws ``n`` random weight-4 (or weight-n) generators and
    angles.
    """
    occupied = list(range(n // 2)) if occupied is None else list(occupied)
    notes = []
    if generators is None:
        if n in _DEFAULT_GENERATORS and seed is None:
            generators = _DEFAULT_GENERATORS[n]
        else:
            rng = np.random.default_rng(seed)
            gens = []
            w = min(4, n)
            for _ in range(n):
                qs = sorted(rng.choice(n, size=w, replace=False).tolist())
                label = ["I"] * n
                for q in qs:
                    label[q] = "XYZ"[int(rng.integers(3))]
                gens.append(("".join(label), float(rng.uniform(-1, 1))))
            generators = tuple(gens)
    gates = [Gate("X", (q,)) for q in occupied]
    for label, theta in generators:
        p = PauliString.from_label(label)
        if p.n != n:
            raise ValueError(f"generator {label} does not act on {n} qubits")
        gates += pauli_rotation_gates(p, theta)
        notes.append(f"rotation {label} {theta!r}")
    return Circuit(n, 0, tuple(gates), label=f"rotation_prep_{n}", seed=seed, notes=tuple(notes))


def default_observables(n: int) -> list[PauliString]:
    """All single-Z and double-Z strings."""
    obs = [PauliString.single(n, q, "Z") for q in range(n)]
    for a, b in itertools.combinations(range(n), 2):
        obs.append(PauliString(n, 0, (1 << a) | (1 << b)))
    return obs


def ideal_expectations(prep: Circuit, observables: Sequence[PauliString]) -> dict[str, float]:
    res = density_matrix_reference(prep, NoiseModel())
    return {str(o): res.expectation(o, post_select=False) for o in observables}


# ---------------------------------------------------------------------------
# collection


def circuit_seed(master: int, idx: int) -> int:
    """Seed of shadow circuit ``idx``; independent of collection order."""
    return int(np.random.SeedSequence(master, spawn_key=(idx,)).generate_state(1, np.uint64)[0])


def _master(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def shadow_rights(prep: Circuit, protection: str, layers: int) -> list[PauliString]:
    n = prep.n_data
    if layers == 0 or protection == "none":
        return []
    if protection == "clifford_only":
        return z_rights(n, layers)
    return search_rights(prep, layers)


def collect_shadows(prep: Circuit, noise: NoiseModel, cfg: EstimatorConfig, protection: str = "none",
                    layers: int = 0, rng=0, n_circuits: int | None = None, shots: int | None = None,
                    rights: Sequence[PauliString] | None = None) -> ShadowData:
    """Run ``n_circuits`` shadow circuits of ``shots`` shots each.

    Circuit ``i`` draws its Clifford and its noise from ``circuit_seed(master,
    i)``, so the same master seed gives the same Cliffords under every
    protection, layer count and noise model.
    """
    n = prep.n_data
    if protection not in PROTECTIONS:
        raise ValueError(f"protection must be one of {PROTECTIONS}")
    if protection == "none" and layers:
        raise ValueError("unprotected shadows take no check layers")
    if layers > max_checks(n, "z_basis"):
        raise ValueError(f"{layers} layers exceed the maximum {max_checks(n, 'z_basis')}")
    n_circuits = cfg.shadow_circuits if n_circuits is None else n_circuits
    shots = cfg.shots_per_circuit if shots is None else shots
    rights = list(rights) if rights is not None else shadow_rights(prep, protection, layers)
    rights = rights[:layers]
    if protection == "full_circuit":
        for r in rights:
            if find_check_pair(prep, r) is None:
                raise CheckNotFound(r, "state preparation")
    noise = noise.resolve(n + layers)
    master = _master(rng)
    channel = Gate("CHANNEL", tuple(range(n)), label=SHADOW_CHANNEL)
    # Rights pushed through the preparation once; the Clifford part is applied
    # per circuit from its tableau, which gives L = U R U^dagger exactly.
    through_prep = [r if protection == "clifford_only" else propagate(r, prep.gates) for r in rights]

    tableaux, seeds = [], []
    outcomes = np.zeros((n_circuits, shots), dtype=np.int64)
    kept = np.ones((n_circuits, shots), dtype=bool)
    weights = 1 << np.arange(n, dtype=np.int64)
    for i in range(n_circuits):
        seed = circuit_seed(master, i)
        t = random_clifford(n, np.random.default_rng(seed))
        u_gates = tuple(tableau_to_gates(t)) + (channel,)
        if layers == 0:
            circ = Circuit(n, 0, prep.gates + u_gates).with_measurements()
        else:
            pairs = tuple(CheckPair(r, t.conjugate(p)) for r, p in zip(rights, through_prep))
            if protection == "clifford_only":
                plan = SandwichPlan(Circuit(n, 0, u_gates), pairs, scope="clifford_only", prefix=prep)
            else:
                plan = SandwichPlan(Circuit(n, 0, prep.gates + u_gates), pairs)
            circ = build_sandwich(plan, validate=False)
        rec = run_shots(circ, noise, shots, seed)
        outcomes[i] = rec.data.astype(np.int64) @ weights
        if layers:
            kept[i] = rec.kept_mask()
        tableaux.append(t)
        seeds.append(seed)
    return ShadowData(n, tableaux, seeds, outcomes, kept, layers, protection, tuple(rights))


# ---------------------------------------------------------------------------
# estimation


def _parity(v: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(v) & 1).astype(np.int64)


def snapshot_values(data: ShadowData, observable: PauliString) -> np.ndarray:
    """``<b| U O U^dagger |b>`` per shot, each in {-1, 0, +1}."""
    if observable.n != data.n:
        raise ValueError("observable size does not match the shadows")
    if not observable.is_hermitian or observable.weight == 0:
        raise ValueError("observable must be a traceless Hermitian Pauli")
    vals = np.zeros(data.outcomes.shape, dtype=np.int8)
    for i, t in enumerate(data.tableaux):
        img = t.conjugate(observable)
        if img.x:
            continue
        vals[i] = img.sign * (1 - 2 * _parity(data.outcomes[i] & img.z))
    return vals


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    group_means: tuple[float, ...] = field(repr=False, default=())


def median_of_means(sums: np.ndarray, counts: np.ndarray, n_groups: int) -> Estimate:
    """Median over ``n_groups`` contiguous equal blocks of per-unit sums.

    ``std_error`` is the group-mean spread scaled by ``sqrt(pi/2)``, the
    large-sample efficiency loss of the median.
    """
    if len(sums) < n_groups:
        raise ValueError(f"{len(sums)} units cannot fill {n_groups} groups")
    if len(sums) % n_groups:
        raise ValueError(f"n_groups={n_groups} does not divide {len(sums)}")
    s = np.asarray(sums, dtype=float).reshape(n_groups, -1).sum(axis=1)
    c = np.asarray(counts, dtype=float).reshape(n_groups, -1).sum(axis=1)
    if np.any(c == 0):
        raise PostSelectionStarved("a median-of-means group has no kept samples")
    means = s / c
    err = math.sqrt(math.pi / 2) * float(np.std(means, ddof=1)) / math.sqrt(n_groups) if n_groups > 1 else math.inf
    return Estimate(float(np.median(means)), err, tuple(float(m) for m in means))


def select_circuits(n_total: int, size: int, seed: int) -> np.ndarray:
    """Random subset of ``size`` circuit indices (random order)."""
    if size > n_total:
        raise ValueError(f"cannot draw {size} of {n_total} circuits")
    return np.random.default_rng([seed, size]).permutation(n_total)[:size]


def estimate_from_data(data: ShadowData, observable: PauliString, cfg: EstimatorConfig, coef: float | None = None,
                       circuits: np.ndarray | None = None) -> Estimate:
    """Median of means with groups formed from whole shadow circuits."""
    d = 2 ** data.n
    coef = d + 1 if coef is None else coef
    vals = snapshot_values(data, observable).astype(float)
    mask = data.kept
    sums = (vals * mask).sum(axis=1) * coef
    counts = mask.sum(axis=1)
    if circuits is not None:
        sums, counts = sums[circuits], counts[circuits]
    return median_of_means(sums, counts, cfg.n_groups)


def estimate_pauli(samples, observable: PauliString, cfg: EstimatorConfig, coef: float | None = None) -> float:
    """Shadow estimate of ``observable``.

    ``samples`` is a :class:`ShadowData` (groups are whole circuits) or a
    sequence of :class:`ShadowSample` (kept samples are split into
    ``n_groups`` equal blocks in order; a remainder is dropped).
    """
    if isinstance(samples, ShadowData):
        return estimate_from_data(samples, observable, cfg, coef).value
    kept = [s for s in samples if s.kept]
    if len(kept) < cfg.n_groups:
        raise ValueError(f"{len(kept)} kept samples cannot fill {cfg.n_groups} groups")
    n = kept[0].clifford.n
    coef = 2 ** n + 1 if coef is None else coef
    vals = []
    for s in kept:
        img = s.clifford.conjugate(observable)
        if img.x:
            vals.append(0.0)
            continue
        b = sum(int(ch) << j for j, ch in enumerate(s.outcome))
        vals.append(coef * img.sign * (1 - 2 * (bin(b & img.z).count("1") & 1)))
    size = len(vals) // cfg.n_groups
    arr = np.array(vals[: size * cfg.n_groups])
    return median_of_means(arr, np.ones_like(arr), cfg.n_groups).value


def snapshot_variance(data: ShadowData, observable: PauliString) -> float:
    """Empirical variance of single kept snapshots ``(d+1) <b|U O U^dagger|b>``."""
    vals = snapshot_values(data, observable)[data.kept].astype(float) * (2 ** data.n + 1)
    return float(np.var(vals, ddof=1))


# ---------------------------------------------------------------------------
# robust shadows


@dataclass(frozen=True)
class RsCalibration:
    """Estimated eigenvalue of the Clifford-twirled shadow channel.

    Noiselessly ``f = 1/(d+1)``.  ``implied_f_z`` maps ``f`` back to the
    Z-basis fidelity scale, where ``f > 0`` corresponds to ``F_Z > 1/d``.
    """

    f_hat: float
    rounds: int
    n: int
    std_error: float = math.inf
    epsilon: float | None = None
    delta: float | None = None
    f_z: float = 1.0

    @property
    def d(self) -> int:
        return 2 ** self.n

    @property
    def implied_f_z(self) -> float:
        d = self.d
        return (self.f_hat * (d * d - 1) + 1) / d


def zero_state_probability(t: CliffordTableau, outcomes: np.ndarray) -> np.ndarray:
    """``|<b|U|0^n>|^2`` for packed outcomes ``b`` from the noiseless tableau."""
    n = t.n
    rows = [t.conjugate(PauliString.single(n, q, "Z")) for q in range(n)]
    # eliminate X parts; what remains with x = 0 generates the Z-type stabilizers
    pivot_rows: list[PauliString] = []
    for col in range(n):
        bit = 1 << col
        idx = next((k for k, r in enumerate(rows) if r.x & bit), None)
        if idx is None:
            continue
        piv = rows.pop(idx)
        rows = [r * piv if r.x & bit else r for r in rows]
        pivot_rows.append(piv)
    z_type = rows
    prob = np.full(outcomes.shape, 2.0 ** -(n - len(z_type)))
    for r in z_type:
        ok = r.sign * (1 - 2 * _parity(outcomes & r.z)) == 1
        prob = np.where(ok, prob, 0.0)
    return prob


def rs_calibrate(noise: NoiseModel, n: int, rounds: int, cfg: EstimatorConfig, rng,
                 shots_per_round: int = 1, epsilon: float | None = None, delta: float | None = None,
                 f_z: float = 1.0) -> RsCalibration:
    """Estimate ``f`` from ``|0^n>`` shadow circuits under ``noise``.

    Each round samples a Clifford and measures it ``shots_per_round`` times;
    each shot contributes ``(d |<b|U|0>|^2 - 1) / (d - 1)``.
    """
    if rounds < cfg.n_groups:
        raise ValueError(f"rounds={rounds} must be at least n_groups={cfg.n_groups}")
    if rounds % cfg.n_groups:
        raise ValueError(f"n_groups={cfg.n_groups} does not divide rounds={rounds}")
    data = collect_shadows(Circuit(n, 0, ()), noise, cfg, "none", 0, rng, n_circuits=rounds, shots=shots_per_round)
    d = 2 ** n
    sums = np.zeros(rounds)
    for i, t in enumerate(data.tableaux):
        sums[i] = ((d * zero_state_probability(t, data.outcomes[i]) - 1) / (d - 1)).sum()
    est = median_of_means(sums, np.full(rounds, shots_per_round), cfg.n_groups)
    return RsCalibration(est.value, rounds, n, est.std_error, epsilon, delta, f_z)


def rs_estimate(samples, observable: PauliString, cal: RsCalibration, cfg: EstimatorConfig,
                circuits: np.ndarray | None = None) -> Estimate:
    """Shadow estimate with the robust inverse ``1/f_hat`` in place of ``d+1``."""
    if cal.f_hat <= 0:
        raise ValueError(f"degenerate calibration f_hat={cal.f_hat} (implied F_Z <= 1/d)")
    if isinstance(samples, ShadowData):
        if samples.n_circuits == 0:
            raise ValueError("no samples")
        return estimate_from_data(samples, observable, cfg, 1.0 / cal.f_hat, circuits)
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    return Estimate(estimate_pauli(samples, observable, cfg, 1.0 / cal.f_hat), math.nan)


def rs_sample_count(epsilon: float, delta: float, d: int, f_z: float = 1.0) -> int:
    """Calibration samples ``136 ln(2/delta) (1+eps^2) (1+1/d)^2 / (eps^2 (F_Z - 1/d)^2)``."""
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    if d < 2 or f_z <= 1 / d:
        raise ValueError("need d >= 2 and f_z > 1/d")
    r = 136 * math.log(2 / delta) * (1 + epsilon**2) * (1 + 1 / d) ** 2 / (epsilon**2 * (f_z - 1 / d) ** 2)
    return math.ceil(r)


# ---------------------------------------------------------------------------
# check-extrapolated shadows


@dataclass
class PceShadowResult:
    layer_data: list[ShadowData]
    fits: dict[str, FitResult]
    per_layer: dict[str, list[Estimate]]
    target: int


def pce_from_layers(layer_data: Sequence[ShadowData], observables: Sequence[PauliString], cfg: EstimatorConfig,
                    model: str, circuits: np.ndarray | None = None,
                    b_bounds: tuple[float, float] = DEFAULT_B_BOUNDS) -> PceShadowResult:
    n = layer_data[0].n
    target = max_checks(n, "z_basis")
    fits, per_layer = {}, {}
    xs = [d.layers for d in layer_data]
    for o in observables:
        ests = [estimate_from_data(d, o, cfg, circuits=circuits) for d in layer_data]
        series = Series.from_values(xs, [e.value for e in ests], [e.std_error for e in ests])
        fits[str(o)] = fit_model(model, series, target, b_bounds)
        per_layer[str(o)] = ests
    return PceShadowResult(list(layer_data), fits, per_layer, target)


def pce_shadow_estimate(prep: Circuit, noise: NoiseModel, cfg: EstimatorConfig, checks_used: int, model: str, rng,
                        protection: str = "full_circuit", observables: Sequence[PauliString] | None = None,
                        n_circuits: int | None = None) -> PceShadowResult:
    """Shadows with 1..checks_used layers, fitted per observable and evaluated at n layers.

    All layer counts reuse the same master seed, hence the same Cliffords.
    """
    if protection == "none":
        raise ValueError("check extrapolation needs a protected scope")
    master = _master(rng)
    observables = default_observables(prep.n_data) if observables is None else list(observables)
    rights = shadow_rights(prep, protection, checks_used)
    layer_data = [
        collect_shadows(prep, noise, cfg, protection, k, master, n_circuits, rights=rights[:k])
        for k in range(1, checks_used + 1)
    ]
    return pce_from_layers(layer_data, observables, cfg, model)
