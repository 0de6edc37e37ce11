"""Experiment manifests and the benchmark commands behind the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, ideal_zero_state_expectation, random_clifford_circuit
from .extrap import (CSV_HEADER, DEFAULT_B_BOUNDS, Series, fit_model, measure_scaled, pce_pipeline, z_all)
from .noise import ChannelSpec, NoiseModel
from .pauli import PauliString
from .pcs import MarkovModel, SandwichPlan, build_sandwich, markov_logical_error, z_rights
from .shadows import (ESTIMATE_HEADER, EstimatorConfig, collect_shadows, default_observables, estimate_from_data,
                      ideal_expectations, pce_from_layers, rotation_prep, rs_calibrate, rs_estimate, select_circuits,
                      shadow_rights)
from .sim import expectation_z_basis, run_shots

ZNE_SCALE_SETS = (
    (1, 1.1, 1.2),
    (1, 1.2, 1.6),
    (1, 3, 5),
    (1, 2, 3, 4, 5),
    (1, 3, 5, 7, 9),
    (1, 1.1, 1.2, 1.3, 1.4),
    (1, 1.2, 1.5, 1.8, 2),
)
ZNE_MODELS = ("richardson", "linear", "exponential")
HEATMAP_HEADER = "n,depth,pce_err,best_zne_err,best_zne_label,diff"
HEATMAP_DETAIL_HEADER = "n,depth,method,mean_abs_error"
MARKOV_HEADER = "m,epsilon,shots,kept,logical_errors,empirical,predicted,std_error"
SHADOW_SUMMARY_HEADER = "N,method,mean_abs_error"
KINDS = ("heatmap", "markov", "shadow")


class CellStarved(RuntimeError):
    """Not enough circuits with ideal value +1 within the retry cap."""


@dataclass
class ExperimentManifest:
    kind: str
    seed: int = 0
    qubits: list[int] = field(default_factory=list)
    depths: list[int] = field(default_factory=list)
    noise: dict = field(default_factory=dict)
    noise_file: str | None = None
    shots: int = 50000
    checks: list[int] = field(default_factory=list)
    zne_scale_sets: list[list[float]] = field(default_factory=list)
    models: list[str] = field(default_factory=list)
    circuits_per_cell: int = 20
    retry_cap: int = 20000
    epsilon: float = 0.1
    shadow: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"experiment kind must be one of {KINDS}")

    def noise_model(self, base_dir: Path | None = None) -> NoiseModel:
        if self.noise_file:
            path = Path(self.noise_file)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            return NoiseModel.load(path)
        return NoiseModel.from_dict(self.noise)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown manifest keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentManifest":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentManifest":
        return cls.from_json(Path(path).read_text())


def default_manifest(kind: str, full_grid: bool = False, seed: int = 0) -> ExperimentManifest:
    if kind == "heatmap":
        return ExperimentManifest(
            kind="heatmap",
            seed=seed,
            qubits=[4, 6, 8, 10, 12] if full_grid else [4, 6, 8],
            depths=[10, 15, 20, 25, 30, 35, 40] if full_grid else [10, 25, 40],
            noise={"p1": 5e-4, "p2": 5e-3},
            shots=50000,
            zne_scale_sets=[list(s) for s in ZNE_SCALE_SETS],
            models=list(ZNE_MODELS),
            outputs={"csv": "heatmap.csv", "detail": "heatmap_detail.csv"},
        )
    if kind == "markov":
        return ExperimentManifest(
            kind="markov",
            seed=seed,
            qubits=[12],
            checks=[0, 1, 2, 3, 4],
            shots=50000,
            epsilon=0.1,
            outputs={"csv": "markov.csv"},
        )
    if kind == "shadow":
        return ExperimentManifest(
            kind="shadow",
            seed=seed,
            qubits=[4],
            noise={"p1": 0.002, "p2": 0.02},
            checks=[1, 2, 3, 4],
            models=["linear", "exponential"],
            shadow={
                "shadow_circuits": 10000 if full_grid else 1000,
                "shots_per_circuit": 100,
                "subset_sizes": [100, 400, 1000, 4000, 10000] if full_grid else [100, 400, 1000],
                "n_groups": 20,
                "checks_used": 3,
                "protections": ["clifford_only", "full_circuit"],
                "calibration_rounds": 10000 if full_grid else 1000,
                "calibration_shots": 100,
            },
            outputs={"csv": "shadow_estimates.csv", "summary": "shadow_summary.csv"},
        )
    raise ValueError(f"unknown experiment kind {kind!r}")


def derive_seed(master: int, *key: int) -> int:
    """Integer seed for a job identified by ``key`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# heatmap


def plus_one_circuits(n: int, depth: int, count: int, master: int, retry_cap: int) -> list[Circuit]:
    """First ``count`` random Clifford circuits with ideal ``<Z...Z> = +1``.

    Attempt ``k`` uses seed ``derive_seed(master, k)``.
    """
    obs = z_all(n)
    out = []
    for k in range(retry_cap):
        seed = derive_seed(master, k)
        c = random_clifford_circuit(n, depth, np.random.default_rng(seed), seed=seed)
        if ideal_zero_state_expectation(c, obs) == 1:
            out.append(c)
            if len(out) == count:
                return out
    raise CellStarved(f"only {len(out)} of {count} +1-valued circuits for n={n}, depth={depth} "
                      f"after {retry_cap} attempts")


def pce_checks_for(n: int) -> int:
    """Half the register, but at least the 3 points an exponential fit needs."""
    return min(n, max(n // 2, 3))


def zne_label(model: str, scales: Sequence[float]) -> str:
    return model + ":" + ";".join(f"{s:g}" for s in scales)


def heatmap_cell(n: int, depth: int, manifest: ExperimentManifest, noise: NoiseModel) -> dict:
    """Mean absolute errors of PCE, every ZNE variant and the unmitigated run."""
    cell = derive_seed(manifest.seed, n, depth)
    circuits = plus_one_circuits(n, depth, manifest.circuits_per_cell, derive_seed(cell, 0), manifest.retry_cap)
    checks = pce_checks_for(n)
    errs: dict[str, list[float]] = {"pce_exponential": [], "unmitigated": []}
    for idx, c in enumerate(circuits):
        job = derive_seed(cell, 1, idx)
        pce = pce_pipeline(c, noise, checks, "exponential", manifest.shots, derive_seed(job, 0))
        errs["pce_exponential"].append(abs(pce.extrapolated - 1.0))
        raw = expectation_z_basis(run_shots(c.with_measurements(), noise, manifest.shots, derive_seed(job, 1)),
                                  z_all(n), post_select=False)
        errs["unmitigated"].append(abs(raw.value - 1.0))
        for s_idx, scales in enumerate(manifest.zne_scale_sets):
            estimates, _ = measure_scaled(c, noise, scales, manifest.shots, derive_seed(job, 2, s_idx))
            series = Series.from_values(list(scales), [e.value for e in estimates])
            for model in manifest.models:
                fit = fit_model(model, series, 0.0, DEFAULT_B_BOUNDS)
                errs.setdefault(zne_label(model, scales), []).append(abs(fit.extrapolated - 1.0))
    return {k: float(np.mean(v)) for k, v in errs.items()}


def cmd_heatmap(manifest: ExperimentManifest, base_dir: Path | None = None) -> tuple[list[str], list[str]]:
    """Rows of the heatmap CSV and of the per-method detail CSV."""
    noise = manifest.noise_model(base_dir)
    rows, detail = [HEATMAP_HEADER], [HEATMAP_DETAIL_HEADER]
    for n in manifest.qubits:
        for depth in manifest.depths:
            res = heatmap_cell(n, depth, manifest, noise)
            zne = {k: v for k, v in res.items() if k not in ("pce_exponential", "unmitigated")}
            # ties resolved by manifest order (dicts keep insertion order)
            best = min(zne, key=lambda k: zne[k])
            pce = res["pce_exponential"]
            rows.append(f"{n},{depth},{_fmt(pce)},{_fmt(zne[best])},{best},{_fmt(zne[best] - pce)}")
            for k, v in res.items():
                detail.append(f"{n},{depth},{k},{_fmt(v)}")
    return rows, detail


# ---------------------------------------------------------------------------
# Markov check

MARKOV_CHANNEL = "markov"


def markov_circuit(n: int, m: int) -> Circuit:
    """Identity payload holding one bit-flip channel, checked by Z on qubits 0..m-1."""
    payload = Circuit(n, 0, (Gate("CHANNEL", tuple(range(n)), label=MARKOV_CHANNEL),))
    if m == 0:
        return payload.with_measurements()
    return build_sandwich(SandwichPlan.from_rights(payload, z_rights(n, m)))


def cmd_markov_check(manifest: ExperimentManifest, base_dir: Path | None = None) -> list[str]:
    n = manifest.qubits[0] if manifest.qubits else 12
    eps = manifest.epsilon
    noise = NoiseModel(noisy_checks=False, channels={MARKOV_CHANNEL: ChannelSpec(eps, "bitflip")})
    rows = [MARKOV_HEADER]
    for m in manifest.checks:
        rec = run_shots(markov_circuit(n, m), noise, manifest.shots, derive_seed(manifest.seed, m))
        keep = rec.kept_mask()
        kept = int(keep.sum())
        wrong = int(rec.data[keep].any(axis=1).sum())
        emp = wrong / kept if kept else math.nan
        pred = markov_logical_error(MarkovModel(eps), m)
        sigma = math.sqrt(pred * (1 - pred) / kept) if kept else math.inf
        rows.append(f"{m},{_fmt(eps)},{manifest.shots},{kept},{wrong},{_fmt(emp)},{_fmt(pred)},{_fmt(sigma)}")
    return rows


# ---------------------------------------------------------------------------
# shadow comparison


@dataclass
class ShadowComparison:
    estimates: list[str]
    summary: list[str]
    errors: dict[tuple[int, str], float]


def _shadow_cfg(manifest: ExperimentManifest) -> EstimatorConfig:
    sh = manifest.shadow
    return EstimatorConfig(
        n_groups=int(sh.get("n_groups", 20)),
        shadow_circuits=int(sh.get("shadow_circuits", 10000)),
        shots_per_circuit=int(sh.get("shots_per_circuit", 100)),
        subset_sizes=tuple(sh.get("subset_sizes", (100, 400, 1000, 4000, 10000))),
    )


def shadow_comparison(manifest: ExperimentManifest, base_dir: Path | None = None,
                      prep: Circuit | None = None) -> ShadowComparison:
    """Unmitigated, robust, implemented-check and extrapolated-check shadow estimates.

    Every method sees the same Cliffords (one master seed) and, for each
    ``N``, the same random subset of circuits.
    """
    sh = manifest.shadow
    n = manifest.qubits[0]
    prep = rotation_prep(n) if prep is None else prep
    cfg = _shadow_cfg(manifest)
    noise = manifest.noise_model(base_dir)
    observables = ([PauliString.from_label(s) for s in sh["observables"]] if sh.get("observables")
                   else default_observables(n))
    ideal = ideal_expectations(prep, observables)
    master = derive_seed(manifest.seed, 0)
    checks_used = int(sh.get("checks_used", 3))
    implemented = sorted(set(manifest.checks) | set(range(1, checks_used + 1)))
    per_method: dict[str, object] = {}

    base = collect_shadows(prep, noise, cfg, "none", 0, master)
    cal = rs_calibrate(noise, n, int(sh.get("calibration_rounds", cfg.shadow_circuits)), cfg,
                       derive_seed(manifest.seed, 1), shots_per_round=int(sh.get("calibration_shots", 1)))
    layer_sets = {}
    for scope in sh.get("protections", ["clifford_only", "full_circuit"]):
        rights = shadow_rights(prep, scope, max(implemented))
        layer_sets[scope] = {k: collect_shadows(prep, noise, cfg, scope, k, master, rights=rights[:k])
                             for k in implemented}

    estimates, summary = [ESTIMATE_HEADER], [SHADOW_SUMMARY_HEADER]
    errors: dict[tuple[int, str], float] = {}
    for size in cfg.subset_sizes:
        subset = select_circuits(cfg.shadow_circuits, size, derive_seed(manifest.seed, 2))
        values: dict[str, dict[str, float]] = {}
        values["unmitigated"] = {str(o): estimate_from_data(base, o, cfg, circuits=subset).value for o in observables}
        values["robust"] = {str(o): rs_estimate(base, o, cal, cfg, circuits=subset).value for o in observables}
        for scope, layers in layer_sets.items():
            for k, data in layers.items():
                values[f"{scope}:{k}"] = {str(o): estimate_from_data(data, o, cfg, circuits=subset).value
                                          for o in observables}
            fit_layers = [layers[k] for k in range(1, checks_used + 1)]
            for model in manifest.models:
                res = pce_from_layers(fit_layers, observables, cfg, model, circuits=subset)
                values[f"{scope}:extrap{res.target}:{model}"] = {k: f.extrapolated for k, f in res.fits.items()}
        for method, vals in values.items():
            errs = []
            for o in observables:
                key = str(o)
                err = abs(vals[key] - ideal[key])
                errs.append(err)
                estimates.append(f"{key},{size},{method},{_fmt(vals[key])},{_fmt(err)}")
            errors[(size, method)] = float(np.mean(errs))
            summary.append(f"{size},{method},{_fmt(errors[(size, method)])}")
    return ShadowComparison(estimates, summary, errors)


def cmd_shadow_compare(manifest: ExperimentManifest, base_dir: Path | None = None) -> tuple[list[str], list[str]]:
    res = shadow_comparison(manifest, base_dir)
    return res.estimates, res.summary


def write_csv(path: Path, lines: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
