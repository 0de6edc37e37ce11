"""Command-line entry point: ``pcebench <command> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from .circuit import Circuit, ideal_zero_state_expectation, mirror, random_clifford_circuit
from .extrap import CSV_HEADER, pce_pipeline, z_all, zne_pipeline
from .noise import NoiseModel


def _manifest(args, kind: str) -> tuple[bench.ExperimentManifest, Path | None]:
    if args.manifest:
        path = Path(args.manifest)
        m = bench.ExperimentManifest.load(path)
        if m.kind != kind:
            raise SystemExit(f"manifest kind {m.kind!r} does not match command {kind!r}")
        base = path.parent
    else:
        m = bench.default_manifest(kind, full_grid=args.full_grid, seed=args.seed or 0)
        base = None
    if args.seed is not None:
        m.seed = args.seed
    if args.shots is not None:
        m.shots = args.shots
    return m, base


def _out(args, name: str) -> Path:
    return Path(args.out_dir) / name


def _emit(args, name: str, lines) -> None:
    path = _out(args, name)
    bench.write_csv(path, lines)
    print(f"wrote {path} ({len(lines) - 1} rows)")


def cmd_heatmap(args) -> int:
    m, base = _manifest(args, "heatmap")
    rows, detail = bench.cmd_heatmap(m, base)
    _emit(args, m.outputs.get("csv", "heatmap.csv"), rows)
    _emit(args, m.outputs.get("detail", "heatmap_detail.csv"), detail)
    bench.write_csv(_out(args, "manifest.json"), [m.to_json().rstrip("\n")])
    return 0


def cmd_markov(args) -> int:
    m, base = _manifest(args, "markov")
    _emit(args, m.outputs.get("csv", "markov.csv"), bench.cmd_markov_check(m, base))
    bench.write_csv(_out(args, "manifest.json"), [m.to_json().rstrip("\n")])
    return 0


def cmd_shadow(args) -> int:
    m, base = _manifest(args, "shadow")
    if args.qubits is not None:
        m.qubits = [args.qubits]
        if args.qubits == 8 and not args.manifest:
            m.shadow["checks_used"] = 4
    if args.circuits is not None:
        m.shadow["shadow_circuits"] = args.circuits
        m.shadow["subset_sizes"] = [s for s in m.shadow["subset_sizes"] if s <= args.circuits]
        m.shadow["calibration_rounds"] = args.circuits
    estimates, summary = bench.cmd_shadow_compare(m, base)
    _emit(args, m.outputs.get("csv", "shadow_estimates.csv"), estimates)
    _emit(args, m.outputs.get("summary", "shadow_summary.csv"), summary)
    bench.write_csv(_out(args, "manifest.json"), [m.to_json().rstrip("\n")])
    return 0


def _load_inputs(args) -> tuple[Circuit, NoiseModel]:
    circ = Circuit.from_text(Path(args.circuit).read_text())
    noise = NoiseModel.load(args.noise) if args.noise else NoiseModel(p1=5e-4, p2=5e-3)
    return circ, noise


def _fit_lines(res, ideal: float | None) -> list[str]:
    lines = [CSV_HEADER, res.fit.csv_row(), "", "abscissa,value,std_error,kept,total"]
    for x, e in zip(res.abscissas, res.estimates):
        lines.append(f"{x!r},{e.value!r},{e.std_error!r},{e.kept_shots},{e.total_shots}")
    if ideal is not None:
        lines += ["", "ideal,abs_error", f"{ideal!r},{abs(res.extrapolated - ideal)!r}"]
    return lines


def cmd_pce(args) -> int:
    circ, noise = _load_inputs(args)
    checks = args.checks or bench.pce_checks_for(circ.n_data)
    res = pce_pipeline(circ, noise, checks, args.model, args.shots or 50000, args.seed or 0)
    ideal = float(ideal_zero_state_expectation(circ, z_all(circ.n_data))) if circ.is_clifford else None
    _emit(args, "pce.csv", _fit_lines(res, ideal))
    return 0


def cmd_zne(args) -> int:
    circ, noise = _load_inputs(args)
    scales = [float(s) for s in args.scales.split(",")]
    res = zne_pipeline(circ, noise, scales, args.model, args.shots or 50000, args.seed or 0)
    ideal = float(ideal_zero_state_expectation(circ, z_all(circ.n_data))) if circ.is_clifford else None
    _emit(args, "zne.csv", _fit_lines(res, ideal))
    return 0


def cmd_gen_circuit(args) -> int:
    seed = args.seed or 0
    c = random_clifford_circuit(args.qubits, args.depth, np.random.default_rng(seed), seed=seed)
    if args.mirror:
        c = mirror(c)
    path = _out(args, args.name or f"clifford_n{args.qubits}_d{args.depth}_s{seed}.txt")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(c.to_text())
    print(f"wrote {path} (ideal <Z...Z> = {ideal_zero_state_expectation(c, z_all(args.qubits))})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="experiment manifest (JSON)")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the manifest)")
    common.add_argument("--out-dir", default="out", help="directory for CSV outputs")
    common.add_argument("--shots", type=int, default=None, help="shot budget (overrides the manifest)")
    common.add_argument("--full-grid", action="store_true", help="use the full-size experiment grid")

    p = argparse.ArgumentParser(prog="pcebench", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("heatmap", parents=[common], help="PCE vs ZNE on random Clifford circuits")
    sp.set_defaults(func=cmd_heatmap)

    sp = sub.add_parser("markov-check", parents=[common], help="logical error vs number of perfect checks")
    sp.set_defaults(func=cmd_markov)

    sp = sub.add_parser("shadow-compare", parents=[common], help="shadow estimators vs number of circuits")
    sp.add_argument("--qubits", type=int, choices=[4, 8], default=None)
    sp.add_argument("--circuits", type=int, default=None, help="number of shadow circuits")
    sp.set_defaults(func=cmd_shadow)

    for name, func in (("pce", cmd_pce), ("zne", cmd_zne)):
        sp = sub.add_parser(name, parents=[common], help=f"run the {name.upper()} pipeline on one circuit")
        sp.add_argument("--circuit", required=True, help="circuit text file")
        sp.add_argument("--noise", help="noise model JSON (default p1=5e-4, p2=5e-3)")
        sp.add_argument("--model", default="exponential",
                        choices=["linear", "exponential"] + (["richardson"] if name == "zne" else []))
        if name == "pce":
            sp.add_argument("--checks", type=int, default=None, help="check layers used (default n/2, min 3)")
        else:
            sp.add_argument("--scales", default="1,3,5", help="comma-separated scale factors")
        sp.set_defaults(func=func)

    sp = sub.add_parser("gen-circuit", parents=[common], help="write a random Clifford circuit")
    sp.add_argument("--qubits", type=int, required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--mirror", action="store_true", help="append the inverse circuit")
    sp.add_argument("--name", default=None, help="output file name inside --out-dir")
    sp.set_defaults(func=cmd_gen_circuit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
