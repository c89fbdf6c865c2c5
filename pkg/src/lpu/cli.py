"""Command-line runner: one subcommand per protocol, seeded and file based.

Every run writes its data files and a ``report.json`` into ``--out``. The
report holds the configuration echo, metrics, data-file names and
versions, and is byte-identical for identical configurations; wall-clock
time goes to a separate ``timing.json``. Files are staged in memory and
written only after the run succeeds, so a failed run leaves no partial
outputs.

Seeds: a campaign with master seed ``s`` gives member ``k`` the seed
``SeedSequence(s, spawn_key=(k,)).generate_state(1, uint64)[0]``;
protocols spawn per-task generators from their own seed the same way.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._validation import SchemaError
from .io import SCHEMA_VERSION, atomic_write_text, dumps, matrix_to_dict, read_json, tag

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
MATRICES = ("fourier6", "S6", "G6")


class UsageError(Exception):
    """Invalid command-line configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Outcome:
    metrics: dict
    files: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


def _plain(x):
    """JSON-ready copy with numpy scalars and arrays turned into Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} is stochastic: --seed is required")
    return args.seed


def _photons(text):
    from ._validation import check_occupation

    return check_occupation(text)


def _load_chip(spec):
    """A chip from a file, ``ideal`` or ``random:SEED``."""
    from .chip import ChipModel

    if spec is None:
        raise UsageError("--chip is required for the chip backend")
    if spec == "ideal":
        return ChipModel.ideal(6)
    if spec.startswith("random:"):
        return ChipModel.random(6, rng=int(spec.split(":", 1)[1]))
    if not os.path.exists(spec):
        raise UsageError(f"chip file {spec!r} does not exist")
    try:
        return ChipModel.from_dict(read_json(spec, "chip"))
    except (SchemaError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid chip file {spec!r}: {exc}") from exc


def _load_calibration(path):
    from .chip import CalibrationTable

    if path is None:
        return None
    if not os.path.exists(path):
        raise UsageError(f"calibration file {path!r} does not exist")
    return CalibrationTable.from_dict(read_json(path, "calibration"))


def _matrix(name):
    from .data import G6, S6
    from .io import read_matrix
    from .protocols.chm import fourier

    if name == "fourier6":
        return fourier(6)
    if name == "S6":
        return S6
    if name == "G6":
        return G6.astype(complex)
    if not os.path.exists(name):
        raise UsageError(f"matrix {name!r} is neither a builtin {MATRICES} nor a file")
    return read_matrix(name)


def _load_config(path):
    from .mesh import MeshConfig

    if not os.path.exists(path):
        raise UsageError(f"config file {path!r} does not exist")
    data = read_json(path)
    if data.get("schema") == tag("phasetable"):
        return MeshConfig.from_table([[tuple(e) for e in row] for row in data["table"]])
    return MeshConfig.from_dict(data)


def phase_table_dict(table):
    return {"schema": tag("phasetable"), "table": [[list(e) for e in row] for row in table]}


def _chip_provenance(args, chip):
    return {"chip_spec": args.chip, "chip_sha256": chip.digest()}


# ---- subcommands -----------------------------------------------------------


def cmd_compose(args):
    from .data import BSG_MATRIX, BSG_PHASES, HERALDED_CNOT_MATRIX, HERALDED_CNOT_PHASES
    from .mesh import MeshConfig, compose, gauge_fix
    from .io import read_matrix

    builtins = {"bsg": (BSG_PHASES, BSG_MATRIX), "heralded_cnot": (HERALDED_CNOT_PHASES, HERALDED_CNOT_MATRIX)}
    if (args.config is None) == (args.builtin is None):
        raise UsageError("give exactly one of --config or --builtin")
    ref = None
    if args.builtin:
        table, ref = builtins[args.builtin]
        config = MeshConfig.from_table(table)
    else:
        config = _load_config(args.config)
    if args.reference:
        ref = read_matrix(args.reference)
    U = compose(config)
    metrics = {"mode_count": config.mode_count}
    if ref is not None:
        fixed, _, _ = gauge_fix(U, ref)
        metrics["max_deviation_after_gauge_fix"] = float(np.max(np.abs(fixed - ref)))
    return Outcome(metrics, {"matrix.json": dumps(matrix_to_dict(U))})


def cmd_decompose(args):
    from .mesh import compose, decompose, unitary_fidelity

    U = _matrix(args.matrix)
    config = decompose(U)
    fid = unitary_fidelity(compose(config), U)
    return Outcome({"unitary_fidelity": fid}, {"config.json": dumps(config.to_dict())})


def cmd_haar(args):
    from ._validation import spawn_generators
    from .mesh import haar_sample

    seed = _require_seed(args)
    configs = [haar_sample(args.modes, g).to_dict() for g in spawn_generators(seed, args.count)]
    data = {"schema": tag("configset"), "configs": configs}
    return Outcome({"count": args.count, "modes": args.modes}, {"configs.json": dumps(data)})


def cmd_simulate(args):
    from .chip import SourceModel, run_experiment
    from .fock import format_table, output_distribution
    from .mesh import compose

    config = _load_config(args.config)
    photons = _photons(args.photons)
    if args.backend == "exact":
        dist = output_distribution(compose(config), photons, args.model, args.subspace)
        table = dist.probabilities
        value, seed, metrics = "probability", None, {"retained_probability": dist.total}
    else:
        seed = _require_seed(args)
        if args.shots is None:
            raise UsageError("--shots is required for the chip backend")
        chip = _load_chip(args.chip)
        run = run_experiment(
            chip, config.without_output_phases(), SourceModel.ideal(photons), args.shots,
            np.random.default_rng(seed), calibration=_load_calibration(args.calibration),
        )
        table, value = run.counts, "count"
        metrics = {"events": run.events, "trials": run.trials}
    text = format_table(table, len(photons), sum(photons), args.subspace, seed, value)
    return Outcome(metrics, {"distribution.txt": text})


def cmd_boson_sample(args):
    from .protocols.boson import boson_sampling_campaign

    seed = _require_seed(args)
    photons = _photons(args.photons)
    chip = None
    if args.backend == "chip":
        chip = _load_chip(args.chip)
        if args.phase_noise is not None:
            chip = chip.replace(phase_noise=args.phase_noise)
    res = boson_sampling_campaign(
        args.unitaries, photons, args.shots, args.backend, seed, chip,
        _load_calibration(args.calibration),
    )
    counts, edges = res.histogram(args.bins)
    hist = "# bin_low bin_high count\n" + "".join(
        f"{lo:.6f} {hi:.6f} {c}\n" for lo, hi, c in zip(edges[:-1], edges[1:], counts)
    )
    fids = "# unitary fidelity\n" + "".join(f"{k} {float(f)!r}\n" for k, f in enumerate(res.fidelities))
    metrics = {"mean_fidelity": res.mean, "std_fidelity": res.std, "n_unitaries": len(res.fidelities)}
    return Outcome(metrics, {"histogram.txt": hist, "fidelities.txt": fids})


def cmd_ztl(args):
    from .fock import SUPPRESSION_ATOL, format_table, output_distribution, sample_counts
    from .protocols.boson import ztl_predicate, ztl_violation

    photons = _photons(args.photons)
    U = _matrix(args.matrix)
    suppressed = ztl_predicate(photons)
    dist = output_distribution(U, photons, args.model, "collision-free").normalized()
    seed = None
    if args.shots is None:
        # analytic zeros are reported as exact zeros
        table = {k: (0.0 if v <= SUPPRESSION_ATOL else v) for k, v in dist.probabilities.items()}
        value = "probability"
    else:
        seed = _require_seed(args)
        table, value = sample_counts(dist.probabilities, args.shots, seed), "count"
    metrics = {
        "nu": ztl_violation(table, suppressed),
        "suppressed_outcomes": sum(1 for k in table if suppressed(k)),
        "zero_outcomes": sum(1 for v in table.values() if v <= SUPPRESSION_ATOL),
        "outcomes": len(table),
    }
    text = format_table(table, len(photons), sum(photons), "collision-free", seed, value)
    return Outcome(metrics, {"outcomes.txt": text})


def cmd_bayes_verify(args):
    from ._validation import spawn_generators
    from .protocols.boson import bayesian_verify, events_to_threshold, sample_events, six_fold_distribution

    seed = _require_seed(args)
    U, photons = _matrix(args.matrix), _photons(args.photons)
    P_Q = six_fold_distribution(U, photons, "quantum")
    P_C = six_fold_distribution(U, photons, "classical")
    truth = P_Q if args.truth == "quantum" else P_C
    hits, finals, lines = [], [], ["# trial event confidence"]
    for t, gen in enumerate(spawn_generators(seed, args.trials)):
        trace = bayesian_verify(sample_events(truth, args.events, gen), P_Q, P_C, args.prior)
        hits.append(events_to_threshold(trace, args.threshold))
        finals.append(float(trace[-1]))
        lines += [f"{t} {k + 1} {float(v)!r}" for k, v in enumerate(trace)]
    reached = [h for h in hits if h is not None]
    metrics = {
        "median_events_to_threshold": float(np.median(reached)) if reached else None,
        "trials_reaching_threshold": len(reached),
        "mean_final_confidence": float(np.mean(finals)),
        "threshold": args.threshold,
    }
    return Outcome(metrics, {"trace.txt": "\n".join(lines) + "\n"})


def cmd_chm(args):
    from .protocols.chm import CHMDescriptor, chm, is_chm

    params = (args.theta1, args.theta2) if args.family == "F6_two_param" else ()
    U = chm(CHMDescriptor(args.family, params, args.N))
    tol = 5e-3 if args.family == "G6_instance" else 1e-9
    return Outcome(
        {"is_chm": is_chm(U, tol), "tolerance": tol, "N": U.shape[0]},
        {"matrix.json": dumps(matrix_to_dict(U))},
    )


def cmd_manifold(args):
    from .protocols.chm import parameter_grid, two_photon_manifold, ztl_violation_surface

    grid = parameter_grid(args.points)
    if args.quantity == "ztl":
        table = ztl_violation_surface(grid, grid, _photons(args.photons or "101010"), args.model)
    else:
        table = two_photon_manifold(
            grid, grid, _photons(args.photons or "110000"), _photons(args.output or "110000")
        )
    t1, t2 = table.argmin()
    metrics = {"argmin": [t1, t2], "min": float(table.values.min()), "max": float(table.values.max())}
    return Outcome(metrics, {"manifold.txt": table.to_text()})


def cmd_gate(args):
    from .protocols.gates import PHI_PLUS, gate_library, heralded_state, run_heralded_gate, state_fidelity, truth_table

    gate = gate_library(args.name, exact=not args.printed)
    chip, seed = None, None
    if args.backend == "chip":
        seed = _require_seed(args)
        if args.shots is None:
            raise UsageError("--shots is required for the chip backend")
        chip = _load_chip(args.chip)
    rng = np.random.default_rng(seed)
    if gate.fixed_input is not None:
        if args.backend == "exact":
            psi, p_herald, _ = heralded_state(gate)
            res = run_heralded_gate(gate)
            metrics = {
                "herald_probability": p_herald,
                "success_probability": res.success_probability,
                "bell_fidelity": state_fidelity(psi, PHI_PLUS),
            }
        else:
            res = run_heralded_gate(gate, None, args.shots, "chip", chip, rng)
            metrics = {"success_probability": res.success_probability, "events": res.events}
        lines = ["# bits probability"] + [f"{''.join(map(str, k))} {float(v)!r}" for k, v in sorted(res.distribution.items())]
        return Outcome(metrics, {"distribution.txt": "\n".join(lines) + "\n"})
    tt = truth_table(gate, args.backend, args.shots, chip, rng, _load_calibration(args.calibration))
    from .protocols.encoding import TruthTable

    ideal = TruthTable.from_unitary(gate.ideal, 2)
    lines = ["# input output probability"]
    for a, la in enumerate(tt.labels):
        for b, lb in enumerate(tt.labels):
            lines.append(f"{''.join(map(str, la))} {''.join(map(str, lb))} {float(tt.probabilities[a, b])!r}")
    metrics = {
        "success_probability": list(tt.success),
        "truth_table_fidelity": tt.statistical_fidelity(ideal),
        "efficiency_factors": {str(k): v for k, v in gate.efficiencies.items()},
    }
    return Outcome(metrics, {"truth_table.txt": "\n".join(lines) + "\n"})


def cmd_calibrate(args):
    from .chip import calibration_residuals, run_calibration

    seed = _require_seed(args)
    chip = _load_chip(args.chip)
    cal = run_calibration(
        chip, args.shots_per_fringe, np.random.default_rng(seed),
        precorrect_crosstalk=not args.no_precorrect,
    )
    res = calibration_residuals(chip, cal)
    values = np.array(list(res.values()))
    metrics = {
        "aggregate_rms": float(np.sqrt(np.mean(values ** 2))),
        "worst_rms": float(values.max()),
        "observable_heaters": len(values),
    }
    files = {"calibration.json": dumps(cal.to_dict())}
    if args.chip.startswith("random:") or args.chip == "ideal":
        files["chip.json"] = dumps(chip.to_dict())
    return Outcome(metrics, files, _chip_provenance(args, chip))


def cmd_benchmark_phase(args):
    from .chip import benchmark_phase_accuracy

    seed = _require_seed(args)
    chip = _load_chip(args.chip)
    if args.phase_noise is not None:
        chip = chip.replace(phase_noise=args.phase_noise)
    bench = benchmark_phase_accuracy(
        chip, _load_calibration(args.calibration), args.configs, args.shots, np.random.default_rng(seed)
    )
    curve = "# delta_phi model_fidelity\n" + "".join(
        f"{g:.6f} {float(c)!r}\n" for g, c in zip(bench.grid, bench.model_curve)
    )
    metrics = {"delta_phi": bench.delta_phi, "mean_fidelity": bench.mean_fidelity, "floor": bench.floor}
    return Outcome(metrics, {"model_curve.txt": curve}, _chip_provenance(args, chip))


def cmd_tomography(args):
    from .protocols.gates import CNOT, SINGLE_QUBIT_GATES
    from .tomography import (
        bootstrap_errors,
        mle_reconstruct,
        postselected_cnot_records,
        process_and_gate_fidelity,
        read_counts,
        records_to_dict,
        simulate_counts,
    )

    ideals = {"CNOT": CNOT, **SINGLE_QUBIT_GATES}
    ideal = ideals[args.ideal]
    files = {}
    seed = args.seed
    if args.counts:
        if not os.path.exists(args.counts):
            raise UsageError(f"counts file {args.counts!r} does not exist")
        records = read_counts(args.counts)
    else:
        seed = _require_seed(args)
        rng = np.random.default_rng(seed)
        if args.simulate == "postselected_cnot":
            chip = _load_chip(args.chip) if args.backend == "chip" else None
            records = postselected_cnot_records(args.shots, rng, args.backend, chip)
        else:
            records = simulate_counts(ideals[args.simulate], args.shots, rng)
        files["counts.json"] = dumps(records_to_dict(records))
    choi = mle_reconstruct(records, beta=args.beta)
    fp, fg = process_and_gate_fidelity(choi, ideal)
    metrics = {
        "process_fidelity": fp,
        "gate_fidelity": fg,
        "min_eigenvalue": choi.min_eigenvalue,
        "trace_residual": choi.trace_residual,
        "iterations": choi.iterations,
    }
    if args.resamples:
        if seed is None:
            raise UsageError("bootstrap resampling needs --seed")
        boot = bootstrap_errors(records, ideal, resamples=args.resamples, rng=seed + 1)
        metrics["process_fidelity_std"], metrics["gate_fidelity_std"] = boot.std
    files["choi.json"] = dumps(matrix_to_dict(choi.matrix))
    return Outcome(metrics, files)


def _member_seed(master, k):
    return int(np.random.SeedSequence(master, spawn_key=(k,)).generate_state(1, np.uint64)[0] >> 1)


def _run_member(argv):
    """Run one campaign member in-process; returns (metrics, None) or (None, error)."""
    try:
        args = build_parser().parse_args(argv)
        if args.command == "campaign":
            raise UsageError("campaigns cannot be nested")
        return _plain(args.func(args).metrics), None
    except (UsageError, Exception) as exc:  # member failures are recorded, not raised
        return None, f"{type(exc).__name__}: {exc}"


def _member_argv(spec):
    argv = [spec["command"]]
    for key, value in spec.get("args", {}).items():
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif value is not False and value is not None:
            argv += [flag, str(value)]
    return argv


def cmd_campaign(args):
    if args.spec:
        if not os.path.exists(args.spec):
            raise UsageError(f"campaign file {args.spec!r} does not exist")
        members = read_json(args.spec, "campaign")["members"]
    else:
        members = [{"command": args.generate, "args": json.loads(args.member_args or "{}")}
                   for _ in range(args.members)]
    if not members:
        raise UsageError("empty campaign: nothing to aggregate")
    master = _require_seed(args)
    argvs = []
    for k, spec in enumerate(members):
        spec = {"command": spec["command"], "args": dict(spec.get("args", {}))}
        spec["args"]["seed"] = _member_seed(master, k)
        argvs.append(_member_argv(spec))
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_run_member, argvs))
    else:
        results = [_run_member(a) for a in argvs]
    ok = [(k, m) for k, (m, err) in enumerate(results) if err is None]
    failures = [{"member": k, "error": err} for k, (m, err) in enumerate(results) if err is not None]
    if not ok:
        raise RuntimeError(f"every campaign member failed: {failures}")
    # numeric metrics are aggregated per subcommand, as "command.metric"
    aggregate = {}
    keys = sorted({(argvs[k][0], key) for k, m in ok for key in m})
    for command, key in keys:
        vals = [m[key] for k, m in ok if argvs[k][0] == command and key in m]
        if vals and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            arr = np.array(vals, dtype=float)
            aggregate[f"{command}.{key}"] = {
                "mean": float(arr.mean()),
                "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                "count": len(arr),
            }
    lines = ["# member seed key value"]
    for (k, m), argv in zip(ok, [argvs[k] for k, _ in ok]):
        for key, v in m.items():
            lines.append(f"{k} {argv[argv.index('--seed') + 1]} {key} {json.dumps(v, sort_keys=True)}")
    metrics = {
        "members": len(members),
        "succeeded": len(ok),
        "failures": failures,
        "aggregate": aggregate,
        "member_seeds": [int(a[a.index("--seed") + 1]) for a in argvs],
    }
    return Outcome(metrics, {"members.txt": "\n".join(lines) + "\n"})


# ---- parser ----------------------------------------------------------------


def _common(p, stochastic=True):
    p.add_argument("--out", default=".", help="output directory")
    if stochastic:
        p.add_argument("--seed", type=int, help="master seed (required for stochastic runs)")
    else:
        p.set_defaults(seed=None)


def build_parser():
    parser = _Parser(prog="lpu", description="Reprogrammable linear-optics processor simulator")
    parser.add_argument("--version", action="version", version=f"lpu {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compose", help="mesh setting -> transfer matrix")
    p.add_argument("--config", help="MeshConfig or phase-table file")
    p.add_argument("--builtin", choices=("bsg", "heralded_cnot"))
    p.add_argument("--reference", help="matrix file to compare against after gauge fixing")
    _common(p, stochastic=False)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("decompose", help="unitary -> mesh setting")
    p.add_argument("--matrix", required=True, help=f"matrix file or one of {MATRICES}")
    _common(p, stochastic=False)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("haar", help="Haar-random mesh settings")
    p.add_argument("--modes", type=int, default=6)
    p.add_argument("--count", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_haar)

    p = sub.add_parser("simulate", help="output distribution of a setting")
    p.add_argument("--config", required=True)
    p.add_argument("--photons", required=True, help="input pattern, e.g. 101010")
    p.add_argument("--model", choices=("quantum", "classical"), default="quantum")
    p.add_argument("--subspace", choices=("full", "collision-free"), default="full")
    p.add_argument("--backend", choices=("exact", "chip"), default="exact")
    p.add_argument("--shots", type=int)
    p.add_argument("--chip")
    p.add_argument("--calibration")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("boson-sample", help="boson-sampling campaign over Haar settings")
    p.add_argument("--unitaries", type=int, default=100)
    p.add_argument("--photons", default="111000")
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--backend", choices=("exact", "chip"), default="exact")
    p.add_argument("--chip")
    p.add_argument("--calibration")
    p.add_argument("--phase-noise", type=float)
    p.add_argument("--bins", type=int, default=20)
    _common(p)
    p.set_defaults(func=cmd_boson_sample)

    p = sub.add_parser("ztl", help="zero-transmission-law test")
    p.add_argument("--photons", default="101010")
    p.add_argument("--matrix", default="fourier6")
    p.add_argument("--model", choices=("quantum", "classical"), default="quantum")
    p.add_argument("--shots", type=int, help="sample counts instead of exact probabilities")
    _common(p)
    p.set_defaults(func=cmd_ztl)

    p = sub.add_parser("bayes-verify", help="Bayesian quantum-vs-classical test")
    p.add_argument("--photons", default="330000")
    p.add_argument("--matrix", default="fourier6")
    p.add_argument("--truth", choices=("quantum", "classical"), default="quantum")
    p.add_argument("--events", type=int, default=100)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--prior", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.99)
    _common(p)
    p.set_defaults(func=cmd_bayes_verify)

    p = sub.add_parser("chm", help="complex Hadamard matrix")
    p.add_argument("--family", choices=("fourier", "F6_two_param", "S6_isolated", "G6_instance"), default="fourier")
    p.add_argument("--theta1", type=float, default=np.pi)
    p.add_argument("--theta2", type=float, default=0.0)
    p.add_argument("--N", type=int, default=6)
    _common(p, stochastic=False)
    p.set_defaults(func=cmd_chm)

    p = sub.add_parser("manifold", help="surfaces over the F6 family")
    p.add_argument("--quantity", choices=("coincidence", "ztl"), default="coincidence")
    p.add_argument("--points", type=int, default=16)
    p.add_argument("--photons")
    p.add_argument("--output")
    p.add_argument("--model", choices=("quantum", "classical"), default="quantum")
    _common(p, stochastic=False)
    p.set_defaults(func=cmd_manifold)

    p = sub.add_parser("gate", help="heralded or post-selected gate")
    p.add_argument("--name", choices=("bsg", "heralded_cnot", "postselected_cnot"), required=True)
    p.add_argument("--backend", choices=("exact", "chip"), default="exact")
    p.add_argument("--shots", type=int)
    p.add_argument("--chip")
    p.add_argument("--calibration")
    p.add_argument("--printed", action="store_true", help="use the printed phases verbatim")
    _common(p)
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("calibrate", help="heater characterization on a virtual chip")
    p.add_argument("--chip", required=True, help="chip file, 'ideal' or 'random:SEED'")
    p.add_argument("--shots-per-fringe", type=int, default=100_000)
    p.add_argument("--no-precorrect", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("benchmark-phase", help="effective phase error from Haar vectors")
    p.add_argument("--chip", required=True)
    p.add_argument("--calibration")
    p.add_argument("--configs", type=int, default=100)
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--phase-noise", type=float)
    _common(p)
    p.set_defaults(func=cmd_benchmark_phase)

    p = sub.add_parser("tomography", help="process tomography")
    p.add_argument("--counts", help="counts file")
    p.add_argument("--simulate", choices=("CNOT", "X", "Y", "Z", "H", "T", "postselected_cnot"))
    p.add_argument("--ideal", choices=("CNOT", "X", "Y", "Z", "H", "T"), default="CNOT")
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--backend", choices=("exact", "chip"), default="exact")
    p.add_argument("--chip")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--resamples", type=int, default=0)
    _common(p)
    p.set_defaults(func=cmd_tomography)

    p = sub.add_parser("campaign", help="run and aggregate many subcommand runs")
    p.add_argument("--spec", help="campaign file with a members list")
    p.add_argument("--generate", help="subcommand to repeat")
    p.add_argument("--members", type=int, default=0)
    p.add_argument("--member-args", help="JSON object of flags for generated members")
    p.add_argument("--workers", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_campaign)
    return parser


def _config_echo(args):
    skip = {"func", "out"}
    return _plain({k: v for k, v in sorted(vars(args).items()) if k not in skip})


def run(args):
    """Execute parsed ``args`` and write outputs; returns the report dict."""
    start = time.perf_counter()
    outcome = args.func(args)
    report = {
        "schema": tag("report"),
        "protocol": args.command,
        "config": _config_echo(args),
        "metrics": _plain(outcome.metrics),
        "files": sorted(outcome.files),
        "provenance": {"lpu_version": __version__, "schema_version": SCHEMA_VERSION, **outcome.provenance},
    }
    for name, text in sorted(outcome.files.items()):
        atomic_write_text(os.path.join(args.out, name), text)
    atomic_write_text(os.path.join(args.out, "report.json"), dumps(report))
    timing = {"schema": tag("timing"), "wall_clock_seconds": time.perf_counter() - start}
    atomic_write_text(os.path.join(args.out, "timing.json"), dumps(timing))
    return report


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        report = run(args)
    except UsageError as exc:
        print(f"lpu: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure: nothing partial was written
        print(f"lpu: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(report["metrics"], sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
