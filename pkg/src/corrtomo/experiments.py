"""Reproducible batch experiments driven by JSON configs.

``run`` executes one experiment per invocation and writes a manifest plus
result files into the output directory; ``compare`` tabulates two
reconstructed error models against stored ground-truth circuit means.  With
the same config and seed the result CSV/JSON files are byte identical
(the manifest carries the only timestamp).

Config schema (unknown keys are rejected)::

    {
      "experiment": "survival" | "exact-lot" | "lim" | "mle" | "bounds",
      "model":  {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 5}
              | {"kind": "dense", "sigma": ..., "eta": ..., "n_points": 2001}
              | {"kind": "constant", "epsilon": 0.01}
              | {"kind": "second_order", "sigma": ..., "eta": ..., "gate_gammas": {...}}
              | {"kind": "context", "labels": [...], "rates": {chi: {lam: eps}}, "initial": [...]},
      "seed": 0,            # optional, default 0
      "shots": null,        # optional, null = exact means
      "threads": null,      # optional worker threads for circuit batches
      "output_dir": "out",  # optional, else pass out_dir/--out
      "params": { ... experiment-specific ... }
    }

Exit codes: 0 success, 2 config validation error, 3 numerical failure
(singular Gram matrix, invalid moment sequence, optimizer breakdown).

Invoke from the shell as::

    python -m corrtomo.experiments run --config cfg.json --out outdir [--seed N] [--threads N]
    python -m corrtomo.experiments compare model_a.json model_b.json circuits.json [--out table.csv]
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .bounds import empirical_bound_check, gram_gauge_defect
from .device import (
    Circuit,
    RejectionSamplingError,
    random_identity_sequences,
    run_circuit,
    survival_curve,
)
from .io import save_json, save_matrix_csv, save_rows_csv
from .linear_inversion import gauge_fit_to_ideal, lim_reconstruct, svd_truncate, trial_sequences
from .mle import OptimizerConfig, fit, records_from_tomography
from .noise import (
    ContextModel,
    MomentSequenceError,
    build_low_freq_model,
    constant_depolarizing_model,
    dense_low_freq_model,
    depolarizing_channel,
    second_order_model,
    transition_decay,
)
from .ptm import ideal_qubit_ptms, ideal_seven_ptms
from .tomography import (
    ErrorModel,
    ProtocolFailure,
    collect_data,
    gauge_reconstruct,
    predict,
    select_fiducials,
    verify_factorization,
)
from .linear_inversion import collect_trial_data

__all__ = ["run", "compare", "build_model", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EXPERIMENTS = ("survival", "exact-lot", "lim", "mle", "bounds")


class ConfigError(ValueError):
    """Configuration file is malformed or inconsistent."""


def _require_keys(section: Mapping, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def build_model(spec: Mapping):
    """Instantiate a noise model from its config section."""
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ConfigError("model section must be an object with a 'kind' key")
    kind = spec["kind"]
    if kind == "low_freq":
        _require_keys(spec, {"kind", "sigma", "eta", "m"}, {"sigma", "eta", "m"}, "model")
        return build_low_freq_model(float(spec["sigma"]), float(spec["eta"]), int(spec["m"]))
    if kind == "dense":
        _require_keys(spec, {"kind", "sigma", "eta", "n_points", "cutoff"}, {"sigma", "eta"}, "model")
        return dense_low_freq_model(
            float(spec["sigma"]),
            float(spec["eta"]),
            n_points=int(spec.get("n_points", 2001)),
            cutoff=float(spec.get("cutoff", 12.0)),
        )
    if kind == "constant":
        _require_keys(spec, {"kind", "epsilon"}, {"epsilon"}, "model")
        return constant_depolarizing_model(float(spec["epsilon"]))
    if kind == "second_order":
        _require_keys(spec, {"kind", "sigma", "eta", "gate_gammas"}, {"sigma"}, "model")
        return second_order_model(
            float(spec["sigma"]),
            eta=float(spec.get("eta", 0.0)),
            gate_gammas=spec.get("gate_gammas"),
        )
    if kind == "context":
        _require_keys(spec, {"kind", "labels", "rates", "initial"}, {"labels", "rates"}, "model")
        labels = tuple(spec["labels"])
        ideal = ideal_qubit_ptms()
        per_pair = {}
        for chi in labels:
            for lam in labels:
                eps = float(spec["rates"][chi][lam])
                per_pair[(chi, lam)] = depolarizing_channel(eps).entries @ ideal[chi]
        initial = np.asarray(spec["initial"], dtype=float) if "initial" in spec else None
        return ContextModel(gate_labels=labels, per_pair=per_pair, initial=initial)
    raise ConfigError(f"unknown model kind {kind!r}")


def _load_config(config: str | Path | Mapping) -> dict:
    if isinstance(config, (str, Path)):
        try:
            config = json.loads(Path(config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(config, Mapping):
        raise ConfigError("config must be a JSON object")
    cfg = dict(config)
    _require_keys(
        cfg,
        {"experiment", "model", "seed", "shots", "threads", "output_dir", "params"},
        {"experiment", "model"},
        "config",
    )
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {cfg['experiment']!r}")
    cfg.setdefault("seed", 0)
    cfg.setdefault("shots", None)
    cfg.setdefault("threads", None)
    cfg.setdefault("params", {})
    if not isinstance(cfg["params"], Mapping):
        raise ConfigError("params must be an object")
    return cfg


# ---------------------------------------------------------------------------
# Experiment bodies.  Each returns {filename: writer} where the writer is a
# callable(path) producing the file, so nothing is written before the whole
# experiment has succeeded.
# ---------------------------------------------------------------------------


def _eval_circuits(model, params: Mapping, seed: int) -> list[Circuit]:
    """Identity-equivalent evaluation circuits shared by lim/mle predictions."""
    grid = params.get("eval_n_gates", list(range(0, 101, 10)))
    per_point = int(params.get("eval_circuits_per_point", 10))
    circuits: list[Circuit] = []
    root = np.random.SeedSequence(seed).spawn(len(grid))
    for n, seq in zip(grid, root):
        circuits.extend(random_identity_sequences(int(n), per_point, seed=np.random.default_rng(seq)))
    return circuits


def _prediction_rows(model, error_model: ErrorModel, circuits: Sequence[Circuit]) -> list[dict]:
    rows = []
    for c in circuits:
        actual = run_circuit(model, c).mean
        pred = predict(error_model, c)
        rows.append(
            {
                "n_gates": len(c),
                "gates": "".join(c.gates),
                "actual": actual,
                "predicted": pred,
                "abs_error": abs(pred - actual),
            }
        )
    return rows


def _survival_experiment(model, cfg: dict) -> dict:
    params = dict(cfg["params"])
    _require_keys(params, {"n_gates", "circuits_per_point", "eval_n_gates", "eval_circuits_per_point"},
                  {"n_gates"}, "params")
    rows = survival_curve(
        model,
        [int(n) for n in params["n_gates"]],
        circuits_per_point=int(params.get("circuits_per_point", 200)),
        shots=cfg["shots"],
        seed=cfg["seed"],
        threads=cfg["threads"],
    )
    circuits = _eval_circuits(model, params, cfg["seed"] + 1)
    records = [
        {"gates": list(c.gates), "mean": run_circuit(model, c).mean} for c in circuits
    ]
    return {
        "survival.csv": lambda p: save_rows_csv(
            p, rows, ["n_gates", "mean", "stderr", "circuits", "shots", "seed"]
        ),
        "records.json": lambda p: save_json(p, {"circuits": records}),
    }


def _exact_lot_experiment(model, cfg: dict) -> dict:
    params = dict(cfg["params"])
    _require_keys(
        params,
        {"d", "pool_max_len", "n_check_sequences", "check_max_len"},
        {"d"},
        "params",
    )
    d = int(params["d"])
    pool_max_len = int(params.get("pool_max_len", 3))
    pool = trial_sequences("custom", sequences=_sequences_up_to(pool_max_len)).sequences
    fiducials = select_fiducials(model, pool, d)
    data = collect_data(model, fiducials, shots=cfg["shots"], seed=cfg["seed"])
    gen = np.random.default_rng(cfg["seed"])
    n_seq = int(params.get("n_check_sequences", 100))
    max_len = int(params.get("check_max_len", 20))
    labels = tuple(model.gate_labels)
    sequences = [
        tuple(labels[i] for i in gen.integers(0, len(labels), size=int(gen.integers(1, max_len + 1))))
        for _ in range(n_seq)
    ]
    report = verify_factorization(data, model, sequences)
    error_model = gauge_reconstruct(data)
    out = {
        "gram.csv": lambda p: save_matrix_csv(p, data.gram),
        "factorization.json": lambda p: save_json(
            p,
            {
                "max_residual": report.max_residual,
                "cond_gram": report.cond_gram,
                "n_sequences": n_seq,
                "residuals": report.residuals,
            },
        ),
        "error_model.json": lambda p: save_json(p, error_model.to_json()),
    }
    for label, mat in data.gate_mats.items():
        out[f"gate_{label}.csv"] = (lambda m: (lambda p: save_matrix_csv(p, m)))(mat)
    return out


def _sequences_up_to(max_len: int) -> list[tuple[str, ...]]:
    seqs: list[tuple[str, ...]] = [()]
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(max_len):
        frontier = [s + (g,) for s in frontier for g in ("H", "S")]
        seqs.extend(frontier)
    return seqs


def _lim_experiment(model, cfg: dict) -> dict:
    params = dict(cfg["params"])
    _require_keys(
        params,
        {"preset", "d", "gauge_fit", "eval_n_gates", "eval_circuits_per_point"},
        {"d"},
        "params",
    )
    trial = trial_sequences(str(params.get("preset", "d7")), seed=cfg["seed"])
    data = collect_trial_data(model, trial, shots=cfg["shots"], seed=cfg["seed"])
    d = int(params["d"])
    trunc = svd_truncate(data.gram, data.gate_mats, d)
    out: dict = {
        "spectrum.csv": lambda p: save_rows_csv(
            p,
            [{"index": i, "singular_value": float(s)} for i, s in enumerate(trunc.singular_values)],
            ["index", "singular_value"],
        ),
    }
    if params.get("gauge_fit", True) and d in (4, 7):
        fit_res = gauge_fit_to_ideal(trunc, trial=trial)
        error_model = fit_res.error_model
        ideal = ideal_qubit_ptms() if d == 4 else ideal_seven_ptms(0.5)
        for label in sorted(error_model.gates):
            mat = error_model.gates[label]
            out[f"ptm_{label}.csv"] = (lambda m: (lambda p: save_matrix_csv(p, m)))(mat)
            out[f"ptm_diff_{label}.csv"] = (lambda m: (lambda p: save_matrix_csv(p, m)))(mat - ideal[label])
        out["gauge_fit.json"] = lambda p: save_json(
            p,
            {"objective": fit_res.objective, "n_evaluations": fit_res.n_evaluations,
             "converged": fit_res.converged},
        )
    else:
        error_model = lim_reconstruct(trunc)
    circuits = _eval_circuits(model, params, cfg["seed"] + 1)
    rows = _prediction_rows(model, error_model, circuits)
    out["error_model.json"] = lambda p: save_json(p, error_model.to_json())
    out["predictions.csv"] = lambda p: save_rows_csv(
        p, rows, ["n_gates", "gates", "actual", "predicted", "abs_error"]
    )
    return out


def _mle_experiment(model, cfg: dict) -> dict:
    params = dict(cfg["params"])
    _require_keys(
        params,
        {"preset", "l_size", "sigma_floor", "n_starts", "eval_n_gates", "eval_circuits_per_point"},
        {"l_size"},
        "params",
    )
    trial = trial_sequences(str(params.get("preset", "d7")), seed=cfg["seed"])
    data = collect_trial_data(model, trial, shots=cfg["shots"], seed=cfg["seed"])
    records = records_from_tomography(data)
    opt = OptimizerConfig(
        sigma_floor=float(params.get("sigma_floor", 1e-3)),
        n_starts=int(params.get("n_starts", 16)),
    )
    result = fit(records, int(params["l_size"]), optimizer_config=opt, seed=cfg["seed"])
    residuals = [predict(result.error_model, r.circuit) - r.mean for r in records[:200]]
    circuits = _eval_circuits(model, params, cfg["seed"] + 1)
    rows = _prediction_rows(model, result.error_model, circuits)
    return {
        "fit_report.json": lambda p: save_json(
            p,
            {
                **result.to_json(),
                "residual_head": residuals,
            },
        ),
        "error_model.json": lambda p: save_json(p, result.error_model.to_json()),
        "predictions.csv": lambda p: save_rows_csv(
            p, rows, ["n_gates", "gates", "actual", "predicted", "abs_error"]
        ),
    }


def _bounds_experiment(model, cfg: dict) -> dict:
    params = dict(cfg["params"])
    _require_keys(
        params,
        {"subspace_dims", "n_sequences", "max_len", "pool_max_len", "norm_kind", "gamma_grid"},
        set(),
        "params",
    )
    dims = [int(v) for v in params.get("subspace_dims", [3 * model.m + 1, 7, 3])]
    pool = _sequences_up_to(int(params.get("pool_max_len", 3)))
    n_seq = int(params.get("n_sequences", 1000))
    max_len = int(params.get("max_len", 20))
    norm_kind = str(params.get("norm_kind", "trace"))
    reports = {}
    for d in dims:
        fids = select_fiducials(model, pool, d)
        rep = empirical_bound_check(
            model, fids, n_sequences=n_seq, max_len=max_len, seed=cfg["seed"], norm_kind=norm_kind
        )
        reports[str(d)] = {**rep.to_json(), "gram_gauge_defect": gram_gauge_defect(model, fids)}
        if not rep.passed:
            raise ProtocolFailure(f"bound violated for subspace dimension {d}")
    gammas = [float(g) for g in params.get("gamma_grid", [0.0, 0.1, 0.5, 1.0, 2.0])]
    semigroup = max(
        float(np.max(np.abs(transition_decay(a) @ transition_decay(b) - transition_decay(a + b))))
        for a in gammas
        for b in gammas
    )
    return {
        "bounds_report.json": lambda p: save_json(
            p, {"subspaces": reports, "semigroup_max_deviation": semigroup}
        )
    }


_BODIES = {
    "survival": _survival_experiment,
    "exact-lot": _exact_lot_experiment,
    "lim": _lim_experiment,
    "mle": _mle_experiment,
    "bounds": _bounds_experiment,
}


def run(
    config: str | Path | Mapping,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> int:
    """Execute one configured experiment; returns the process exit code.

    ``out_dir``, ``seed`` and ``threads`` override the config values.  On
    success the output directory contains ``manifest.json`` (resolved config,
    package version, seeds, file list) and the experiment's result files; on
    a validation error nothing is written.
    """
    try:
        cfg = _load_config(config)
        if seed is not None:
            cfg["seed"] = int(seed)
        if threads is not None:
            cfg["threads"] = int(threads)
        target = out_dir if out_dir is not None else cfg.get("output_dir")
        if target is None:
            raise ConfigError("no output directory: set output_dir in the config or pass out_dir")
        model = build_model(cfg["model"])
        body = _BODIES[cfg["experiment"]]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        writers = body(model, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolFailure, MomentSequenceError, RejectionSamplingError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name, writer in sorted(writers.items()):
        writer(target / name)
        written.append(name)
    manifest = {
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": {k: v for k, v in cfg.items() if k != "output_dir"},
        "files": written,
    }
    save_json(target / "manifest.json", manifest)
    return EXIT_OK


def compare(
    model_report_a: str | Path | Mapping,
    model_report_b: str | Path | Mapping,
    circuits: str | Path | Sequence[Mapping],
    out_csv: str | Path | None = None,
) -> list[dict]:
    """Tabulate two reconstructed models against stored ground-truth means.

    ``circuits`` is a records payload (``{"circuits": [{"gates": [...],
    "mean": ...}]}``, as written by the survival experiment) or a plain list
    of such entries.  Returns one row per circuit with both predictions and
    absolute errors; optionally writes the table as CSV.
    """

    def load_model(source) -> ErrorModel:
        if isinstance(source, (str, Path)):
            source = json.loads(Path(source).read_text())
        if "error_model" in source:
            source = source["error_model"]
        return ErrorModel.from_json(source)

    model_a = load_model(model_report_a)
    model_b = load_model(model_report_b)
    if isinstance(circuits, (str, Path)):
        circuits = json.loads(Path(circuits).read_text())
    if isinstance(circuits, Mapping):
        circuits = circuits["circuits"]
    rows = []
    for entry in circuits:
        gates = tuple(entry["gates"])
        truth = float(entry["mean"])
        pred_a = predict(model_a, gates)
        pred_b = predict(model_b, gates)
        rows.append(
            {
                "n_gates": len(gates),
                "gates": "".join(gates),
                "truth": truth,
                "pred_a": pred_a,
                "pred_b": pred_b,
                "abs_error_a": abs(pred_a - truth),
                "abs_error_b": abs(pred_b - truth),
            }
        )
    if out_csv is not None:
        save_rows_csv(
            out_csv,
            rows,
            ["n_gates", "gates", "truth", "pred_a", "pred_b", "abs_error_a", "abs_error_b"],
        )
    return rows


def _main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="corrtomo.experiments", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a configured experiment")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--out", default=None, help="output directory (overrides config)")
    run_p.add_argument("--seed", type=int, default=None, help="seed override")
    run_p.add_argument("--threads", type=int, default=None, help="worker threads for circuit batches")
    cmp_p = sub.add_parser("compare", help="compare two reconstructed models on stored circuits")
    cmp_p.add_argument("model_a")
    cmp_p.add_argument("model_b")
    cmp_p.add_argument("circuits")
    cmp_p.add_argument("--out", default=None, help="write the comparison table as CSV")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, out_dir=args.out, seed=args.seed, threads=args.threads)
    rows = compare(args.model_a, args.model_b, args.circuits, out_csv=args.out)
    worst_a = max((r["abs_error_a"] for r in rows), default=0.0)
    worst_b = max((r["abs_error_b"] for r in rows), default=0.0)
    print(f"{len(rows)} circuits: max |error| model_a = {worst_a:.3e}, model_b = {worst_b:.3e}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(_main())
