"""Command-line entry points.

Subcommands: simulate, refine, train, evaluate, sweep, report.  Every
command takes ``--config`` (JSON with a required ``version`` field,
unknown keys rejected), ``--seed``, ``--out``, and ``--jobs``, prints the
resolved config hash, and writes a manifest of output-file digests.  Runs
with equal config and seed are byte-identical.

Exit codes: 0 success, 2 config error, 3 IO error, 4 more than 10%
malformed ingestion rows, 5 suite assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import harness
from .compound import CoefficientCandidates, select_coefficient
from .distribution import CategoricalValueDistribution, bin_centers
from .harness import SuiteReport, SweepConfig, config_hash
from .mdp import (
    GeneratorConfig,
    MdpSizeError,
    StepAnnotation,
    TrajectoryAnnotation,
    mdp_to_json,
)
from .verifier import ConfigError, TabularVerifier, TrainConfig, train

log = logging.getLogger("commcs")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MALFORMED = 4
EXIT_SUITE = 5

CONFIG_VERSION = 1

_GENERATOR_KEYS = {
    "branching",
    "depth",
    "policy_concentration",
    "terminal_success_rate",
    "value_shape",
    "seed",
    "smoothing_jitter",
    "max_states",
}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)!r}")


def _dump_json(payload) -> str:
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), default=_json_default
    )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, payload) -> None:
    _write_text(path, _dump_json(payload) + "\n")


def _write_csv(path: Path, report: SuiteReport) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(report.columns)
        writer.writerows(report.rows)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, chash: str, seed: int, files: list[Path]) -> None:
    manifest = {
        "config_hash": chash,
        "seed": seed,
        "files": {p.name: _sha256(p) for p in sorted(files)},
    }
    _write_json(out / "manifest.json", manifest)


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_config(path: str, allowed: set) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    if obj.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config requires \"version\": {CONFIG_VERSION}")
    _check_keys(obj, allowed | {"version"}, "config")
    return obj


def _generator_config(obj: dict, seed: int) -> GeneratorConfig:
    _check_keys(obj, _GENERATOR_KEYS, "generator")
    fields = dict(obj)
    if "branching" in fields:
        fields["branching"] = tuple(fields["branching"])
    fields.setdefault("seed", seed)
    return GeneratorConfig(**fields)


def _candidates(obj, default: tuple[float, ...]) -> CoefficientCandidates:
    return CoefficientCandidates(tuple(obj) if obj is not None else default)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(config: dict, seed: int, out: Path) -> int:
    chash = config_hash({"cmd": "simulate", "config": config, "seed": seed})
    print(f"config_hash {chash}")
    num_problems = int(config.get("num_problems", 1))
    traj = int(config.get("trajectories_per_problem", 1))
    trials = int(config.get("trials", 8))
    gen = _generator_config(config.get("generator", {}), seed)
    problems, values = harness.make_problems(num_problems, gen, seed)
    benchmark = harness.make_benchmark(problems, values, traj, trials, seed)

    files = []
    for idx, mdp in enumerate(problems):
        path = out / f"mdp_{idx:04d}.json"
        _write_text(path, mdp_to_json(mdp) + "\n")
        files.append(path)
    ann_path = out / "annotations.jsonl"
    lines = []
    for ann in benchmark.annotations:
        for step_index, step in enumerate(ann.steps):
            row = {
                "problem_id": ann.problem_id,
                "trajectory_id": ann.trajectory_id,
                "step_index": step_index,
                "state_id": step.state_id,
                "is_terminal": step.is_terminal,
                "trials": step.trials,
                "successes": round(step.v_hat * step.trials),
            }
            if not step.is_terminal:
                row["next_trials"] = step.trials
                row["next_successes"] = round(step.q_hat * step.trials)
            lines.append(_dump_json(row))
    _write_text(ann_path, "".join(line + "\n" for line in lines))
    files.append(ann_path)
    _write_manifest(out, chash, seed, files)
    log.info("simulate: wrote %d problems, %d annotation rows", num_problems, len(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# refine


_ROW_REQUIRED = {
    "problem_id",
    "trajectory_id",
    "step_index",
    "is_terminal",
    "trials",
    "successes",
}
_ROW_OPTIONAL = {"state_id", "next_trials", "next_successes"}


def _parse_row(line: str) -> dict:
    row = json.loads(line)
    if not isinstance(row, dict):
        raise ValueError("row is not an object")
    missing = _ROW_REQUIRED - set(row)
    if missing:
        raise ValueError(f"missing fields {sorted(missing)}")
    _check_keys(row, _ROW_REQUIRED | _ROW_OPTIONAL, "row")
    if not isinstance(row["trials"], int) or row["trials"] < 1:
        raise ValueError("trials must be a positive integer")
    if not isinstance(row["successes"], int) or not (
        0 <= row["successes"] <= row["trials"]
    ):
        raise ValueError("successes must lie in [0, trials]")
    if int(row["step_index"]) < 0:
        raise ValueError("step_index must be >= 0")
    return row


def cmd_refine(config: dict, seed: int, out: Path) -> int:
    chash = config_hash({"cmd": "refine", "config": config, "seed": seed})
    print(f"config_hash {chash}")
    input_path = config.get("input")
    if not input_path:
        raise ConfigError("refine config requires an \"input\" JSONL path")
    num_bins = int(config.get("num_bins", 9))
    candidates = _candidates(config.get("candidates"), (0.99, 0.9))
    # with no trained verifier the next-value distribution defaults to the
    # maximum-entropy uniform histogram
    uniform = CategoricalValueDistribution(
        bin_centers(num_bins), np.full(num_bins, 1.0 / num_bins)
    )
    try:
        lines = Path(input_path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IOError(f"cannot read {input_path}: {exc}") from exc

    out_rows = []
    malformed = 0
    missing_next = 0
    total = 0
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            row = _parse_row(line)
            ident = (row["problem_id"], row["trajectory_id"], row["step_index"])
            if ident in seen:
                raise ValueError("duplicate (problem_id, trajectory_id, step_index)")
            seen.add(ident)
        except ValueError as exc:
            malformed += 1
            log.warning("line %d skipped: %s", lineno, exc)
            continue
        trials = row["trials"]
        v_hat = row["successes"] / trials
        result = dict(row)
        if row["is_terminal"]:
            result.update(
                refined_value=v_hat,
                coefficient=None,
                plain_variance=0.0,
                compound_variance=None,
            )
        elif "next_trials" not in row or "next_successes" not in row:
            missing_next += 1
            result.update(
                refined_value=v_hat,
                coefficient=None,
                plain_variance=v_hat * (1.0 - v_hat) / trials,
                compound_variance=None,
                error="missing next-step counts",
            )
        else:
            q_hat = row["next_successes"] / row["next_trials"]
            label = select_coefficient(v_hat, q_hat, uniform, trials, candidates)
            result.update(
                refined_value=label.value,
                coefficient=label.chosen_coefficient,
                plain_variance=label.plain_variance,
                compound_variance=label.compound_variance,
            )
        out_rows.append(_dump_json(result))

    refined_path = out / "refined.jsonl"
    _write_text(refined_path, "".join(line + "\n" for line in out_rows))
    summary = {
        "config_hash": chash,
        "rows": total,
        "written": len(out_rows),
        "malformed": malformed,
        "missing_next": missing_next,
    }
    summary_path = out / "refine_summary.json"
    _write_json(summary_path, summary)
    _write_manifest(out, chash, seed, [refined_path, summary_path])
    print(
        f"refine: {len(out_rows)} rows written, {malformed} malformed, "
        f"{missing_next} missing next-step counts"
    )
    if total and malformed / total > 0.10:
        print("refine: more than 10% malformed rows", file=sys.stderr)
        return EXIT_MALFORMED
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def _load_dataset(path: str) -> list[TrajectoryAnnotation]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    grouped: dict[tuple[str, str], list[dict]] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = _parse_row(line)
        except ValueError as exc:
            raise ConfigError(f"dataset line {lineno}: {exc}") from exc
        grouped.setdefault((row["problem_id"], row["trajectory_id"]), []).append(row)
    dataset = []
    for (pid, tid), rows in sorted(grouped.items()):
        rows.sort(key=lambda r: r["step_index"])
        steps = []
        for row in rows:
            v_hat = row["successes"] / row["trials"]
            q_hat = None
            if not row["is_terminal"] and "next_trials" in row:
                q_hat = row["next_successes"] / row["next_trials"]
            state_id = row.get("state_id")
            if state_id is None:
                # external rows carry opaque ids only; derive a stable key
                digest = hashlib.sha256(
                    f"{pid}/{tid}/{row['step_index']}".encode()
                ).hexdigest()
                state_id = int(digest[:12], 16)
            steps.append(
                StepAnnotation(
                    state_id=int(state_id),
                    v_hat=v_hat,
                    q_hat=q_hat,
                    trials=row["trials"],
                    is_terminal=bool(row["is_terminal"]),
                )
            )
        outcome = steps[-1].v_hat if steps[-1].is_terminal else 0.0
        dataset.append(
            TrajectoryAnnotation(
                problem_id=pid,
                trajectory_id=tid,
                path=tuple(s.state_id for s in steps),
                steps=tuple(steps),
                outcome=float(outcome),
            )
        )
    if not dataset:
        raise ConfigError("dataset is empty")
    return dataset


def cmd_train(config: dict, seed: int, out: Path) -> int:
    chash = config_hash({"cmd": "train", "config": config, "seed": seed})
    print(f"config_hash {chash}")
    dataset_path = config.get("dataset")
    if not dataset_path:
        raise ConfigError("train config requires a \"dataset\" JSONL path")
    dataset = _load_dataset(dataset_path)
    head = config.get("head", "categorical")
    num_bins = int(config.get("num_bins", 9))
    train_config = TrainConfig(
        learning_rate=float(config.get("learning_rate", 0.5)),
        epochs=int(config.get("epochs", 3)),
        loss=config.get("loss", "ce"),
        commcs_enabled=bool(config.get("commcs", False)),
        candidates=_candidates(config.get("candidates"), (0.99, 0.9)),
        delta_scale=int(config.get("delta_scale", 1)),
        num_bins=num_bins,
        loop_mode=config.get("loop_mode", "epoch"),
        warmup_epochs=int(config.get("warmup_epochs", 1)),
        seed=seed,
    )
    verifier = TabularVerifier(head, num_bins)
    report = train(verifier, dataset, train_config)
    verifier_path = out / "verifier.json"
    _write_text(verifier_path, verifier.to_json() + "\n")
    report_path = out / "train_report.json"
    _write_json(
        report_path,
        {
            "config_hash": chash,
            "epoch_losses": report.epoch_losses,
            "refinement_rates": report.refinement_rates,
            "coefficient_counts": {
                str(k): v for k, v in sorted(report.coefficient_counts.items())
            },
        },
    )
    _write_manifest(out, chash, seed, [verifier_path, report_path])
    print(f"train: final loss {report.epoch_losses[-1]:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate / sweep / report


def cmd_evaluate(config: dict, seed: int, out: Path) -> int:
    chash = config_hash({"cmd": "evaluate", "config": config, "seed": seed})
    print(f"config_hash {chash}")
    suite = config.get("suite", "bon")
    if suite not in ("bon", "beam"):
        raise ConfigError(f"unknown evaluate suite {suite!r}")
    gen = _generator_config(config.get("generator", {}), seed)
    problems, values = harness.make_problems(int(config.get("num_problems", 20)), gen, seed)
    verifier_path = config.get("verifier")
    if verifier_path:
        try:
            blob = Path(verifier_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IOError(f"cannot read {verifier_path}: {exc}") from exc
        scorer = harness.verifier_scorer(TabularVerifier.from_json(blob))
        scorer_name = "verifier"
    else:
        scorer = harness.exact_scorer(values)
        scorer_name = "exact"
    eval_seeds = tuple(config.get("eval_seeds", (0, 1, 2)))
    failures = []
    if suite == "bon":
        n_list = tuple(config.get("n_list", (8, 16, 32)))
        report = harness.run_bon_sim(
            problems, {scorer_name: scorer}, n_list, eval_seeds, seed
        )
        rate = report.columns.index("success_rate")
        by_key = {(r[2], r[3], r[4]): r[rate] for r in report.rows}
        for s in eval_seeds:
            for n in n_list:
                if by_key[(s, scorer_name, n)] > by_key[(s, "oracle", n)] + 1e-12:
                    failures.append(f"oracle not dominant at seed={s} n={n}")
    else:
        report = harness.run_beam_search_sim(
            problems,
            scorer,
            num_beams=int(config.get("num_beams", 8)),
            beam_size=int(config.get("beam_size", 8)),
            eval_seeds=eval_seeds,
            base_seed=seed,
            scorer_name=scorer_name,
            expansion=config.get("expansion", "sample"),
        )
        if not 0.0 <= report.summary["mean_success_rate"] <= 1.0:
            failures.append("success rate outside [0, 1]")
    csv_path = out / f"{suite}.csv"
    _write_csv(csv_path, report)
    summary_path = out / f"{suite}_summary.json"
    _write_json(summary_path, dict(report.summary, config_hash=chash, checks_failed=failures))
    _write_manifest(out, chash, seed, [csv_path, summary_path])
    for failure in failures:
        print(f"CHECK FAILED: {failure}", file=sys.stderr)
    return EXIT_SUITE if failures else EXIT_OK


_SWEEP_KEYS = {
    "p_grid",
    "trial_counts",
    "replicas",
    "dv1_family",
    "gaussian_sigma",
    "candidates",
    "delta_scale",
    "num_bins",
    "num_states",
}


def cmd_sweep(config: dict, seed: int, out: Path) -> int:
    chash = config_hash({"cmd": "sweep", "config": config, "seed": seed})
    print(f"config_hash {chash}")
    sweep_obj = dict(config.get("sweep", {}))
    _check_keys(sweep_obj, _SWEEP_KEYS, "sweep")
    for key in ("p_grid", "trial_counts"):
        if key in sweep_obj:
            sweep_obj[key] = tuple(sweep_obj[key])
    if "candidates" in sweep_obj:
        sweep_obj["candidates"] = CoefficientCandidates(tuple(sweep_obj["candidates"]))
    sweep_config = SweepConfig(seed=seed, **sweep_obj)
    problems = None
    if sweep_config.dv1_family == "exact_mdp":
        gen = _generator_config(config.get("generator", {}), seed)
        problems, _ = harness.make_problems(int(config.get("num_problems", 10)), gen, seed)
    report = harness.run_variance_sweep(sweep_config, problems)
    failures = []
    if sweep_config.dv1_family == "gaussian":
        var_emp = report.column("var_plain")
        var_ana = report.column("var_plain_analytic")
        for row, (emp, ana) in zip(report.rows, zip(var_emp, var_ana)):
            if abs(emp - ana) / ana > 0.05:
                failures.append(f"plain variance off analytic at p={row[3]} N={row[4]}")
        ratio = report.summary["interior_variance_ratio"]
        print(
            "sweep: interior variance ratio "
            f"{ratio:.4f}, effective trials {report.summary['effective_trials']:.2f} "
            f"(plain N={report.summary['base_trials']})"
        )
    else:
        bad = report.summary["states_with_coefficient"] - report.summary["reduced_3sigma"]
        if bad:
            failures.append(f"{bad} states without a 3-sigma variance reduction")
    csv_path = out / "variance_sweep.csv"
    _write_csv(csv_path, report)
    summary_path = out / "sweep_summary.json"
    _write_json(summary_path, dict(report.summary, config_hash=chash, checks_failed=failures))
    _write_manifest(out, chash, seed, [csv_path, summary_path])
    for failure in failures:
        print(f"CHECK FAILED: {failure}", file=sys.stderr)
    return EXIT_SUITE if failures else EXIT_OK


def cmd_report(config: dict, seed: int, out: Path) -> int:
    chash = config_hash({"cmd": "report", "config": config, "seed": seed})
    print(f"config_hash {chash}")
    inputs = config.get("inputs", [])
    if not inputs:
        raise ConfigError("report config requires \"inputs\": a list of summary JSONs")
    combined = {}
    for path in inputs:
        try:
            blob = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IOError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        combined[Path(path).stem] = blob
    report_path = out / "report.json"
    _write_json(report_path, {"config_hash": chash, "inputs": combined})
    _write_manifest(out, chash, seed, [report_path])
    for name in sorted(combined):
        print(f"{name}: {_dump_json(combined[name])}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "simulate": (
        cmd_simulate,
        {"num_problems", "trajectories_per_problem", "trials", "generator", "seed"},
    ),
    "refine": (cmd_refine, {"input", "candidates", "num_bins", "seed"}),
    "train": (
        cmd_train,
        {
            "dataset",
            "head",
            "num_bins",
            "learning_rate",
            "epochs",
            "loss",
            "commcs",
            "candidates",
            "delta_scale",
            "loop_mode",
            "warmup_epochs",
            "seed",
        },
    ),
    "evaluate": (
        cmd_evaluate,
        {
            "suite",
            "generator",
            "num_problems",
            "verifier",
            "n_list",
            "eval_seeds",
            "num_beams",
            "beam_size",
            "expansion",
            "seed",
        },
    ),
    "sweep": (cmd_sweep, {"sweep", "generator", "num_problems", "seed"}),
    "report": (cmd_report, {"inputs", "seed"}),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commcs", description="Compound Monte Carlo value estimation toolkit."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--seed", type=int, default=None, help="overrides config seed")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--jobs", type=int, default=1, help="worker count")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("COMMCS_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    func, allowed = _COMMANDS[args.command]
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        config = load_config(args.config, allowed)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        return func(config, seed, Path(args.out))
    except (ConfigError, MdpSizeError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
