"""Batch front end: verification suites, training runs, convergence studies.

Configs are TOML with an explicit ``schema_version``; shipped presets live
under ``eqflow/presets`` and can be referenced by bare name.  All
randomness flows from one 64-bit seed through labeled substreams, so
identical configs reproduce identical output files byte for byte (the
timestamp header is suppressed with ``--no-timestamp``).

Exit codes: 0 success, 1 property/acceptance failure, 2 usage or config
error.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import checks, gradcheck, suites, wells
from .flows import Schedule, integrate, inverse_integrate, refinement_study
from .layers import make_layer
from .models import TrainConfig, build_model, train
from .perm_groups import parse_group_spec, partition_check, right_transversal
from .reports import VerificationReport
from .targets import build_target

SCHEMA_VERSION = 1


class ConfigError(Exception):
    pass


def _load_config(path_or_name: str) -> dict:
    path = Path(path_or_name)
    if not path.exists():
        preset = Path(__file__).parent / "presets" / f"{path_or_name}.toml"
        if preset.exists():
            path = preset
        else:
            raise ConfigError(f"config not found: {path_or_name}")
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"config {path} must declare schema_version = {SCHEMA_VERSION}")
    return cfg


def _require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config key {key!r} has wrong type {type(val).__name__}")
    return val


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, rows: list[tuple[str, object]], no_timestamp: bool) -> None:
    lines = []
    if not no_timestamp:
        lines.append(f"timestamp = {datetime.now(timezone.utc).isoformat()}")
    lines.append(f"schema_version = {SCHEMA_VERSION}")
    for key, val in rows:
        lines.append(f"{key} = {val}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def _read_summary(path: Path) -> dict[str, str]:
    record: dict[str, str] = {}
    for line in path.read_text().splitlines():
        if " = " in line:
            key, val = line.split(" = ", 1)
            record[key.strip()] = val.strip()
    return record


def _write_reports(out: Path, reports: list[VerificationReport]) -> None:
    (out / "reports.txt").write_text("\n".join(rep.to_text() for rep in reports))


def _dims_of(entry: dict) -> tuple[int, ...]:
    if "dims" in entry:
        return tuple(int(d) for d in entry["dims"])
    return (int(_require(entry, "n", int)),)


# ---------------------------------------------------------------------------
# verify


def _run_check(entry: dict, seed: int) -> list[VerificationReport]:
    kind = _require(entry, "kind", str)
    seed = int(entry.get("seed", seed))
    if kind == "equivariance":
        family = _require(entry, "family", str)
        dims = _dims_of(entry)
        samples = int(entry.get("samples", 200))
        out = [
            suites.layer_symmetry_sweep(
                family, dims, samples, float(entry.get("layer_tol", 1e-12)), seed,
                activation=entry.get("activation", "tanh"),
            ),
            suites.flow_symmetry_sweep(
                family, dims, samples, float(entry.get("flow_tol", 1e-10)), seed,
                activation=entry.get("activation", "tanh"),
            ),
        ]
        return out
    if kind == "invariance":
        target = build_target(
            _require(entry, "target", str),
            n=entry.get("n"),
            dims=tuple(entry["dims"]) if "dims" in entry else None,
        )
        group = parse_group_spec(entry.get("group", target.group_spec))
        return [
            checks.check_invariance(
                target.fn, group, int(entry.get("samples", 200)),
                float(entry.get("tol", 1e-10)), seed,
            )
        ]
    if kind == "perturbation":
        group = parse_group_spec(_require(entry, "group", str))
        return [
            checks.check_perturbation_property(
                _require(entry, "family", str), group,
                pairs=int(entry.get("pairs", 30)), seed=seed,
                dims=tuple(entry["dims"]) if "dims" in entry else None,
            )
        ]
    if kind == "resolves":
        group = parse_group_spec(_require(entry, "group", str))
        return [
            checks.check_resolves(
                _require(entry, "family", str), group, seed=seed,
                dims=tuple(entry["dims"]) if "dims" in entry else None,
                pert_pairs=int(entry.get("pairs", 20)),
            )
        ]
    if kind == "counterexamples":
        return [checks.check_counterexamples(seed=seed, schedules=int(entry.get("schedules", 50)))]
    if kind == "gradients":
        return [
            gradcheck.check_gradients(
                _require(entry, "family", str), _dims_of(entry),
                instances=int(entry.get("instances", 100)), seed=seed,
                tol=float(entry.get("tol", 1e-5)),
                activation=entry.get("activation", "tanh"),
            )
        ]
    if kind == "well_1d":
        fn = {"well_bump": wells.WELL_BUMP}.get(_require(entry, "function", str))
        if fn is None:
            raise ConfigError(f"unknown 1d well function {entry['function']!r}")
        return [wells.check_1d_well(fn, float(entry.get("lo", -5)), float(entry.get("hi", 5)))]
    if kind == "symmetric_well":
        n = int(_require(entry, "n", int))
        ctor = {"sum": wells.sym_well_sum, "coordwise": wells.sym_well_coordwise}.get(
            _require(entry, "construction", str)
        )
        if ctor is None:
            raise ConfigError(f"unknown construction {entry['construction']!r}")
        return [wells.check_symmetric_invariant_well(ctor(wells.WELL_BUMP, n), seed=seed)]
    raise ConfigError(f"unknown check kind {kind!r}")


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    entries = _require(cfg, "check", list)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    reports: list[VerificationReport] = []
    for entry in entries:
        reports.extend(_run_check(entry, seed))
    out = _out_dir(args)
    _write_reports(out, reports)
    n_fail = sum(1 for r in reports if r.verdict == "fail")
    n_inconclusive = sum(1 for r in reports if r.verdict == "inconclusive")
    rows = [
        ("command", "verify"),
        ("checks", len(reports)),
        ("failures", n_fail),
        ("inconclusive", n_inconclusive),
        ("acceptance_pass", str(n_fail == 0).lower()),
    ]
    _write_summary(out, rows, args.no_timestamp)
    for rep in reports:
        print(rep.summary_line())
    return 0 if n_fail == 0 else 1


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    exp = _require(cfg, "experiment", dict)
    opt = cfg.get("optimizer", {})
    sampling = cfg.get("sampling", {})
    family = _require(exp, "family", str)
    name = exp.get("name", f"{family}-{exp.get('target', 'run')}")
    dims = tuple(exp["dims"]) if "dims" in exp else int(_require(exp, "n", int))
    target = build_target(
        _require(exp, "target", str),
        n=exp.get("n"),
        dims=tuple(exp["dims"]) if "dims" in exp else None,
    )
    seeds = [int(args.seed)] if args.seed is not None else [int(s) for s in cfg.get("seeds", [0])]

    out = _out_dir(args)
    rows: list[tuple[str, object]] = [("command", "train"), ("name", name), ("family", family)]
    rel_errs = []
    for seed in seeds:
        model = build_model(
            family,
            dims,
            int(exp.get("layer_count", 20)),
            seed=seed,
            activation=exp.get("activation", "tanh"),
            terminal=exp.get("terminal", "sum"),
            duration=float(exp.get("duration", 1.0)),
            steps_per_unit_time=int(exp.get("steps_per_unit_time", 1)),
            init_scale=float(exp.get("init_scale", 0.5)),
        )
        config = TrainConfig(
            kappa=float(sampling.get("kappa", 1.0)),
            train_samples=int(sampling.get("train_samples", 4096)),
            test_samples=int(sampling.get("test_samples", 10_000)),
            learning_rate=float(opt.get("learning_rate", 1e-2)),
            momentum=float(opt.get("momentum", 0.9)),
            iterations=int(opt.get("iterations", 5000)),
            seed=seed,
            log_every=int(opt.get("log_every", 100)),
        )
        trained, history = train(model, target, config)
        hist_path = out / f"history_seed{seed}.csv"
        lines = ["iteration,train_loss,test_loss,rel_err"]
        lines.extend(h.as_csv() for h in history)
        hist_path.write_text("\n".join(lines) + "\n")
        rel = history[-1].rel_err
        rel_errs.append(rel)
        rows.append((f"rel_err_seed{seed}", repr(rel)))
        print(f"seed {seed}: final rel_err = {rel:.4f} (train loss {history[-1].train_loss:.3e})")

    rows.append(("median_rel_err", repr(statistics.median(rel_errs))))
    rows.append(("max_rel_err", repr(max(rel_errs))))
    rows.append(("min_rel_err", repr(min(rel_errs))))

    acc = cfg.get("acceptance")
    if acc:
        metric = _require(acc, "metric", str)
        op = _require(acc, "op", str)
        threshold = float(_require(acc, "threshold"))
        value = {
            "median_rel_err": statistics.median(rel_errs),
            "max_rel_err": max(rel_errs),
            "min_rel_err": min(rel_errs),
        }.get(metric)
        if value is None or op not in ("lt", "ge"):
            raise ConfigError(f"bad acceptance record {acc!r}")
        passed = value < threshold if op == "lt" else value >= threshold
        rows.extend(
            [
                ("acceptance_metric", metric),
                ("acceptance_op", op),
                ("acceptance_threshold", repr(threshold)),
                ("acceptance_value", repr(value)),
                ("acceptance_pass", str(passed).lower()),
            ]
        )
        if (metric, op) == ("min_rel_err", "ge") and not passed:
            rows.append(("note", "symmetry obstruction violated"))
        elif (metric, op) == ("min_rel_err", "ge"):
            rows.append(("note", f"symmetry obstruction: rel_err >= {threshold}"))
    _write_summary(out, rows, args.no_timestamp)
    return 0


# ---------------------------------------------------------------------------
# converge


def cmd_converge(args) -> int:
    cfg = _load_config(args.config)
    study = _require(cfg, "study", dict)
    lam = float(study.get("lam", 1.0))
    duration = float(study.get("duration", 1.0))
    x0 = np.asarray(study.get("x0", [1.0, -0.5, 0.25]), dtype=float)
    levels = int(study.get("levels", 4))
    base = int(study.get("base_steps_per_unit_time", 8))
    integrators = study.get("integrators", ["euler", "rk4"])
    layer = make_layer("linear", len(x0), [lam])

    out = _out_dir(args)
    lines = ["integrator,steps,error,observed_order"]
    rows: list[tuple[str, object]] = [("command", "converge")]
    for method in integrators:
        sched = Schedule(((layer, duration),), steps_per_unit_time=base, method=method)
        res = refinement_study(sched, x0, levels=levels)
        for steps, err, order in res.rows():
            lines.append(f"{method},{steps},{err!r},{order!r}")
        if res.exact:
            rows.append((f"{method}_orders", "exact"))
        else:
            rows.append((f"{method}_orders", ",".join(f"{o:.3f}" for o in res.orders)))

    rt = cfg.get("roundtrip", {})
    for method, steps_key, default in (("euler", "euler_steps", 1000), ("rk4", "rk4_steps", 100)):
        steps = int(rt.get(steps_key, default))
        sched = Schedule(((layer, duration),), steps_per_unit_time=steps, method=method)
        err = float(np.max(np.abs(inverse_integrate(sched, integrate(sched, x0).y) - x0)))
        rows.append((f"{method}_roundtrip_error", repr(err)))

    (out / "converge.csv").write_text("\n".join(lines) + "\n")
    _write_summary(out, rows, args.no_timestamp)
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# partition


def cmd_partition(args) -> int:
    cfg = _load_config(args.config)
    entries = _require(cfg, "group", list)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    reports = []
    for entry in entries:
        group = parse_group_spec(_require(entry, "spec", str))
        trans = right_transversal(group, tie_break=entry.get("tie_break", "lex_min"))
        reports.append(
            partition_check(group, trans, int(entry.get("samples", 10_000)), seed=seed)
        )
    out = _out_dir(args)
    _write_reports(out, reports)
    n_fail = sum(1 for r in reports if r.verdict == "fail")
    _write_summary(
        out,
        [
            ("command", "partition"),
            ("checks", len(reports)),
            ("failures", n_fail),
            ("acceptance_pass", str(n_fail == 0).lower()),
        ],
        args.no_timestamp,
    )
    for rep in reports:
        print(rep.summary_line())
    return 0 if n_fail == 0 else 1


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    run_dirs = [Path(d) for d in args.run_dirs]
    records = []
    for d in run_dirs:
        summary = d / "summary.txt"
        if not summary.exists():
            print(f"error: no summary.txt in {d}", file=sys.stderr)
            return 2
        records.append((d, _read_summary(summary)))
    if not records:
        print("error: no run directories given", file=sys.stderr)
        return 2
    any_fail = False
    width = max(len(str(d)) for d, _ in records)
    for d, rec in records:
        verdict = rec.get("acceptance_pass")
        if verdict is None:
            status = "NO-GATE"
        elif verdict == "true":
            status = "PASS"
        else:
            status = "FAIL"
            any_fail = True
        detail = ""
        if "acceptance_metric" in rec:
            detail = (
                f" {rec['acceptance_metric']} = {rec.get('acceptance_value')} "
                f"({rec.get('acceptance_op')} {rec.get('acceptance_threshold')})"
            )
        elif "failures" in rec:
            detail = f" failures = {rec['failures']}"
        print(f"{str(d):{width}s}  {status}{detail}")
    return 1 if any_fail else 0


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="eqflow",
        description="verification suites and training experiments for equivariant flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="config path or preset name")
        p.add_argument("--out", default="eqflow_out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--no-timestamp", action="store_true", help="omit timestamp header")

    add_common(sub.add_parser("verify", help="run property-checker suites"))
    add_common(sub.add_parser("train", help="run a training experiment"))
    add_common(sub.add_parser("converge", help="integrator refinement study"))
    add_common(sub.add_parser("partition", help="cross-section partition checks"))
    rep = sub.add_parser("report", help="aggregate run outputs against acceptance gates")
    rep.add_argument("run_dirs", nargs="*", help="run directories with summary.txt")

    args = parser.parse_args(argv)
    handlers = {
        "verify": cmd_verify,
        "train": cmd_train,
        "converge": cmd_converge,
        "partition": cmd_partition,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
