"""Command-line front end: CSV ingestion, fit/test/predict/simulate workflows.

Exit codes: 0 success, 2 parse failure, 3 convergence failure,
4 configuration failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .gee import LINKS, sandwich_covariance_uncensored
from .inference import FitSpec, bootstrap, test_coefficient
from .predict import predict_with_ci, tie_correction_term
from .pseudo import pseudo_matrix
from .sim import make_scenario, run_scenario, write_result_rows
from .survival import TwoSampleDataset, kaplan_meier

log = logging.getLogger("releff")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONVERGENCE = 3
EXIT_CONFIG = 4


class ParseFailure(Exception):
    pass


class ConfigFailure(Exception):
    pass


@dataclass
class AnalysisConfig:
    link: str = "identity"
    tau: float = float("inf")
    B: int = 2000
    alpha: float = 0.05
    seed: int | None = None
    method: str = "all"           # emp | iqr | mad | quantile | all
    covariates1: list = field(default_factory=list)
    covariates2: list = field(default_factory=list)
    strict_singular: bool = False
    out_dir: str = "."

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigFailure(f"alpha must be in (0, 1), got {self.alpha}")
        if self.B < 1:
            raise ConfigFailure(f"B must be >= 1, got {self.B}")
        if not self.tau > 0:
            raise ConfigFailure(f"tau must be positive, got {self.tau}")
        if self.link not in LINKS:
            raise ConfigFailure(f"unknown link {self.link!r}; available: {sorted(LINKS)}")
        if self.method not in ("emp", "iqr", "mad", "quantile", "all"):
            raise ConfigFailure(f"unknown inference method {self.method!r}")

    @classmethod
    def from_file(cls, path) -> "AnalysisConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigFailure(f"cannot read config {path}: {exc}") from exc
        if "tau" in raw and raw["tau"] == "inf":
            raw["tau"] = float("inf")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigFailure(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def _parse_float(text, row, column):
    try:
        return float(text)
    except ValueError:
        raise ParseFailure(f"row {row}, column {column!r}: not a number: {text!r}")


def ingest_csv(path, config: AnalysisConfig) -> TwoSampleDataset:
    """Read a two-group dataset; rows with missing used values are dropped
    with row-numbered diagnostics."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseFailure(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseFailure(f"{path}: empty file, header row required")
        required = {"group", "time", "status"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise ParseFailure(f"{path}: missing required columns {sorted(missing)}")
        groups = {1: {"t": [], "e": [], "z": []}, 2: {"t": [], "e": [], "z": []}}
        dropped = []
        for row_no, row in enumerate(reader, start=2):   # 1-based incl. header
            if row["group"] not in ("1", "2"):
                raise ParseFailure(
                    f"row {row_no}, column 'group': expected 1 or 2, got {row['group']!r}"
                )
            g = int(row["group"])
            cov_cols = config.covariates1 if g == 1 else config.covariates2
            for col in cov_cols:
                if col not in row:
                    raise ParseFailure(f"missing covariate column {col!r}")
            used = ["time", "status"] + list(cov_cols)
            if any(row[c] is None or row[c].strip() == "" for c in used):
                dropped.append(row_no)
                continue
            time = _parse_float(row["time"], row_no, "time")
            if row["status"] not in ("0", "1"):
                raise ParseFailure(
                    f"row {row_no}, column 'status': expected 0 or 1, got {row['status']!r}"
                )
            status = int(row["status"])
            if status == 0 and time < 0:
                raise ParseFailure(
                    f"row {row_no}, column 'time': negative time on a censored record"
                )
            z = [_parse_float(row[c], row_no, c) for c in cov_cols]
            groups[g]["t"].append(time)
            groups[g]["e"].append(float(status))
            groups[g]["z"].append(z)
    if dropped:
        log.warning("dropped %d incomplete rows: %s", len(dropped), dropped)
    for g in (1, 2):
        if len(groups[g]["t"]) < 2:
            raise ParseFailure(f"group {g} has fewer than 2 usable rows")
    t1 = np.array(groups[1]["t"])
    t2 = np.array(groups[2]["t"])
    if any(t < 0 for t in np.concatenate((t1, t2))) and (
        0.0 in groups[1]["e"] or 0.0 in groups[2]["e"]
    ):
        raise ParseFailure("negative times require fully observed data")
    tau = config.tau
    if np.isinf(tau):
        tau = float(max(t1.max(), t2.max()))
        log.warning("tau not set; defaulting to the largest observed time %.6g", tau)
    z1 = np.array(groups[1]["z"]) if config.covariates1 else np.empty((t1.size, 0))
    z2 = np.array(groups[2]["z"]) if config.covariates2 else np.empty((t2.size, 0))
    return TwoSampleDataset(
        t1, np.array(groups[1]["e"]), z1,
        t2, np.array(groups[2]["e"]), z2,
        tau=tau,
    )


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: AnalysisConfig,
                   inputs=(), outputs=()):
    lines = [f"command={command}", f"version={__version__}"]
    for key, value in asdict(config).items():
        lines.append(f"config.{key}={value}")
    for p in inputs:
        lines.append(f"input.{Path(p).name}.sha256={_sha256(p)}")
    for p in outputs:
        lines.append(f"output={p}")
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _coefficient_names(config: AnalysisConfig):
    return (
        ["intercept"]
        + [f"g1:{c}" for c in config.covariates1]
        + [f"g2:{c}" for c in config.covariates2]
    )


def cmd_fit(args) -> int:
    config = _build_config(args, require_seed=args.bootstrap is not None)
    data = ingest_csv(args.data, config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = FitSpec(link=LINKS[config.link], strict_singular=config.strict_singular)
    result = spec.fit(data)
    if not result.converged:
        log.error("fit did not converge: %s", result.message)
        return EXIT_CONVERGENCE

    names = _coefficient_names(config)
    rows = [{"coefficient": name, "estimate": b} for name, b in zip(names, result.beta)]
    header = ["coefficient", "estimate"]

    if config.seed is not None and args.bootstrap is not None:
        ensemble = bootstrap(data, spec=spec, B=config.B, seed=config.seed)
        header += [
            "se_emp", "se_iqr", "se_mad",
            "ci_emp_low", "ci_emp_high", "ci_iqr_low", "ci_iqr_high",
            "ci_mad_low", "ci_mad_high", "ci_quantile_low", "ci_quantile_high",
            "reject_emp", "reject_iqr", "reject_mad", "reject_quantile",
        ]
        for k, row in enumerate(rows):
            rep = test_coefficient(ensemble, k, alpha=config.alpha)
            row.update({
                "se_emp": rep.scale_emp, "se_iqr": rep.scale_iqr, "se_mad": rep.scale_mad,
                "ci_emp_low": rep.ci_emp[0], "ci_emp_high": rep.ci_emp[1],
                "ci_iqr_low": rep.ci_iqr[0], "ci_iqr_high": rep.ci_iqr[1],
                "ci_mad_low": rep.ci_mad[0], "ci_mad_high": rep.ci_mad[1],
                "ci_quantile_low": rep.ci_quantile[0], "ci_quantile_high": rep.ci_quantile[1],
                "reject_emp": rep.reject_emp, "reject_iqr": rep.reject_iqr,
                "reject_mad": rep.reject_mad, "reject_quantile": rep.reject_quantile,
            })
    elif data.uncensored and config.link == "identity":
        cov = sandwich_covariance_uncensored(data)
        header += ["se_sandwich"]
        ses = np.sqrt(np.maximum(np.diag(cov), 0.0))
        for row, se in zip(rows, ses):
            row["se_sandwich"] = se

    out_path = out_dir / "coefficients.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    write_manifest(out_dir, "fit", config, inputs=[args.data], outputs=[out_path])
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_test(args) -> int:
    config = _build_config(args, require_seed=True)
    data = ingest_csv(args.data, config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = FitSpec(link=LINKS[config.link], strict_singular=config.strict_singular)
    ensemble = bootstrap(data, spec=spec, B=config.B, seed=config.seed)
    names = _coefficient_names(config)
    out_path = out_dir / "tests.csv"
    methods = ("emp", "iqr", "mad", "quantile") if config.method == "all" else (config.method,)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coefficient", "estimate", "method", "scale", "ci_low", "ci_high", "reject"])
        for k, name in enumerate(names):
            rep = test_coefficient(ensemble, k, alpha=config.alpha)
            per_method = {
                "emp": (rep.scale_emp, rep.ci_emp, rep.reject_emp),
                "iqr": (rep.scale_iqr, rep.ci_iqr, rep.reject_iqr),
                "mad": (rep.scale_mad, rep.ci_mad, rep.reject_mad),
                "quantile": ("", rep.ci_quantile, rep.reject_quantile),
            }
            for method in methods:
                scale, ci, reject = per_method[method]
                writer.writerow([name, rep.estimate, method, scale, ci[0], ci[1], reject])
    write_manifest(out_dir, "test", config, inputs=[args.data], outputs=[out_path])
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    config = _build_config(args, require_seed=True)
    if config.covariates1 != config.covariates2:
        raise ConfigFailure(
            "predict uses each subject's covariates for both groups; "
            "covariates1 and covariates2 must name the same columns"
        )
    data = ingest_csv(args.data, config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = FitSpec(link=LINKS[config.link], strict_singular=config.strict_singular)
    ensemble = bootstrap(data, spec=spec, B=config.B, seed=config.seed)
    if not ensemble.base_fit.converged:
        return EXIT_CONVERGENCE
    S1 = kaplan_meier(data.times1, data.events1)
    S2 = kaplan_meier(data.times2, data.events2)
    correction = tie_correction_term(S1, S2, data.tau)
    ci_method = "quantile" if config.method == "quantile" else "emp"
    tie_corrected = config.link == "identity"

    out_path = out_dir / "predictions.csv"
    Z_all = np.vstack((data.covariates1, data.covariates2))
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["subject", "probability", "ci_low", "ci_high", "classification",
             "out_of_range", "tie_correction"]
        )
        for i, z in enumerate(Z_all):
            pred = predict_with_ci(
                ensemble.base_fit, ensemble, z, z,
                link=LINKS[config.link],
                correction=correction if tie_corrected else None,
                tie_corrected=tie_corrected,
                alpha=config.alpha, method=ci_method,
            )
            writer.writerow(
                [i, pred.point, pred.ci_low, pred.ci_high, pred.classification,
                 pred.out_of_range, correction]
            )
    write_manifest(out_dir, "predict", config, inputs=[args.data], outputs=[out_path])
    print(f"wrote {out_path} (tie correction {correction:.4f})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _build_config(args, require_seed=True, need_data=False)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.reps > 2000 and not args.long_run:
        raise ConfigFailure(
            f"--reps {args.reps} exceeds 2000; pass --long-run for full-scale studies"
        )
    scenario = make_scenario(args.scenario, args.setting, args.n1, args.n2, args.censored)
    rows, result = run_scenario(scenario, M=args.reps, seed=config.seed, alpha=config.alpha)
    out_path = out_dir / "rejection_rates.csv"
    write_result_rows(rows, out_path)
    dump_path = out_dir / "estimates.csv"
    np.savetxt(dump_path, result.estimates, delimiter=",",
               header=",".join(f"beta{k}" for k in range(result.estimates.shape[1])),
               comments="")
    write_manifest(out_dir, "simulate", config, outputs=[out_path, dump_path])
    print(f"wrote {out_path}")
    return EXIT_OK


def _build_config(args, require_seed=False, need_data=True) -> AnalysisConfig:
    if getattr(args, "config", None):
        config = AnalysisConfig.from_file(args.config)
    else:
        config = AnalysisConfig()
    overrides = {}
    for attr, key in (
        ("tau", "tau"), ("link", "link"), ("bootstrap", "B"),
        ("alpha", "alpha"), ("seed", "seed"), ("method", "method"),
        ("out_dir", "out_dir"), ("cov1", "covariates1"), ("cov2", "covariates2"),
        ("strict_singular", "strict_singular"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    merged = {**asdict(config), **overrides}
    config = AnalysisConfig(**merged)
    if require_seed and config.seed is None:
        raise ConfigFailure("a seed is required for this command (use --seed)")
    if need_data and not getattr(args, "data", None):
        raise ConfigFailure("an input data file is required (use --data)")
    return config


def _csv_list(text):
    return [c.strip() for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="releff",
        description="Regression models for the relative treatment effect P(T1 > T2 | Z1, Z2)",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON configuration file")
        if data:
            p.add_argument("--data", help="input CSV (group,time,status,covariates)")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--link", choices=sorted(LINKS))
        p.add_argument("--bootstrap", type=int, help="number of bootstrap replicates")
        p.add_argument("--alpha", type=float)
        p.add_argument("--method", choices=["emp", "iqr", "mad", "quantile", "all"])
        p.add_argument("--cov1", type=_csv_list, help="group-1 covariate columns, comma separated")
        p.add_argument("--cov2", type=_csv_list, help="group-2 covariate columns, comma separated")
        p.add_argument("--strict-singular", dest="strict_singular", action="store_const", const=True)

    p_fit = sub.add_parser("fit", help="fit the model, optionally with bootstrap SEs")
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_test = sub.add_parser("test", help="bootstrap hypothesis tests per coefficient")
    common(p_test)
    p_test.set_defaults(func=cmd_test)

    p_pred = sub.add_parser("predict", help="tie-corrected per-subject predictions")
    common(p_pred)
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="Monte Carlo rejection-rate study")
    common(p_sim, data=False)
    p_sim.add_argument("--scenario", required=True, choices=["i", "ii", "iii", "iv"])
    p_sim.add_argument("--setting", default="II", choices=["I", "II"])
    p_sim.add_argument("--n1", type=int, default=50)
    p_sim.add_argument("--n2", type=int, default=50)
    p_sim.add_argument("--censored", action="store_true")
    p_sim.add_argument("--reps", type=int, default=1000)
    p_sim.add_argument("--long-run", dest="long_run", action="store_true",
                       help="allow full-scale replication counts")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseFailure as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE
    except ConfigFailure as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except np.linalg.LinAlgError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_CONVERGENCE
    except RuntimeError as exc:
        log.error("%s", exc)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
