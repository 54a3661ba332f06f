##############################################################
# app.py
# ------------------------------------------------------------
# Command-line front end of the FH-ACI transmission capacity toolkit.
# Reads JSON run configs / YAML config-sets, runs outage evaluations,
# optimizer sweeps and validation suites, and writes JSON/CSV results
# next to a run manifest.
#
#   fhaci <subcommand> [--config <path>] [--seed N] [--out <dir>] [flags]
##############################################################

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import yaml

from capacity import mctc
from channel import SystemConfig, WaveformParams
from config import (
    APP_NAME,
    APP_VERSION,
    CLI_PROG,
    DEBUG_MODE,
    DEFAULT_SEED,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERIC_FAILURE,
    EXIT_OK,
    EXIT_VALIDATION_FAILED,
    FADING_MODELS,
    FIG3_ALPHAS,
    FIG3_R_VALUES,
    LOG_LEVEL,
    NO_ACI_PSI,
    OUTPUT_DIR,
    RATE_H_GRID,
    RATE_SNR_DB_GRID,
    RATE_TABLE_PATH,
    RATE_TRIALS,
    REFERENCE_SYSTEM,
    REFERENCE_WAVEFORM,
    SHADOW_MC_DRAWS,
    SHOW_PROGRESS,
    SWEEP_L_PSI_VALUES,
    SWEEP_L_VALUES,
    SWEEP_PSI_VALUES,
    TABLE1_CONFIG_PATH,
    TABLE1_TAU_SCALE,
    VALIDATION_TRIALS,
    WORKERS,
)
from cpfsk import RateThresholdTable, build_rate_table
from exceptions import ConfigError, DomainError, NumericFailure, OptimizationError
from optimize import MctcObjective, nelder_mead, profile_curve, psi_vs_distance
from outage import (
    ConditionalContext,
    avg_outage_shadowed,
    avg_outage_unshadowed,
    conditional_outage,
    monte_carlo_outage,
)
from simkit import RESAMPLE_ALL, RngSpec, draw_fixed_omegas
from utils.file_utils import RunManifest, ensure_dir, write_csv, write_json, write_manifest
from validation import SUITES, run_suite

logger = logging.getLogger(CLI_PROG)

RUN_DOCUMENT_KEYS = ("system", "waveform", "omegas")


# -------------------------
# Config ingestion
# -------------------------
def _read_document(path: str, loader) -> Any:
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}", field="--config")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return loader(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", field="<document>") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}", field="<document>") from exc


def load_run_config(path: Optional[str]) -> Tuple[SystemConfig, WaveformParams, Optional[List[float]]]:
    """
    Parse a run document {"system": {...}, "waveform": {...}, "omegas": [...]}.
    Without a path the reference system and waveform are used.
    """
    if path is None:
        return SystemConfig(**REFERENCE_SYSTEM), WaveformParams(*REFERENCE_WAVEFORM), None
    doc = _read_document(path, json.load)
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", field="<document>")
    for key in doc:
        if key not in RUN_DOCUMENT_KEYS:
            raise ConfigError("unknown field", field=key)
    if "system" not in doc:
        raise ConfigError("missing required field", field="system")
    cfg = SystemConfig.from_dict(doc["system"])
    wf = WaveformParams.from_dict(doc["waveform"]) if "waveform" in doc else WaveformParams(*REFERENCE_WAVEFORM)
    omegas = doc.get("omegas")
    if omegas is not None:
        if not isinstance(omegas, list) or not all(isinstance(w, (int, float)) and not isinstance(w, bool) for w in omegas):
            raise ConfigError("expected a list of numbers", field="omegas")
        if len(omegas) != cfg.M + 1:
            raise ConfigError(f"expected M + 1 = {cfg.M + 1} entries, got {len(omegas)}", field="omegas")
    return cfg, wf, omegas


def load_config_set(path: str) -> Tuple[List[SystemConfig], List[Optional[List[float]]]]:
    """YAML config-set: `base` fields plus `rows` of overrides, each with an optional `reference`."""
    doc = _read_document(path, yaml.safe_load)
    if not isinstance(doc, dict) or "rows" not in doc:
        raise ConfigError("a config-set needs a `rows` list", field="rows")
    base = doc.get("base") or {}
    if not isinstance(base, dict) or not isinstance(doc["rows"], list):
        raise ConfigError("`base` must be a mapping and `rows` a list", field="base")
    configs, references = [], []
    for index, row in enumerate(doc["rows"]):
        if not isinstance(row, dict):
            raise ConfigError("expected a mapping", field=f"rows[{index}]")
        row = dict(row)
        reference = row.pop("reference", None)
        if reference is not None and len(reference) != 5:
            raise ConfigError("expected [L, R, h, psi, tau]", field=f"rows[{index}].reference")
        configs.append(SystemConfig.from_dict({**base, **row}, prefix=f"rows[{index}]"))
        references.append(reference)
    return configs, references


def load_table(path: str, required: bool = True) -> Optional[RateThresholdTable]:
    if not os.path.exists(path):
        if required:
            raise ConfigError(f"no rate table at {path}; run `{CLI_PROG} build-table` first", field="--rate-table")
        return None
    return RateThresholdTable.load(path)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _L_values(spec: Optional[Sequence[float]]) -> List[float]:
    if spec is None:
        return [float(v) for v in SWEEP_L_VALUES]
    if len(spec) == 1:
        return [float(spec[0])]
    lo, hi = spec[0], spec[1]
    step = spec[2] if len(spec) > 2 else 1.0
    if lo < 1 or hi < lo or step <= 0:
        raise ConfigError(f"invalid L range {spec}", field="--L-range")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + k * step for k in range(count)]


def _objective(cfg: SystemConfig, table: RateThresholdTable, args, neglect_aci: bool = False) -> MctcObjective:
    return MctcObjective(cfg, table, seed=args.seed, mc_draws=args.mc_draws, neglect_aci=neglect_aci)


def _out(args, name: str) -> str:
    return os.path.join(args.out, name)


# -------------------------
# Subcommands
# -------------------------
def cmd_outage(args, manifest: RunManifest) -> int:
    cfg, wf, omegas = load_run_config(args.config)
    if args.beta_db is not None:
        beta = 10.0 ** (args.beta_db / 10.0)
    else:
        beta = load_table(args.rate_table).sinr_threshold(wf.R, wf.h)
    logger.info(f"[cmd_outage] method={args.method} theta={wf.as_tuple()} beta={10 * math.log10(beta):.3f} dB")

    extra: Dict[str, Any] = {}
    if args.method == "conditional":
        if omegas is None:
            omega0, rest = draw_fixed_omegas(cfg, RngSpec(args.seed))
            omegas = [omega0, *rest]
        extra["omegas"] = list(omegas)
        result = conditional_outage(ConditionalContext.from_config(cfg, wf, beta, omegas, args.neglect_aci))
    elif args.method == "unshadowed":
        result = avg_outage_unshadowed(cfg, wf, beta, neglect_aci=args.neglect_aci)
    elif args.method == "shadowed":
        result = avg_outage_shadowed(cfg, wf, beta, mc_draws=args.mc_draws, seed=args.seed, neglect_aci=args.neglect_aci)
    else:
        resample = frozenset(args.resample) if args.resample else RESAMPLE_ALL
        extra["resample"] = sorted(resample)
        result = monte_carlo_outage(
            cfg, wf, beta, args.trials, seed=args.seed, resample=resample, neglect_aci=args.neglect_aci, workers=args.workers
        )

    capacity = mctc(cfg, wf, result)
    payload = {
        **result.to_dict(),
        "beta": beta,
        "beta_db": 10.0 * math.log10(beta),
        "theta": wf.to_dict(),
        "system": cfg.to_dict(),
        "capacity": capacity.to_dict(),
        **extra,
    }
    write_json(payload, _out(args, "outage.json"), manifest)
    print(f"eps = {result.value:.6g}  (std_err {result.mc_std_err:.2g}, {result.method.value})")
    return EXIT_OK


def cmd_optimize(args, manifest: RunManifest) -> int:
    cfg, wf, _ = load_run_config(args.config)
    objective = _objective(cfg, load_table(args.rate_table), args, args.neglect_aci)
    result = nelder_mead(cfg, objective, init=wf if args.start_from_config else None)
    detail = objective.evaluate(result.theta_opt)
    write_json({**result.to_dict(), "capacity": detail.to_dict()}, _out(args, "optimize.json"), manifest)
    write_csv(result.trace_frame(), _out(args, "optimize_trace.csv"), "trace", manifest)
    print(f"theta_opt = {result.theta_opt.as_tuple()}  tau' = {result.tau_opt:.6g}")
    return EXIT_OK


def cmd_sweep_L(args, manifest: RunManifest) -> int:
    cfg, _, _ = load_run_config(args.config)
    table = load_table(args.rate_table)
    curves = [(psi, "aci", False) for psi in args.psi]
    if not args.skip_no_aci:
        curves.append((NO_ACI_PSI, "no-aci", True))
    L_values = _L_values(args.L_range)

    rows = []
    for psi, mode, neglect in curves:
        objective = _objective(cfg, table, args, neglect)
        for L in L_values:
            result = nelder_mead(cfg, objective, fixed={"L": L, "psi": psi})
            theta = result.theta_opt
            rows.append({"psi": psi, "L": L, "R_opt": theta.R, "h_opt": theta.h, "tau_opt": result.tau_opt,
                         "mode": mode, "lambda": cfg.density})
            logger.info(f"[cmd_sweep_L] {mode} psi={psi} L={L:g}: tau_opt={result.tau_opt:.6g}")
    df = pd.DataFrame(rows, columns=["psi", "L", "R_opt", "h_opt", "tau_opt", "mode", "lambda"])
    write_csv(df, _out(args, "sweep_L.csv"), "sweep_L", manifest)
    return EXIT_OK


def cmd_sweep_psi(args, manifest: RunManifest) -> int:
    cfg, _, _ = load_run_config(args.config)
    table = load_table(args.rate_table)
    frames = []
    for name in args.fading:
        scenario = cfg.replace(**FADING_MODELS[name])
        df = profile_curve(scenario, "psi", args.psi, _objective(scenario, table, args), progress=args.progress)
        df.insert(0, "fading", name)
        df["sigma_s_db"] = scenario.sigma_s_db
        df["lambda"] = scenario.density
        frames.append(df)
    write_csv(pd.concat(frames, ignore_index=True), _out(args, "sweep_psi.csv"), "sweep_psi", manifest)
    return EXIT_OK


def cmd_table1(args, manifest: RunManifest) -> int:
    configs, references = load_config_set(args.config_set)
    table = load_table(args.rate_table)
    indices = args.rows if args.rows is not None else list(range(len(configs)))
    rows = []
    for index in indices:
        if not 0 <= index < len(configs):
            raise ConfigError(f"row {index} out of range (0..{len(configs) - 1})", field="--rows")
        cfg = configs[index]
        objective = _objective(cfg, table, args)
        result = nelder_mead(cfg, objective)
        detail = objective.evaluate(result.theta_opt)
        row = {
            "r_net": cfg.r_net, "sigma_s_db": cfg.sigma_s_db, "m0": cfg.m0, "m_i": cfg.m_list[0] if cfg.M else math.nan,
            **result.theta_opt.to_dict(), "tau_opt": result.tau_opt, "tau_opt_e3": TABLE1_TAU_SCALE * result.tau_opt,
            "epsilon": detail.epsilon, "lambda": detail.lam,
        }
        reference = references[index]
        if reference is not None:
            row.update(dict(zip(("ref_L", "ref_R", "ref_h", "ref_psi", "ref_tau_e3"), reference)))
        rows.append(row)
        if args.traces:
            write_csv(result.trace_frame(), _out(args, f"table1_trace_{index}.csv"), "trace", manifest)
        logger.info(f"[cmd_table1] row {index}: theta={result.theta_opt.as_tuple()} tau_opt={result.tau_opt:.6g}")
    write_csv(pd.DataFrame(rows), _out(args, "table1.csv"), "table1", manifest, units="tau_opt_e3:1e3*tau_opt")
    return EXIT_OK


def cmd_fig3(args, manifest: RunManifest) -> int:
    cfg, _, _ = load_run_config(args.config)
    table = load_table(args.rate_table)
    df = psi_vs_distance(cfg, args.r, args.alpha, lambda scenario: _objective(scenario, table, args), progress=args.progress)
    write_csv(df, _out(args, "fig3.csv"), "fig3", manifest)
    return EXIT_OK


def cmd_validate(args, manifest: RunManifest) -> int:
    table = load_table(args.rate_table, required=args.suite == "optimizer")
    checks = run_suite(
        args.suite, trials=args.trials, mc_draws=args.mc_draws, seed=args.seed, table=table, workers=args.workers
    )
    passed = all(c.passed for c in checks)
    report = {"suite": args.suite, "passed": passed, "checks": [c.to_dict() for c in checks]}
    write_json(report, _out(args, f"validate_{args.suite}.json"), manifest)
    failed = sum(not c.passed for c in checks)
    print(f"{args.suite}: {len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if passed else EXIT_VALIDATION_FAILED


def cmd_build_table(args, manifest: RunManifest) -> int:
    table = build_rate_table(
        h_grid=args.h_grid, snr_db_grid=args.snr_grid, trials=args.trials,
        seed=args.seed, workers=args.workers, progress=args.progress,
    )
    path = table.save(args.rate_table)
    manifest.outputs.append(os.path.abspath(path))
    print(f"rate table written to {path}")
    return EXIT_OK


# -------------------------
# Parser
# -------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run config (defaults to the reference system)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", default=OUTPUT_DIR, help="output directory")
    common.add_argument("--rate-table", default=RATE_TABLE_PATH)
    common.add_argument("--workers", type=int, default=WORKERS)
    common.add_argument("--mc-draws", type=int, default=SHADOW_MC_DRAWS, help="source shadowing draws for the hybrid average")
    common.add_argument("--no-progress", dest="progress", action="store_false", default=SHOW_PROGRESS)

    parser = argparse.ArgumentParser(prog=CLI_PROG, description=APP_NAME)
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("outage", parents=[common], help="outage probability of one waveform")
    p.add_argument("--method", choices=("conditional", "unshadowed", "shadowed", "mc"), default="unshadowed")
    p.add_argument("--beta-db", type=float, default=None, help="SINR threshold; defaults to C^-1(R) from the rate table")
    p.add_argument("--trials", type=int, default=VALIDATION_TRIALS)
    p.add_argument("--resample", nargs="+", choices=sorted(RESAMPLE_ALL), default=None)
    p.add_argument("--neglect-aci", action="store_true")
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("optimize", parents=[common], help="maximize the MCTC over (L, R, h, psi)")
    p.add_argument("--neglect-aci", action="store_true")
    p.add_argument("--start-from-config", action="store_true", help="start the simplex at the config waveform")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep-L", parents=[common], help="tau'_opt as a function of L")
    p.add_argument("--psi", type=_floats, default=list(SWEEP_L_PSI_VALUES))
    p.add_argument("--L-range", type=_floats, default=None, help="L | lo,hi | lo,hi,step")
    p.add_argument("--skip-no-aci", action="store_true")
    p.set_defaults(func=cmd_sweep_L)

    p = sub.add_parser("sweep-psi", parents=[common], help="tau'_opt as a function of psi per fading model")
    p.add_argument("--psi", type=_floats, default=list(SWEEP_PSI_VALUES))
    p.add_argument("--fading", nargs="+", choices=sorted(FADING_MODELS), default=list(FADING_MODELS))
    p.set_defaults(func=cmd_sweep_psi)

    p = sub.add_parser("table1", parents=[common], help="optimize every row of a config-set")
    p.add_argument("--config-set", default=TABLE1_CONFIG_PATH)
    p.add_argument("--rows", type=lambda s: [int(v) for v in s.split(",")], default=None)
    p.add_argument("--traces", action="store_true", help="also write each row's optimizer trace")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("fig3", parents=[common], help="optimal psi vs normalized source distance")
    p.add_argument("--r", type=_floats, default=list(FIG3_R_VALUES))
    p.add_argument("--alpha", type=_floats, default=list(FIG3_ALPHAS))
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("validate", parents=[common], help="run a self-check suite")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--trials", type=int, default=VALIDATION_TRIALS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-table", parents=[common], help="estimate the CPFSK rate table")
    p.add_argument("--trials", type=int, default=RATE_TRIALS)
    p.add_argument("--h-grid", type=_floats, default=list(RATE_H_GRID))
    p.add_argument("--snr-grid", type=_floats, default=list(RATE_SNR_DB_GRID))
    p.set_defaults(func=cmd_build_table)
    return parser


def _config_input(args) -> Optional[str]:
    """The config file a subcommand actually reads."""
    return getattr(args, "config_set", None) or args.config


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=logging.DEBUG if DEBUG_MODE else LOG_LEVEL,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    parameters = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(subcommand=args.subcommand, config_path=_config_input(args), seed=args.seed, parameters=parameters)
    try:
        ensure_dir(args.out)
        code = args.func(args, manifest)
    except (ConfigError, DomainError) as exc:
        logger.error(f"[{args.subcommand}] configuration error: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (NumericFailure, OptimizationError) as exc:
        logger.error(f"[{args.subcommand}] numeric failure: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_FAILURE
    write_manifest(manifest, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
