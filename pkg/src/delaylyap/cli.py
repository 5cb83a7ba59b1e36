"""Command line audit of the auxiliary boundary value problem.

    delaylyap analyze  CONFIG.json | --preset NAME   rank/symmetry diagnostics
    delaylyap oracle   CONFIG.json | --preset NAME   brute-force U(tau) to CSV
    delaylyap verify   CONFIG.json | --preset NAME   exit 0 iff every claim passes

Exit codes: 0 pass, 1 a claim failed, 2 usage / malformed config, 3 numerical
failure (e.g. the system does not decay).
"""

import argparse
import csv
from dataclasses import dataclass, field
import json
import math
import sys

import numpy as np

from . import dde_oracle, lifted_bvp
from .errors import DimensionError, GridError, InstabilityError, UnsupportedGeneralization
from .lifted_bvp import SystemSpec

EXIT_OK, EXIT_CLAIM, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

PRESETS = {
    # W is not given for this example in the source; W = I is our choice.
    "kharitonov2006-example": {
        "A0": [[-1.0, 0.0], [0.0, -1.0]],
        "A1": [[0.0, 1.0], [-1.0, 0.0]],
        "B0": [[0.3, 0.0], [0.0, 0.3]],
        "B1": [[0.0, 0.3], [-0.3, 0.0]],
        "W": [[1.0, 0.0], [0.0, 1.0]],
        "h": 1.0,
        "omega": math.pi,
    },
    "scalar-decay": {
        "A0": [[-1.0]], "A1": [[0.0]], "B0": [[0.0]], "B1": [[0.0]], "W": [[1.0]],
        "h": 1.0, "omega": math.pi,
    },
    "delay-free-2d": {
        "A0": [[-1.0, 0.0], [0.0, -1.0]],
        "A1": [[0.0, 0.0], [0.0, 0.0]],
        "B0": [[0.0, 0.0], [0.0, 0.0]],
        "B1": [[0.0, 0.0], [0.0, 0.0]],
        "W": [[1.0, 0.0], [0.0, 1.0]],
        "h": 1.0, "omega": math.pi,
    },
}

DEFAULT_NUMERICS = {
    "dt": dde_oracle.DEFAULT_DT,
    "tau_step": dde_oracle.DEFAULT_TAU_STEP,
    "rel_tol": 1e-8,
    "decay_threshold": dde_oracle.DEFAULT_DECAY_THRESHOLD,
    "horizon_cap": dde_oracle.DEFAULT_HORIZON_CAP,
}

THRESHOLDS = {
    "lemma1_residual_max": 0.0,
    "spectral_oddity_max": 1e-9,
    "min_gap_ratio": lifted_bvp.MIN_GAP_RATIO,
    "null_direction_rel_max": 1e-8,
    "oracle_residual_max": 1e-3,
}


class UsageError(Exception):
    pass


@dataclass
class AnalysisConfig:
    system: SystemSpec
    system_source: str
    numerics: dict
    outputs: dict = field(default_factory=dict)


def _spec_from_dict(d):
    unknown = set(d) - {"n", "A0", "A1", "B0", "B1", "W", "h", "omega"}
    if unknown:
        raise UsageError(f"unknown system keys: {sorted(unknown)}")
    missing = [k for k in ("A0", "A1", "B0", "B1", "W") if k not in d]
    if missing:
        raise UsageError(f"system is missing {missing}")
    try:
        spec = SystemSpec(
            A0=d["A0"], A1=d["A1"], B0=d["B0"], B1=d["B1"], W=d["W"],
            h=float(d.get("h", 1.0)), omega=float(d.get("omega", math.pi)),
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid system: {exc}") from exc
    if "n" in d and d["n"] != spec.n:
        raise UsageError(f"n = {d['n']} does not match {spec.n}x{spec.n} matrices")
    return spec


def load_config(path=None, preset=None):
    """Build an :class:`AnalysisConfig` from a JSON file and/or a preset name."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
    unknown = set(doc) - {"system", "preset", "numerics", "outputs"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")

    sources = [s for s in (doc.get("system"), doc.get("preset"), preset) if s is not None]
    if len(sources) != 1:
        raise UsageError("give exactly one of: system matrices, a preset in the config, --preset")
    name = doc.get("preset", preset)
    if name is not None:
        if name not in PRESETS:
            raise UsageError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        spec, source = _spec_from_dict(PRESETS[name]), f"preset:{name}"
    else:
        if not isinstance(doc["system"], dict):
            raise UsageError("system must be a JSON object")
        spec, source = _spec_from_dict(doc["system"]), f"file:{path}"

    numerics = dict(DEFAULT_NUMERICS)
    given = doc.get("numerics", {})
    if set(given) - set(DEFAULT_NUMERICS):
        raise UsageError(f"unknown numerics keys: {sorted(set(given) - set(DEFAULT_NUMERICS))}")
    numerics.update(given)
    for key, value in numerics.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0 \
                or not math.isfinite(value):
            raise UsageError(f"numerics.{key} must be a positive number, got {value!r}")
        numerics[key] = float(value)
    if not numerics["decay_threshold"] < 1:
        raise UsageError("numerics.decay_threshold must be below 1")

    outputs = {"report_path": None, "csv_path": None, "verbosity": 1}
    if set(doc.get("outputs", {})) - set(outputs):
        raise UsageError(f"unknown outputs keys: {sorted(set(doc['outputs']) - set(outputs))}")
    outputs.update(doc.get("outputs", {}))
    return AnalysisConfig(spec, source, numerics, outputs)


@dataclass
class AuditReport:
    system: dict
    numerics: dict
    thresholds: dict
    lemma1_residual: float = None
    spectral_oddity: float = None
    theorem1: dict = None
    corollary1: dict = None
    solvability: dict = None
    oracle: dict = None
    verdicts: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "system": self.system,
            "numerics": self.numerics,
            "thresholds": self.thresholds,
        }
        for key in ("lemma1_residual", "spectral_oddity", "theorem1", "corollary1",
                    "solvability", "oracle"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        out["verdicts"] = {k: ("pass" if v else "fail") for k, v in self.verdicts.items()}
        return out

    @property
    def passed(self):
        return all(self.verdicts.values())

    def claim(self, name, ok, measured, threshold):
        self.verdicts[name] = bool(ok)
        self.measured[name] = (measured, threshold)


def _system_dict(config):
    spec = config.system
    return {
        "source": config.system_source,
        "n": spec.n,
        "h": spec.h,
        "omega": spec.omega,
        **{k: getattr(spec, k).tolist() for k in ("A0", "A1", "B0", "B1", "W")},
    }


def _new_report(config, perturb_h=None):
    numerics = dict(config.numerics)
    if perturb_h is not None:
        numerics["perturb_h"] = perturb_h
    return AuditReport(system=_system_dict(config), numerics=numerics, thresholds=dict(THRESHOLDS))


def run_lifted(config, report, perturb_h=None):
    """Fill ``report`` with the lifted-problem diagnostics and their verdicts."""
    spec = config.system
    rel_tol = config.numerics["rel_tol"]
    lift = lifted_bvp.build_H(spec)
    if perturb_h is not None:
        lift = lifted_bvp.perturb_H(lift, perturb_h)
    E = lift.exp_H()
    n2 = spec.n * spec.n
    th = report.thresholds

    report.lemma1_residual = lifted_bvp.lemma1_residual(lift)
    report.claim("lemma1", report.lemma1_residual <= th["lemma1_residual_max"],
                 report.lemma1_residual, f"<= {th['lemma1_residual_max']:g}")

    report.spectral_oddity = lifted_bvp.spectral_symmetry_check(lift)
    report.claim("spectral_symmetry", report.spectral_oddity <= th["spectral_oddity_max"],
                 report.spectral_oddity, f"<= {th['spectral_oddity_max']:g}")

    t1 = lifted_bvp.theorem1_diagnostics(lift, rel_tol, expH=E)
    report.theorem1 = t1.to_dict()
    report.claim("theorem1_plus_nullity", t1.plus.nullity == 2 * n2, t1.plus.nullity, f"== {2 * n2}")
    report.claim("theorem1_minus_nullity", t1.minus.nullity == 2 * n2, t1.minus.nullity, f"== {2 * n2}")
    gap = min(t1.plus.gap_ratio, t1.minus.gap_ratio)
    report.claim("theorem1_gap", gap >= th["min_gap_ratio"], gap, f">= {th['min_gap_ratio']:g}")

    c1 = lifted_bvp.corollary1_diagnostics(lift, rel_tol, expH=E)
    report.corollary1 = c1.to_dict()
    report.claim("corollary1_dependent", c1.verdict == "dependent", c1.three_row.rank, f"< {3 * n2}")

    # Solvability uses the unperturbed boundary rows closed with the (possibly
    # perturbed) exponential, so the negative control propagates here too.
    sol = lifted_bvp.bvp_solvability(spec, rel_tol, expH=E)
    K, _ = lifted_bvp.full_operator(spec, expH=E)
    null_rel = 0.0
    if len(sol.sample_solutions) == 2:
        delta = sol.sample_solutions[1] - sol.sample_solutions[0]
        null_rel = float(np.linalg.norm(K @ delta) / np.linalg.norm(delta))
    report.solvability = {**sol.to_dict(), "null_direction_rel_residual": null_rel}
    report.claim("non_unique", sol.operator_rank.rank < 4 * n2, sol.operator_rank.rank, f"< {4 * n2}")
    report.claim("null_direction", null_rel <= th["null_direction_rel_max"], null_rel,
                 f"<= {th['null_direction_rel_max']:g}")
    return report


def run_oracle(config, report):
    """Compute U(tau) by definition, record residuals, return the samples."""
    spec = config.system
    num = config.numerics
    U = dde_oracle.lyapunov_by_definition(
        spec, tau_step=num["tau_step"], dt=num["dt"],
        decay_threshold=num["decay_threshold"], horizon_cap=num["horizon_cap"],
    )
    residuals = {
        "dynamic": dde_oracle.dynamic_residual(U, spec),
        "symmetric": dde_oracle.symmetry_residual(U),
        "algebraic": dde_oracle.algebraic_residual(U, spec),
    }
    report.oracle = {
        "residuals": residuals,
        "t_max": U.t_max,
        "dt": num["dt"],
        "tau_step": num["tau_step"],
        "U0": U.at(0).tolist(),
    }
    limit = report.thresholds["oracle_residual_max"]
    for name, value in residuals.items():
        report.claim(f"oracle_{name}", value <= limit, value, f"<= {limit:g}")
    return U


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    return json.dumps(x)


def dumps_report(obj, indent=0):
    """JSON with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps_report(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps_report(v) for v in obj) + "]"
        items = [pad + dumps_report(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (np.floating, float)):
        return _fmt(float(obj))
    if isinstance(obj, (np.integer, int)):
        return str(int(obj))
    return _fmt(obj)


def write_report(report, path):
    with open(path, "w") as fh:
        fh.write(dumps_report(report.to_dict()) + "\n")


def write_csv(U, path):
    n = U.values.shape[1]
    header = ["tau"] + [f"u{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for tau, value in zip(U.taus, U.values):
            writer.writerow([format(float(tau), ".17g")] + [format(float(v), ".17g") for v in value.ravel()])


def print_table(report, out=None):
    out = sys.stdout if out is None else out
    print(f"{'claim':<24} {'measured':>24} {'threshold':>14}  verdict", file=out)
    for name, ok in report.verdicts.items():
        measured, threshold = report.measured[name]
        shown = format(measured, ".6g") if isinstance(measured, float) else str(measured)
        print(f"{name:<24} {shown:>24} {threshold:>14}  {'PASS' if ok else 'FAIL'}", file=out)


def cmd_analyze(config, out=None):
    out = sys.stdout if out is None else out
    report = run_lifted(config, _new_report(config))
    if config.outputs.get("report_path"):
        write_report(report, config.outputs["report_path"])
    if config.outputs.get("verbosity", 1) > 0:
        print_table(report, out)
    return report


def cmd_oracle(config, out=None):
    out = sys.stdout if out is None else out
    report = _new_report(config)
    U = run_oracle(config, report)
    if config.outputs.get("csv_path"):
        write_csv(U, config.outputs["csv_path"])
    if config.outputs.get("report_path"):
        write_report(report, config.outputs["report_path"])
    if config.outputs.get("verbosity", 1) > 0:
        print(f"t_max = {U.t_max:g}, dt = {config.numerics['dt']:g}, "
              f"tau_step = {config.numerics['tau_step']:g}", file=out)
        print_table(report, out)
    return U, report


def cmd_verify(config, perturb_h=None, with_oracle=True, out=None):
    out = sys.stdout if out is None else out
    report = run_lifted(config, _new_report(config, perturb_h), perturb_h=perturb_h)
    if with_oracle:
        U = run_oracle(config, report)
        if config.outputs.get("csv_path"):
            write_csv(U, config.outputs["csv_path"])
    if config.outputs.get("report_path"):
        write_report(report, config.outputs["report_path"])
    for name, ok in report.verdicts.items():
        measured, threshold = report.measured[name]
        shown = format(measured, ".6g") if isinstance(measured, float) else str(measured)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {shown} ({threshold})", file=out)
    return EXIT_OK if report.passed else EXIT_CLAIM


def build_parser():
    parser = argparse.ArgumentParser(
        prog="delaylyap",
        description="Audit the auxiliary boundary value problem for delay Lyapunov matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analyze", "rank and symmetry diagnostics of the lifted problem"),
        ("oracle", "compute U(tau) from its defining integral"),
        ("verify", "check every claim; exit 0 iff all pass"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", nargs="?", help="JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in system")
        p.add_argument("--report", help="write the JSON report here")
        if name != "analyze":
            p.add_argument("--csv", help="write U(tau) samples here")
        if name == "verify":
            p.add_argument("--perturb-h", type=float, default=None, metavar="EPS",
                           help="add EPS to H[0, 0] (negative control)")
            p.add_argument("--no-oracle", action="store_true", help="skip the brute-force oracle")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.config is None and args.preset is None:
            raise UsageError("give a config file or --preset")
        config = load_config(args.config, args.preset)
        if args.report:
            config.outputs["report_path"] = args.report
        if getattr(args, "csv", None):
            config.outputs["csv_path"] = args.csv
        if args.command == "analyze":
            cmd_analyze(config)
            return EXIT_OK
        if args.command == "oracle":
            cmd_oracle(config)
            return EXIT_OK
        return cmd_verify(config, perturb_h=args.perturb_h, with_oracle=not args.no_oracle)
    except (UsageError, UnsupportedGeneralization, GridError, DimensionError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
