"""Command-line experiment runner.

Usage::

    svilab <command> CONFIG.json [--set dotted.path=value ...] [--output DIR]

Commands are ``validate``, ``simulate``, ``mc``, ``convergence``, ``svi`` and
``relaxation``.  The configuration schema ships as ``config_schema.json``
next to this module.  Exit codes: 0 pass, 1 validation failure or failed
assertion, 2 unparsable configuration, 3 numerical blow-up.

Reports are JSON objects with ``schema_version`` 1, the command name, a
SHA-256 hash of the canonical configuration and the seed.  JSON floats use
Python's shortest round-trip representation; CSV floats use 17 significant
digits.  Files are written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .flux import FluxModel, UnsupportedModelError, recession, validate_growth
from .grid import Grid, GridFunction
from .mc import (
    ContractViolation,
    ZSpec,
    contraction_test,
    energy_refinement,
    energy_regularization,
    eps_convergence,
    estimate,
    lsc_corpus,
    lsc_spotcheck,
    relaxation_convergence,
    svi_check,
)
from .noise import ALPHA_MAX, TraceClassError, VerticalNoiseSpec, WienerSampler, check_trace_class, geometric_family
from .stepper import BlowUpError, ConfigError, DirichletVertical, PeriodicNormal, SimConfig, simulate

__all__ = [
    "SCHEMA_VERSION",
    "OUTPUT_ENV",
    "ConfigParseError",
    "ExperimentConfig",
    "load_schema",
    "parse_config",
    "serialize_config",
    "apply_overrides",
    "build_sim_config",
    "build_initial",
    "validate_experiment",
    "main",
]

SCHEMA_VERSION = 1
OUTPUT_ENV = "SVILAB_OUTPUT"
DEFAULT_OUTPUT = "svilab-output"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_BLOWUP = 3


class ConfigParseError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("svilab").joinpath("config_schema.json").read_text())


@dataclass
class ExperimentConfig:
    problem: dict
    run: dict
    initial: dict | None = None
    estimator: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "problem": copy.deepcopy(self.problem),
            "run": copy.deepcopy(self.run),
            "estimator": copy.deepcopy(self.estimator),
        }
        if self.initial is not None:
            d["initial"] = copy.deepcopy(self.initial)
        if self.output is not None:
            d["output"] = self.output
        return d

    @property
    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(d: dict, overrides) -> dict:
    """Apply ``dotted.path=value`` assignments; values are read as JSON when possible."""
    d = copy.deepcopy(d)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigParseError(f"override {item!r} is not of the form path=value")
        path, text = item.split("=", 1)
        keys = [k for k in path.strip().split(".")]
        if not all(keys):
            raise ConfigParseError(f"empty key in override path {path!r}")
        node = d
        for k in keys[:-1]:
            nxt = node.setdefault(k, {})
            if not isinstance(nxt, dict):
                raise ConfigParseError(f"override path {path!r} descends into a non-object")
            node = nxt
        node[keys[-1]] = _coerce(text)
    return d


def parse_config(source, overrides=()) -> ExperimentConfig:
    """Parse JSON text (or an already decoded dict), apply overrides and check the schema."""
    if isinstance(source, (str, bytes)):
        try:
            d = json.loads(source)
        except json.JSONDecodeError as e:
            raise ConfigParseError(f"invalid JSON: {e}") from None
    else:
        d = copy.deepcopy(source)
    if not isinstance(d, dict):
        raise ConfigParseError("configuration must be a JSON object")
    d = apply_overrides(d, overrides)
    try:
        jsonschema.validate(d, load_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigParseError(f"schema violation at {where}: {e.message}") from None
    return ExperimentConfig(
        problem=d["problem"],
        run=d["run"],
        initial=d.get("initial"),
        estimator=d.get("estimator", {}),
        seed=int(d.get("seed", 0)),
        output=d.get("output"),
    )


# builders


def build_flux(cfg: ExperimentConfig) -> FluxModel:
    return FluxModel.from_dict(cfg.problem.get("flux", {"kind": "mean_curvature"}))


def build_noise(cfg: ExperimentConfig) -> VerticalNoiseSpec:
    d = cfg.problem.get("noise", {"family": "geometric", "K": 4})
    if "family" in d:
        return geometric_family(int(d["K"]), d.get("form", "multiplicative"))
    return VerticalNoiseSpec.from_dict(d)


def build_problem(cfg: ExperimentConfig):
    if cfg.problem["bc"] == "dirichlet":
        return DirichletVertical(build_flux(cfg), build_noise(cfg))
    return PeriodicNormal(float(cfg.problem.get("alpha", 0.0)), build_flux(cfg))


def build_sim_config(cfg: ExperimentConfig) -> SimConfig:
    r = cfg.run
    return SimConfig(
        build_problem(cfg),
        n=int(cfg.problem["n"]),
        dt=float(r["dt"]),
        T=float(r["T"]),
        eps=float(cfg.problem.get("eps", 0.0)),
        scheme=r.get("scheme", "semi_implicit"),
        record_stride=int(r.get("record_stride", 1)),
        implicit_flux=r.get("implicit_flux", "linearized"),
    )


def _default_initial(cfg: ExperimentConfig) -> dict:
    k = 1 if cfg.problem["bc"] == "dirichlet" else 2
    return {"kind": "sines", "terms": [{"k": k, "amplitude": 1.0}]}


def build_initial(spec: dict | None, grid: Grid, seed: int = 0) -> np.ndarray:
    """Node values of an initial-condition block on ``grid``."""
    spec = spec or {"kind": "zero"}
    kind = spec["kind"]
    if kind == "zero":
        return np.zeros(grid.n)
    if kind == "constant":
        return np.full(grid.n, float(spec["value"]))
    if kind == "sines":
        out = np.zeros(grid.n)
        for term in spec["terms"]:
            out += float(term.get("amplitude", 1.0)) * np.sin(term["k"] * np.pi * grid.x)
        return out
    if kind == "rademacher":
        rng = np.random.default_rng(int(spec.get("seed", seed)))
        return rng.choice([-1.0, 1.0], size=grid.n)
    raise ConfigError(f"unknown initial condition {kind!r}")


# validation


@dataclass
class Finding:
    check: str
    ok: bool
    message: str

    def to_dict(self):
        return {"check": self.check, "ok": self.ok, "message": self.message}


def validate_experiment(cfg: ExperimentConfig) -> list:
    """Model-level checks: alpha range, growth class, trace class, time-step constraints."""
    out = []
    if cfg.problem["bc"] == "periodic":
        a = float(cfg.problem.get("alpha", 0.0))
        ok = 0.0 <= a <= ALPHA_MAX
        out.append(Finding("alpha", ok, "alpha in [0, sqrt(2)]" if ok else f"alpha out of range: {a} > sqrt(2)"))
    try:
        model = build_flux(cfg)
    except (ValueError, TypeError) as e:
        out.append(Finding("flux", False, str(e)))
        return out
    required = bool(cfg.problem.get("require_linear_growth", True))
    if not model.has_linear_growth:
        ok = not required
        msg = f"growth class: {model.kind} is not of linear growth"
        out.append(Finding("growth_class", ok, msg + ("" if required else " (not required)")))
    else:
        rep = validate_growth(model)
        msg = f"fitted c = {rep.fitted_c:.6g}, C = {rep.fitted_C:.6g}, violations = {rep.violations}"
        out.append(Finding("growth", rep.ok, msg))
    if cfg.problem["bc"] == "dirichlet":
        try:
            total = check_trace_class(build_noise(cfg))
            out.append(Finding("trace_class", True, f"sum mu_k = {total:.17g}"))
        except (TraceClassError, ValueError, TypeError, KeyError) as e:
            out.append(Finding("trace_class", False, str(e)))
    if all(f.ok for f in out):
        try:
            build_sim_config(cfg)
            out.append(Finding("sim_config", True, "time grid and stability constraints hold"))
        except (ConfigError, ValueError) as e:
            out.append(Finding("sim_config", False, str(e)))
    return out


# output


def output_dir(cfg: ExperimentConfig, override: str | None) -> str:
    return override or cfg.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _envelope(cmd: str, cfg: ExperimentConfig, passed: bool, result: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": cmd,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "passed": passed,
        "result": result,
        "config": cfg.to_dict(),
    }


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# commands


def cmd_validate(cfg: ExperimentConfig, out: str) -> int:
    """Check model, noise and time-grid constraints."""
    findings = validate_experiment(cfg)
    ok = all(f.ok for f in findings)
    for f in findings:
        print(f"[{'ok' if f.ok else 'FAIL'}] {f.check}: {f.message}")
    write_atomic(os.path.join(out, "validation.json"), _json(_envelope("validate", cfg, ok, {"findings": [f.to_dict() for f in findings]})))
    return EXIT_OK if ok else EXIT_FAIL


def _heat_kernel_error(cfg: ExperimentConfig, sim: SimConfig, final: np.ndarray) -> float:
    model = sim.flux_model
    init = cfg.initial or _default_initial(cfg)
    if (
        model.kind != "linear"
        or not isinstance(sim.problem, DirichletVertical)
        or sim.problem.noise.K != 0
        or init["kind"] != "sines"
        or len(init["terms"]) != 1
    ):
        raise ConfigError("heat_kernel validation needs linear flux, no noise and a single sine mode")
    term = init["terms"][0]
    lam = (term["k"] * math.pi) ** 2 * (sim.eps + model.coef)
    exact = float(term.get("amplitude", 1.0)) * math.exp(-lam * sim.T) * np.sin(term["k"] * np.pi * sim.grid.x)
    return float(np.linalg.norm(final - exact) / np.linalg.norm(exact))


def cmd_simulate(cfg: ExperimentConfig, out: str) -> int:
    """Simulate one path and write it as CSV with a JSON summary."""
    sim = build_sim_config(cfg)
    x0 = build_initial(cfg.initial or _default_initial(cfg), sim.grid, cfg.seed)
    rec = simulate(sim, GridFunction(sim.grid, x0), WienerSampler(cfg.seed, int(cfg.run.get("stream", 0))))
    buf = io.StringIO()
    rec.write_csv(buf)
    summary = rec.summary()
    passed = True
    if cfg.run.get("validation", "none") == "heat_kernel":
        err = _heat_kernel_error(cfg, sim, rec.states[-1].values)
        summary["heat_kernel_rel_l2_error"] = err
        passed = err <= 1e-3
        print(f"{_status(passed)} heat kernel relative L2 error {err:.3e}")
    write_atomic(os.path.join(out, "path.csv"), buf.getvalue())
    write_atomic(os.path.join(out, "summary.json"), _json(_envelope("simulate", cfg, passed, summary)))
    print(f"wrote {len(rec.times)} snapshot(s) to {out}")
    return EXIT_OK if passed else EXIT_FAIL


def _t_list(est: dict, sim: SimConfig):
    tl = est.get("t_list")
    return tl if tl is not None else [sim.T]


def cmd_mc(cfg: ExperimentConfig, out: str) -> int:
    """Run a Monte Carlo estimate, contraction or energy study."""
    sim = build_sim_config(cfg)
    est = cfg.estimator
    x0 = build_initial(cfg.initial or _default_initial(cfg), sim.grid, cfg.seed)
    M = int(est.get("M", 100))
    mode = est.get("mode", "estimate")
    files = {}
    if mode == "estimate":
        rep = estimate(sim, x0, est.get("statistic", "l2sq_T"), M, cfg.seed)
        result, passed = rep.to_dict(), True
        print(f"{rep.statistic}: mean {rep.mean:.6g} +- {rep.stderr:.3g} (M = {M})")
    elif mode == "contraction":
        if "y0" not in est:
            raise ConfigError("contraction mode needs estimator.y0")
        y0 = build_initial(est["y0"], sim.grid, cfg.seed)
        rep = contraction_test(sim, x0, y0, est.get("t_list"), M, cfg.seed)
        result = rep.to_dict()
        # constant 1 is claimed for the periodic problem only
        passed = rep.passed if isinstance(sim.problem, PeriodicNormal) else True
        files["contraction.csv"] = _csv(["t", "ratio", "stderr"], [(t, r.mean, r.stderr) for t, r in zip(rep.times, rep.reports)])
        print(f"{_status(passed)} contraction: max ratio {rep.c_emp:.6g}")
    elif mode == "energy":
        reps = energy_regularization(sim, x0, _t_list(est, sim), M, cfg.seed)
        result = {"reports": [r.to_dict() for r in reps]}
        passed = all(r.finite for r in reps)
        files["energy.csv"] = _csv(
            ["t", "t_energy", "t_energy_stderr", "weighted_dissipation", "weighted_dissipation_stderr", "energy", "dissipation"],
            [
                (r.t, r.weighted_energy.mean, r.weighted_energy.stderr, r.weighted_dissipation.mean,
                 r.weighted_dissipation.stderr, r.energy.mean, r.dissipation.mean)
                for r in reps
            ],
        )
        print(f"{_status(passed)} energy regularisation at {len(reps)} time(s)")
    else:
        t = float(est.get("t", sim.T))
        ref = energy_refinement(sim, x0, t, M, cfg.seed)
        result = {
            "coarse": ref["coarse"].to_dict(),
            "fine": ref["fine"].to_dict(),
            "rel_change_energy": ref["rel_change_energy"],
            "rel_change_dissipation": ref["rel_change_dissipation"],
        }
        tol = float(est.get("rel_tol", 0.1))
        passed = ref["coarse"].finite and ref["fine"].finite and max(ref["rel_change_energy"], ref["rel_change_dissipation"]) <= tol
        print(f"{_status(passed)} dt-halving: energy {ref['rel_change_energy']:.3%}, dissipation {ref['rel_change_dissipation']:.3%}")
    for name, text in files.items():
        write_atomic(os.path.join(out, name), text)
    write_atomic(os.path.join(out, "mc.json"), _json(_envelope("mc", cfg, passed, {"mode": mode, **result})))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_convergence(cfg: ExperimentConfig, out: str) -> int:
    """Fit the vanishing-viscosity rate."""
    sim = build_sim_config(cfg)
    est = cfg.estimator
    if "eps_pairs" not in est:
        raise ConfigError("convergence needs estimator.eps_pairs")
    x0 = build_initial(cfg.initial or _default_initial(cfg), sim.grid, cfg.seed)
    rep = eps_convergence(
        sim, x0, est["eps_pairs"], int(est.get("M", 100)), cfg.seed,
        tuple(est.get("slope_range", (0.7, 1.3))), float(est.get("min_r2", 0.9)),
    )
    write_atomic(os.path.join(out, "rate.csv"), _csv(["eps_sum", "sup_distance_sq", "stderr"], zip(rep.abscissae, rep.ordinates, rep.stderr)))
    write_atomic(os.path.join(out, "convergence.json"), _json(_envelope("convergence", cfg, rep.passed, rep.to_dict())))
    print(f"{_status(rep.passed)} fitted slope {rep.fitted_slope:.4f}, r^2 {rep.r2:.4f}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_svi(cfg: ExperimentConfig, out: str) -> int:
    """Evaluate the stochastic variational inequality."""
    sim = build_sim_config(cfg)
    est = cfg.estimator
    x0 = build_initial(cfg.initial or _default_initial(cfg), sim.grid, cfg.seed)
    z = est.get("z", {})
    zspec = ZSpec(float(z.get("z0", 0.0)), None, z.get("noise", "normal"))
    rep = svi_check(
        sim, x0, zspec, float(est.get("tau", 0.0)), float(est.get("t", sim.T)),
        int(est.get("M", 100)), cfg.seed, float(est.get("tol", 1e-3)),
    )
    # the literal linear reading carries no claim
    passed = rep.passed if zspec.noise == "normal" else True
    write_atomic(os.path.join(out, "svi.json"), _json(_envelope("svi", cfg, passed, rep.to_dict())))
    print(f"{_status(passed)} SVI margin {rep.margin:.6g} (stderr {rep.stderr:.3g})")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_relaxation(cfg: ExperimentConfig, out: str) -> int:
    """Boundary relaxation table and lower semicontinuity spot checks."""
    est = cfg.estimator
    model = build_flux(cfg)
    u_spec = est.get("u", {"kind": "ramp", "slope": 1.0})
    slope = float(u_spec.get("slope", 1.0))

    def u(x):
        return slope * np.asarray(x, dtype=float)

    jw = est.get("jump_weight", 1.0)
    jw = float(recession(model, 1.0)) if jw == "recession" else float(jw)
    n = int(est.get("relaxation_n", 4096))
    tab = relaxation_convergence(
        u, est.get("j_list", [4, 8, 16, 32, 64]), model, jw, n=n, du=lambda x: slope, rel_tol=float(est.get("rel_tol", 0.01))
    )
    lsc = [lsc_spotcheck(base, seq, model, name=name) for name, (base, seq) in lsc_corpus(n).items()]
    passed = tab.passed and all(r.passed for r in lsc)
    buf = io.StringIO()
    tab.write_csv(buf)
    write_atomic(os.path.join(out, "relaxation.csv"), buf.getvalue())
    result = {"relaxation": tab.to_dict(), "jump_weight": jw, "lsc": [r.to_dict() for r in lsc]}
    write_atomic(os.path.join(out, "relaxation.json"), _json(_envelope("relaxation", cfg, passed, result)))
    print(f"{_status(tab.passed)} relaxed energy error {tab.final_rel_error:.3%} at j = {tab.rows[-1][0]}")
    for r in lsc:
        print(f"{_status(r.passed)} lsc {r.name}: margin {r.margin:.3e} (tol {r.tol:.3e})")
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "convergence": cmd_convergence,
    "svi": cmd_svi,
    "relaxation": cmd_relaxation,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svilab", description="Simulate and verify degenerate SPDEs of linear growth.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("config", help="JSON configuration file ('-' for standard input)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                        help="override a configuration leaf, e.g. run.dt=1e-4")
        sp.add_argument("--output", help=f"output directory (default: config 'output', ${OUTPUT_ENV}, ./{DEFAULT_OUTPUT})")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else open(args.config, encoding="utf-8").read()
        cfg = parse_config(text, args.overrides)
    except (OSError, ConfigParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    out = output_dir(cfg, args.output)
    if args.command != "validate":
        bad = [f for f in validate_experiment(cfg) if not f.ok]
        if bad:
            for f in bad:
                print(f"error: {f.check}: {f.message}", file=sys.stderr)
            return EXIT_FAIL
    try:
        return COMMANDS[args.command](cfg, out)
    except BlowUpError as e:
        print(f"error: blow-up at step {e.step} (stream {e.stream_id})", file=sys.stderr)
        return EXIT_BLOWUP
    except (ConfigError, ContractViolation, UnsupportedModelError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
