"""Benchmark command-line interface.

Subcommands drive the experiment suites and emit CSV artifacts plus a
manifest under the output directory:

    sinn verify   [--config F]                 correctness suites, no training
    sinn solve    [--case NAME] [--activations all|a,b,...]
    sinn pinn     [--case NAME]                space-time baseline run
    sinn compare  [--case NAME] [--seeds N]    matched-budget comparison
    sinn march    [--case NAME] [--steps N]    long-time subinterval marching
    sinn inverse  [--case NAME]                material identification

Every run directory receives ``manifest.txt`` (flat key=value, including a
hash of the resolved configuration) and ``resolved_config.json``; with
``--gate`` a run exits non-zero when its headline tolerance is violated.
CSV files are RFC-4180 with one header row and 17-significant-digit floats.
The config file is a YAML/JSON tree; unknown keys are rejected.  Loss
history CSVs log one row per loss evaluation (for plain Adam this equals
one row per iteration; line searches add evaluations).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import statistics
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, geometry, net as netmod, problem as problemmod
from .geometry import Box, Cylinder, Sphere, DIRICHLET, NEUMANN
from .inverse import basis_enumerate, basis_eval
from .metrics import l2_relative_error
from .net import Activation
from .problem import BUILTIN_NAMES, builtin_case, quadratic_inverse_case
from .quadrature import map_nodes, spectral_operator
from .residual import SinnLoss, PinnLoss
from .train import (CarriedState, InverseConfig, TrainConfig, march,
                    solve_inverse, solve_pinn, solve_subinterval, test_points)

_FLOAT_FMT = "{:.17g}"


# ---------------------------------------------------------------------------
# per-case training defaults (desk-scale versions of the reference settings)

_CASE_DEFAULTS = {
    "heat_fgm": dict(p=5, hidden=(15, 15), activation=Activation.SWISH,
                     iterations=2000, n_interior=2092, n_boundary=1200,
                     lr=3e-2, lr_decay=0.03, optimizer="adam"),
    "heat_nl_a": dict(p=5, hidden=(10, 10), activation=Activation.SWISH,
                      iterations=2000, n_interior=500, n_boundary=1200,
                      lr=3e-2, lr_decay=0.03, optimizer="adam"),
    "heat_nl_b": dict(p=8, hidden=(10, 10), activation=Activation.SWISH,
                      iterations=2000, n_interior=500, n_boundary=1200,
                      lr=3e-2, lr_decay=0.03, optimizer="adam"),
    "wave_linear": dict(p=5, hidden=(10, 10, 10), activation=Activation.MISH,
                        iterations=1500, n_interior=1500, n_boundary=1500,
                        lr=1e-2, lr_decay=0.05, optimizer="adam+lbfgs"),
    "wave_sine_gordon": dict(p=5, hidden=(15, 15, 15), activation=Activation.SWISH,
                             iterations=1500, n_interior=1200, n_boundary=1500,
                             lr=1e-2, lr_decay=0.05, optimizer="adam+lbfgs"),
    "inverse_fgm": dict(p=6, hidden=(15, 15, 15), activation=Activation.SWISH,
                        iterations=1500, n_interior=900, n_boundary=1500,
                        lr=1e-2, lr_decay=0.05, optimizer="adam+lbfgs"),
    "inverse_quadratic": dict(p=6, hidden=(15, 15, 15), activation=Activation.SWISH,
                              iterations=1500, n_interior=900, n_boundary=1500,
                              lr=1e-2, lr_decay=0.05, optimizer="adam+lbfgs"),
    "longtime_fgm": dict(p=10, hidden=(15, 15, 15, 15), activation=Activation.MISH,
                         iterations=800, n_interior=800, n_boundary=1000,
                         lr=1e-2, lr_decay=0.05, optimizer="adam+lbfgs"),
}

_MODES = ("verify", "solve", "pinn", "compare", "march", "inverse")

_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_INVERSE_KEYS = {f.name for f in dataclasses.fields(InverseConfig)}
_PROBLEM_KEYS = {"time_interval", "domain", "tagging", "n_interior", "n_boundary"}
_TOP_KEYS = {"case", "mode", "out", "seed", "gate", "train", "inverse",
             "problem", "march", "compare", "solve"}
_MARCH_KEYS = {"n_steps"}
_COMPARE_KEYS = {"seeds"}
_SOLVE_KEYS = {"activations"}


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")


def _parse_activation(name) -> Activation:
    if isinstance(name, Activation):
        return name
    try:
        return Activation[str(name).upper()]
    except KeyError:
        raise ConfigError(f"unknown activation {name!r}; choose from "
                          f"{[a.name.lower() for a in Activation]}") from None


def _parse_domain(node) -> geometry.Domain:
    _check_keys(node, {"shape", "lo", "hi", "center", "radius",
                       "base_center", "height"}, "problem.domain")
    shape = node.get("shape")
    if shape == "box":
        return Box(tuple(node["lo"]), tuple(node["hi"]))
    if shape == "sphere":
        return Sphere(tuple(node["center"]), float(node["radius"]))
    if shape == "cylinder":
        return Cylinder(tuple(node["base_center"]), float(node["radius"]),
                        float(node["height"]))
    raise ConfigError(f"unknown domain shape {shape!r}")


def _parse_tagging(node, domain) -> list:
    _check_keys(node, {"rule", "axis", "cutoff", "below", "above", "tag",
                       "caps", "lateral"}, "problem.tagging")
    rule = node.get("rule")
    tags = {"dirichlet": DIRICHLET, "neumann": NEUMANN}
    if rule == "all":
        return geometry.rule_all(tags[node["tag"]])
    if rule == "threshold":
        axis = {"x": 0, "y": 1, "z": 2}[node["axis"]]
        return geometry.rule_threshold(axis, float(node["cutoff"]),
                                       tags[node["below"]], tags[node["above"]])
    if rule == "cylinder_caps":
        if not isinstance(domain, Cylinder):
            raise ConfigError("cylinder_caps tagging needs a cylinder domain")
        return geometry.rule_cylinder_caps(domain, tags[node["caps"]],
                                           tags[node["lateral"]])
    raise ConfigError(f"unknown tagging rule {rule!r}")


@dataclasses.dataclass
class RunConfig:
    mode: str
    case: str
    out: Path
    gate: bool
    train: TrainConfig
    inverse: InverseConfig
    march_steps: int
    compare_seeds: int
    solve_activations: list
    problem_overrides: dict
    resolved: dict

    @staticmethod
    def load(mode: str, args) -> "RunConfig":
        raw = {}
        if args.config:
            text = Path(args.config).read_text()
            raw = yaml.safe_load(text) or {}
            if not isinstance(raw, dict):
                raise ConfigError(f"{args.config}: config root must be a mapping")
        _check_keys(raw, _TOP_KEYS, "config")
        cfg_mode = raw.get("mode", mode)
        if cfg_mode not in _MODES:
            raise ConfigError(f"unknown mode {cfg_mode!r}")
        if cfg_mode != mode:
            raise ConfigError(f"config mode {cfg_mode!r} conflicts with "
                              f"subcommand {mode!r}")
        case = args.case or raw.get("case", "heat_fgm")
        known_cases = BUILTIN_NAMES + ("inverse_quadratic",)
        if case not in known_cases:
            raise ConfigError(f"unknown case {case!r}; choose from {known_cases}")

        train_raw = dict(raw.get("train", {}))
        _check_keys(train_raw, _TRAIN_KEYS, "train")
        merged = dict(_CASE_DEFAULTS[case])
        merged.update(train_raw)
        if "activation" in merged:
            merged["activation"] = _parse_activation(merged["activation"])
        if args.seed is not None:
            merged["seed"] = args.seed
        train_cfg = TrainConfig(**merged)

        inv_raw = dict(raw.get("inverse", {}))
        _check_keys(inv_raw, _INVERSE_KEYS, "inverse")
        inv_cfg = InverseConfig(**inv_raw)

        prob = dict(raw.get("problem", {}))
        _check_keys(prob, _PROBLEM_KEYS, "problem")

        march_raw = dict(raw.get("march", {}))
        _check_keys(march_raw, _MARCH_KEYS, "march")
        compare_raw = dict(raw.get("compare", {}))
        _check_keys(compare_raw, _COMPARE_KEYS, "compare")
        solve_raw = dict(raw.get("solve", {}))
        _check_keys(solve_raw, _SOLVE_KEYS, "solve")
        acts = solve_raw.get("activations", getattr(args, "activations", None))
        if acts in (None, "all"):
            acts_list = ([a.name.lower() for a in Activation]
                         if acts == "all" else [train_cfg.activation.name.lower()])
        elif isinstance(acts, str):
            acts_list = [a.strip() for a in acts.split(",") if a.strip()]
        else:
            acts_list = list(acts)

        out = Path(args.out or raw.get("out", f"runs/{mode}_{case}"))
        resolved = {
            "mode": mode, "case": case, "out": str(out),
            "gate": bool(args.gate or raw.get("gate", False)),
            "train": {k: (v.name.lower() if isinstance(v, Activation) else
                          list(v) if isinstance(v, tuple) else v)
                      for k, v in dataclasses.asdict(train_cfg).items()},
            "inverse": dataclasses.asdict(inv_cfg),
            "problem": prob,
            "march": {"n_steps": int(march_raw.get("n_steps",
                                                   getattr(args, "steps", None) or 20))},
            "compare": {"seeds": int(compare_raw.get("seeds",
                                                     getattr(args, "seeds", None) or 3))},
            "solve": {"activations": acts_list},
        }
        return RunConfig(
            mode=mode, case=case, out=out, gate=resolved["gate"],
            train=train_cfg, inverse=inv_cfg,
            march_steps=resolved["march"]["n_steps"],
            compare_seeds=resolved["compare"]["seeds"],
            solve_activations=acts_list,
            problem_overrides=prob,
            resolved=resolved,
        )


def _load_case(config: RunConfig):
    if config.case == "inverse_quadratic":
        spec, case = quadratic_inverse_case()
    else:
        spec, case = builtin_case(config.case)
    prob = config.problem_overrides
    changes = {}
    if "time_interval" in prob:
        lo, hi = prob["time_interval"]
        changes["time_interval"] = (float(lo), float(hi))
    if "domain" in prob:
        changes["domain"] = _parse_domain(prob["domain"])
    if "tagging" in prob:
        changes["tag_rule"] = _parse_tagging(prob["tagging"],
                                             changes.get("domain", spec.domain))
    if changes:
        spec = dataclasses.replace(spec, **changes)
    if "n_interior" in prob:
        config.train.n_interior = int(prob["n_interior"])
    if "n_boundary" in prob:
        config.train.n_boundary = int(prob["n_boundary"])
    return spec, case


# ---------------------------------------------------------------------------
# artifact writers


def _write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_FLOAT_FMT.format(v) if isinstance(v, float) else v
                             for v in row])


def _write_manifest(config: RunConfig, extra: dict) -> None:
    config.out.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(config.resolved, sort_keys=True).encode()
    (config.out / "resolved_config.json").write_text(
        json.dumps(config.resolved, indent=2, sort_keys=True) + "\n")
    lines = {
        "mode": config.mode,
        "case": config.case,
        "seed": config.train.seed,
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    lines.update(extra)
    with open(config.out / "manifest.txt", "w") as fh:
        for k, v in lines.items():
            fh.write(f"{k}={v}\n")


def _write_loss_history(path: Path, breakdowns) -> None:
    if not breakdowns:
        return
    p = len(breakdowns[0].pde)
    header = (["epoch"] + [f"pde_{j+1}" for j in range(p)]
              + [f"dbc_{j+1}" for j in range(p)] + [f"nbc_{j+1}" for j in range(p)]
              + ["initial", "total"])
    rows = []
    for e, b in enumerate(breakdowns):
        rows.append([e] + list(b.pde) + list(b.dirichlet) + list(b.neumann)
                    + [b.initial, b.total])
    _write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_verify(config: RunConfig) -> int:
    """Fast correctness suites: quadrature exactness, manufactured-solution
    residuals and derivative spot checks against finite differences."""
    failures = []
    results = []

    def check(name, ok, detail=""):
        results.append((name, bool(ok), detail))
        if not ok:
            failures.append(name)
        print(f"  {'PASS' if ok else 'FAIL'}  {name}  {detail}")

    print("quadrature exactness:")
    for p in range(1, 13):
        op = spectral_operator(p)
        times = map_nodes(op.rule, 0.0, 1.0)
        ok = True
        worst = 0.0
        for m in range(p):
            single = 1.0 * (times**m @ op.s1.T)
            exact = times ** (m + 1) / (m + 1)
            double = 1.0 * (times**m @ op.s2.T)
            exact2 = times ** (m + 2) / ((m + 1) * (m + 2))
            # 1e-15 absolute floor: antiderivatives at the first node fall
            # below float64 resolution for high powers
            for got, want in ((single, exact), (double, exact2)):
                err = np.abs(got - want)
                ok = ok and bool(np.all(err <= 1e-12 * np.abs(want) + 1e-15))
                worst = max(worst, float(np.max(err / (np.abs(want) + 1e-3))))
        check(f"p={p} monomials", ok, f"scaled err {worst:.2e}")

    print("manufactured residuals:")
    for name in BUILTIN_NAMES:
        spec, case = builtin_case(name)
        res = problemmod.verify_manufactured(spec, case, 200, seed=1)
        tol = 1e-5 * (1.0 + problemmod.source_scale(spec))
        check(f"{name} source", res <= tol, f"residual {res:.2e} tol {tol:.2e}")

    print("derivative spot checks:")
    rng = np.random.default_rng(0)
    worst = 0.0
    for kind in Activation:
        mlp = netmod.init_network((3, 8, 1), kind, seed=int(rng.integers(1 << 30)))
        x = rng.uniform(-1, 1, (5, 3))
        jets = netmod.forward_jet_batch(mlp, x)
        h = 1e-5
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            up = netmod.forward_batch(mlp, x + e)
            um = netmod.forward_batch(mlp, x - e)
            g_fd = (up - um) / (2 * h)
            worst = max(worst, float(np.max(np.abs(g_fd - jets.grad[:, i])
                                            / (1 + np.abs(g_fd)))))
    check("network gradients vs finite differences", worst <= 1e-6,
          f"max rel {worst:.2e}")

    _write_manifest(config, {"failures": len(failures)})
    _write_csv(config.out / "verify.csv", ["check", "status", "detail"],
               [(n, "pass" if ok else "fail", d) for n, ok, d in results])
    print(f"{len(results) - len(failures)}/{len(results)} checks passed")
    return 1 if failures else 0


def _train_sinn_once(spec, case, tcfg: TrainConfig):
    state = CarriedState.initial(spec)
    t_end = spec.time_interval[1]
    bundle, report = solve_subinterval(spec, state, t_end, tcfg, case=case)
    return bundle, report, state


def _cmd_solve(config: RunConfig) -> int:
    spec, case = _load_case(config)
    rows = []
    all_ok = True
    for act_name in config.solve_activations:
        tcfg = dataclasses.replace(config.train, activation=_parse_activation(act_name))
        bundle, report, state = _train_sinn_once(spec, case, tcfg)
        e = report.errors
        rows.append([act_name, e["u_l2_end"], e["ux_l2_end"], e["uy_l2_end"],
                     e["uz_l2_end"], report.wall_clock, report.final.total])
        print(f"{act_name:10s} u {e['u_l2_end']:.3e}  ux {e['ux_l2_end']:.3e}  "
              f"uy {e['uy_l2_end']:.3e}  uz {e['uz_l2_end']:.3e}  "
              f"({report.wall_clock:.1f}s)")
        netmod.save_checkpoint(config.out / f"bundle_{act_name}.ckpt", bundle)
        node_rows = [[k, v] for k, v in report.errors.items()]
        _write_csv(config.out / f"errors_{act_name}.csv", ["metric", "value"], node_rows)
        _write_loss_history(config.out / f"loss_history_{act_name}.csv",
                            report.breakdown_history)
        if config.gate and e["u_l2_end"] > 1e-2:
            all_ok = False
    _write_csv(config.out / "solve.csv",
               ["activation", "u_l2", "ux_l2", "uy_l2", "uz_l2", "wall_clock", "loss"],
               rows)
    points = geometry.build_point_set(spec.domain, config.train.n_interior,
                                      config.train.n_boundary, spec.tag_rule,
                                      strategy=config.train.strategy,
                                      seed=config.train.seed)
    geometry.export_csv(points, config.out / "points.csv")
    _write_manifest(config, {"activations": ",".join(config.solve_activations)})
    return 0 if all_ok else 1


def _cmd_pinn(config: RunConfig) -> int:
    spec, case = _load_case(config)
    mlp, report = solve_pinn(spec, config.train, case=case)
    e = report.errors
    print(f"baseline  u {e['u_l2_end']:.3e}  ux {e['ux_l2_end']:.3e}  "
          f"uy {e['uy_l2_end']:.3e}  uz {e['uz_l2_end']:.3e}  "
          f"({report.wall_clock:.1f}s)")
    _write_csv(config.out / "pinn.csv", ["metric", "value"],
               [[k, v] for k, v in e.items()] + [["wall_clock", report.wall_clock]])
    _write_loss_history(config.out / "loss_history.csv", report.breakdown_history)
    _write_manifest(config, {})
    return 0


def _cmd_compare(config: RunConfig) -> int:
    """Matched-budget comparison: same architecture width/point budget and
    iteration count for both solvers, over several seeds."""
    spec, case = _load_case(config)
    rows = []
    sinn_errs, pinn_errs = [], []
    for k in range(config.compare_seeds):
        tcfg = dataclasses.replace(config.train, seed=config.train.seed + k)
        _, rep_s, _ = _train_sinn_once(spec, case, tcfg)
        _, rep_p = solve_pinn(spec, tcfg, case=case)
        sinn_errs.append(rep_s.errors["u_l2_end"])
        pinn_errs.append(rep_p.errors["u_l2_end"])
        rows.append([tcfg.seed, rep_s.errors["u_l2_end"], rep_p.errors["u_l2_end"],
                     rep_s.wall_clock, rep_p.wall_clock])
        print(f"seed {tcfg.seed}: sinn {sinn_errs[-1]:.3e} ({rep_s.wall_clock:.1f}s)"
              f"  pinn {pinn_errs[-1]:.3e} ({rep_p.wall_clock:.1f}s)")
    med_s = statistics.median(sinn_errs)
    med_p = statistics.median(pinn_errs)
    print(f"median: sinn {med_s:.3e}  pinn {med_p:.3e}")
    _write_csv(config.out / "compare.csv",
               ["seed", "sinn_u_l2", "pinn_u_l2", "sinn_seconds", "pinn_seconds"],
               rows)
    _write_manifest(config, {"median_sinn": med_s, "median_pinn": med_p})
    if config.gate and not med_s < med_p:
        print("gate: baseline error not above the spectral solver's", file=sys.stderr)
        return 1
    return 0


def _cmd_march(config: RunConfig) -> int:
    spec, case = _load_case(config)
    ckpt_dir = config.out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    state, reports = march(spec, config.train, config.march_steps, case=case,
                           checkpoint_dir=ckpt_dir)
    t_lo, t_hi = spec.time_interval
    dt = (t_hi - t_lo) / config.march_steps
    rows = []
    for i, rep in enumerate(reports):
        rows.append([i, t_lo + dt * (i + 1), rep.errors.get("u_l2_end", np.nan),
                     rep.errors.get("ux_l2_end", np.nan),
                     rep.errors.get("uy_l2_end", np.nan),
                     rep.errors.get("uz_l2_end", np.nan),
                     rep.final.total, rep.wall_clock])
        print(f"step {i:3d}  t={rows[-1][1]:7.3f}  u {rows[-1][2]:.3e}  "
              f"loss {rep.final.total:.3e}  ({rep.wall_clock:.1f}s)")
    _write_csv(config.out / "march.csv",
               ["step", "t_end", "u_l2", "ux_l2", "uy_l2", "uz_l2", "loss", "seconds"],
               rows)
    errs = [r.errors["u_l2_end"] for r in reports if "u_l2_end" in r.errors]
    growth = max(errs) / errs[0] if errs else np.nan
    _write_manifest(config, {"steps": len(reports), "error_growth": growth})
    aborted = any(r.aborted for r in reports)
    if aborted:
        print("march aborted early; partial results written", file=sys.stderr)
        return 1
    if config.gate and not (growth <= 10.0):
        print(f"gate: error growth {growth:.2f} exceeds 10x", file=sys.stderr)
        return 1
    return 0


def _cmd_inverse(config: RunConfig) -> int:
    spec, case = _load_case(config)
    bundle, params, report = solve_inverse(spec, case, config.train, config.inverse)
    e = report.errors
    print(f"recovered conductivity: max rel {e['kappa_max_rel']:.3e}  "
          f"l2 {e['kappa_l2']:.3e}; heat capacity: max rel {e['rhoc_max_rel']:.3e}"
          f"  ({report.wall_clock:.1f}s)")
    # recovered-field table on the held-out grid
    x = test_points(spec, config.train)
    basis = basis_enumerate(config.inverse.order)
    d_hat, _ = basis_eval(basis, params.alpha, x)
    kappa_hat = params.lambda1 * d_hat
    rhoc_hat = params.lambda2 * d_hat
    kappa_true = spec.kappa.value(x)
    rhoc_true = spec.rho_c.value(x)
    rows = [[*xi, kh, kt, abs((kh - kt) / kt), rh, rt, abs((rh - rt) / rt)]
            for xi, kh, kt, rh, rt in zip(x, kappa_hat, kappa_true, rhoc_hat, rhoc_true)]
    _write_csv(config.out / "recovered_fields.csv",
               ["x", "y", "z", "kappa_hat", "kappa_true", "kappa_rel_err",
                "rhoc_hat", "rhoc_true", "rhoc_rel_err"], rows)
    _write_loss_history(config.out / "loss_history.csv", report.breakdown_history)
    netmod.save_checkpoint(config.out / "bundle.ckpt", bundle)
    _write_manifest(config, {"kappa_max_rel": e["kappa_max_rel"],
                             "noise": config.inverse.noise,
                             "fraction": config.inverse.fraction})
    if config.gate:
        tol = 5e-2 if config.inverse.noise == 0 else 1e-1
        if e["kappa_max_rel"] > tol:
            print(f"gate: recovery error {e['kappa_max_rel']:.3e} above {tol}",
                  file=sys.stderr)
            return 1
    return 0


_COMMANDS = {
    "verify": _cmd_verify,
    "solve": _cmd_solve,
    "pinn": _cmd_pinn,
    "compare": _cmd_compare,
    "march": _cmd_march,
    "inverse": _cmd_inverse,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinn",
        description="Spectral integrated neural network PDE benchmark runner")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in _MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="YAML/JSON run configuration file")
        p.add_argument("--case", help=f"builtin case ({', '.join(BUILTIN_NAMES)})")
        p.add_argument("--seed", type=int, help="override the training seed")
        p.add_argument("--gate", action="store_true",
                       help="exit non-zero when the headline tolerance fails")
        p.add_argument("--out", help="output directory")
        if mode == "march":
            p.add_argument("--steps", type=int, help="number of subintervals")
        if mode == "compare":
            p.add_argument("--seeds", type=int, help="number of seeds")
        if mode == "solve":
            p.add_argument("--activations",
                           help="comma list of activations, or 'all'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.mode, args)
    except (ConfigError, FileNotFoundError, KeyError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    config.out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[config.mode](config)


if __name__ == "__main__":
    sys.exit(main())
