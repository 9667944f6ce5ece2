"""Command-line interface: ``urnlab {moments,sample,estimate,verify,experiment}``.

Every report carries a ``config`` block with the resolved options, so a run
can be repeated from its output.  The seed is resolved as command-line flag,
then the ``URNLAB_SEED`` environment variable, then the ``--config`` JSON
file, then 0.  Usage errors exit with status 2; ``verify`` exits with 1 when
a required check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .acceptance import CRITERIA, run_acceptance
from .estimators import alpha_hat, good_turing, gt_ci_poisson, species_estimate, REGIMES
from .harness import (
    DEFAULT_S_GRID,
    McReport,
    _clean,
    _fmt,
    check_ci_coverage,
    check_clt,
    check_tail_bounds,
    experiment_asymptotics,
    experiment_lighttail,
    run_replicates,
    search_n0,
)
from .models import MODEL_GRAMMAR, ModelSpecError, parse_model
from .moments import (
    DEFAULT_EPSILON,
    Setting,
    expected_cumulative,
    expected_occupancy,
    moment_report,
    poissonization_gap,
    var_coverage_poisson,
    var_missing_mass_poisson,
    variance_proxies,
)
from .sampler import read_profile, sample_binomial, sample_poisson

EXPERIMENTS = {
    "tail-bounds": "empirical exceedance frequencies against every tail bound of the setting",
    "ci-coverage": "coverage of the Poisson Good-Turing interval, target 1 - 4 delta",
    "clt": "Kolmogorov-Smirnov test of the standardised ratio G0(t)/M0(t)",
    "lighttail": "diagnostics of Good-Turing on fast-decaying (light-tailed) models",
    "asymptotics": "exact moments against the regular-variation equivalents along an n grid",
    "n0-search": "smallest n from which the slow-variation variance certificate holds",
    "poissonization": "Poissonised variances against Monte Carlo, with the implied interval for var K_n",
    "replicates": "mean and standard error of each per-replicate summary",
}

DEFAULTS = {
    "epsilon": DEFAULT_EPSILON,
    "rmax": 5,
    "R": 10_000,
    "delta": None,
    "tau": 2.0,
    "q": 0.05,
    "s_grid": list(DEFAULT_S_GRID),
    "n_grid": None,
    "n0": 1000,
    "format": None,
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _experiment_help() -> str:
    width = max(len(k) for k in EXPERIMENTS)
    return "experiments:\n" + "\n".join(f"  {k.ljust(width)}  {v}" for k, v in EXPERIMENTS.items())


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys mirror the long options")
    p.add_argument("--seed", type=int, default=None, help="master seed (flag > URNLAB_SEED > config > 0)")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="output format (default csv for moments, json otherwise)")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def _add_setting(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help=f"frequency model: {MODEL_GRAMMAR}")
    p.add_argument("--n", type=int, default=None, help="sample size (binomial setting)")
    p.add_argument("--t", type=float, default=None, help="Poisson intensity")
    p.add_argument("--poisson", action="store_true", default=None, help="use the Poisson setting with intensity --t")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urnlab",
        description="Occupancy moments and Good-Turing estimates for the infinite urn scheme.",
        epilog=_experiment_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("moments", help="expected counts and variance proxies")
    _add_common(p)
    _add_setting(p)
    p.add_argument("--rmax", type=int, default=None, help="highest occupancy level (default 5)")
    p.add_argument("--epsilon", type=float, default=None, help="relative tolerance of every certified sum (default 1e-9)")
    p.add_argument("--n0", type=int, default=None, help="threshold from which the slow-variation proxy applies")

    p = sub.add_parser("sample", help="draw one occupancy profile")
    _add_common(p)
    _add_setting(p)

    p = sub.add_parser("estimate", help="Good-Turing and species estimates from a profile file")
    _add_common(p)
    p.add_argument("profile", nargs="?", help="profile as JSON or CSV (symbol,count)")
    p.add_argument("--profile", dest="profile_opt", help="same as the positional argument")
    p.add_argument("--t", type=float, default=None, help="Poisson intensity of the sample")
    p.add_argument("--ci", action="store_true", default=None, help="add the interval for the missing mass (needs --delta)")
    p.add_argument("--delta", type=float, default=None, help="per-tail failure budget, 0 < delta < 1/4")
    p.add_argument("--tau", type=float, default=None, help="growth factor for the species forecast (default 2)")

    for name, helptext in (("verify", "run checks; exit status 1 if a required check fails"),
                           ("experiment", "run an experiment and report it; exit status 0")):
        p = sub.add_parser(name, help=helptext, epilog=_experiment_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_common(p)
        _add_setting(p)
        if name == "verify":
            p.add_argument("--suite", choices=("acceptance",), help="run the acceptance criteria")
            p.add_argument("--criteria", help="comma-separated subset of acceptance criteria, e.g. 1,2,6")
        p.add_argument("--experiment", choices=sorted(EXPERIMENTS), default=None, help="experiment name")
        p.add_argument("--R", type=int, default=None, help="replicates (default 10000)")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
        p.add_argument("--delta", type=float, default=None, help="interval failure budget")
        p.add_argument("--q", type=float, default=None, help="geometric parameter for lighttail (default 0.05)")
        p.add_argument("--s-grid", dest="s_grid", default=None, help="comma-separated exceedance exponents")
        p.add_argument("--n-grid", dest="n_grid", default=None, help="comma-separated sample sizes")
        p.add_argument("--n0", type=int, default=None, help="slow-variation threshold (default 1000)")
    return parser


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve_seed(flag: Optional[int], config: dict, env: Optional[dict] = None) -> int:
    env = os.environ if env is None else env
    if flag is not None:
        return int(flag)
    if env.get("URNLAB_SEED", "").strip():
        try:
            return int(env["URNLAB_SEED"])
        except ValueError:
            raise UsageError("URNLAB_SEED must be an integer") from None
    if "seed" in config:
        return int(config["seed"])
    return 0


def _resolve(args: argparse.Namespace) -> dict:
    """Merge flags, config file and defaults (seed handled separately)."""
    config = _load_config(getattr(args, "config", None))
    opts = dict(DEFAULTS)
    opts.update({k: v for k, v in config.items() if k != "seed"})
    for key, value in vars(args).items():
        if key in ("config", "seed") or value is None:
            continue
        opts[key] = value
    opts["seed"] = resolve_seed(args.seed, config)
    if isinstance(opts.get("s_grid"), str):
        opts["s_grid"] = _float_list(opts["s_grid"], "--s-grid")
    if isinstance(opts.get("n_grid"), str):
        opts["n_grid"] = [int(v) for v in _float_list(opts["n_grid"], "--n-grid")]
    return opts


def _float_list(text: str, flag: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} must be a comma-separated list of numbers") from None


def _model(opts: dict):
    spec = opts.get("model")
    if not spec:
        raise UsageError(f"--model is required; grammar: {MODEL_GRAMMAR}")
    try:
        return parse_model(spec)
    except ModelSpecError as exc:
        msg = str(exc)
        if MODEL_GRAMMAR not in msg:
            msg += f"\nmodel grammar: {MODEL_GRAMMAR}"
        raise UsageError(msg) from None


def _setting(opts: dict, required: bool = True) -> Optional[Setting]:
    n, t = opts.get("n"), opts.get("t")
    if opts.get("poisson") or (t is not None and n is None):
        if t is None:
            raise UsageError("--poisson needs --t")
        if t < 0:
            raise UsageError("--t must be >= 0")
        return Setting.poisson(t)
    if n is not None:
        if n < 0:
            raise UsageError("--n must be >= 0")
        return Setting.binomial(n)
    if required:
        raise UsageError("give --n (binomial) or --t with --poisson")
    return None


def _config_block(opts: dict, keys: Sequence[str]) -> dict:
    return {k: opts.get(k) for k in keys}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _dump_json(payload: dict) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n"


def _rows_csv(rows: list, config: dict, header=("quantity", "r", "value", "error_bound")) -> str:
    buf = io.StringIO()
    for k in sorted(config):
        buf.write(f"# {k}={json.dumps(_clean(config[k]), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, opts: dict) -> None:
    out = opts.get("output")
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_moments(opts: dict) -> int:
    model = _model(opts)
    setting = _setting(opts)
    eps = float(opts["epsilon"])
    rmax = int(opts["rmax"])
    if rmax < 1 or eps <= 0:
        raise UsageError("--rmax must be >= 1 and --epsilon > 0")
    rep = moment_report(model, setting, R=rmax, epsilon=eps)
    rows = list(rep.rows())
    if setting.kind == "binomial":
        if setting.size >= 1:
            vrep = variance_proxies(model, int(setting.size), eps, n0=int(opts["n0"]))
            rows += vrep.rows()
            gap = poissonization_gap(model, int(setting.size), eps)
            lo, hi = gap.var_binomial_interval
            rows += [("var_K_binomial_lower", "", lo, ""), ("var_K_binomial_upper", "", hi, "")]
    else:
        t = setting.size
        vk = var_coverage_poisson(model, t, eps)
        vm = var_missing_mass_poisson(model, t, eps)
        rows.append(("var_K", "", vk.value, vk.error))
        rows.append(("var_M0", "", vm.value, ""))
        if t > 0:
            k2 = expected_occupancy(model, setting, 2, eps)
            k2bar = expected_cumulative(model, setting, 2, eps)
            rows.append(("v_minus", "", 2.0 * k2.value / t**2, 2.0 * k2.error / t**2))
            rows.append(("v_plus", "", 2.0 * k2bar.value / t**2, 2.0 * k2bar.error / t**2))
    config = _config_block(opts, ("command", "model", "n", "t", "poisson", "rmax", "epsilon", "n0", "seed"))
    config["model"] = model.spec
    if opts["format"] == "csv":
        _emit(_rows_csv(rows, config), opts)
    else:
        payload = {
            "config": config,
            "setting": setting.label,
            "truncation_error": rep.truncation_error,
            "rows": [{"quantity": q, "r": r, "value": v, "error_bound": e} for q, r, v, e in rows],
        }
        _emit(_dump_json(payload), opts)
    return 0


def cmd_sample(opts: dict) -> int:
    model = _model(opts)
    setting = _setting(opts)
    seed = opts["seed"]
    if setting.kind == "binomial":
        prof = sample_binomial(model, int(setting.size), seed)
    else:
        prof = sample_poisson(model, setting.size, seed)
    config = _config_block(opts, ("command", "model", "n", "t", "poisson", "seed"))
    config["model"] = model.spec
    if opts["format"] == "csv":
        text = "".join(f"# {k}={json.dumps(config[k])}\n" for k in sorted(config)) + prof.to_csv()
        _emit(text, opts)
    else:
        # flat layout so that the file is itself a readable profile
        payload = dict(prof.to_dict(), config=config, digest=prof.digest())
        _emit(json.dumps(_clean(payload), sort_keys=True, separators=(",", ":")) + "\n", opts)
    return 0


def cmd_estimate(opts: dict) -> int:
    path = opts.get("profile_opt") or opts.get("profile")
    if not path:
        raise UsageError("estimate needs a profile file")
    if opts.get("ci") and opts.get("delta") is None:
        raise UsageError("--ci needs --delta")
    t = opts.get("t")
    try:
        prof = read_profile(path, t=t)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read profile {path}: {exc}") from None
    if prof.n == 0:
        raise UsageError("the profile is empty")
    tau = float(opts["tau"])
    rows = []
    for r in range(0, 4):
        rows.append(("good_turing", r, good_turing(prof, r)))
    for r in range(1, 4):
        rows.append(("alpha_hat", r, alpha_hat(prof, r)))
    a1 = alpha_hat(prof, 1)
    forecasts = {}
    if a1 is not None and 0.0 < a1 <= 1.0 and tau > 1.0:
        forecasts["coverage"] = species_estimate(prof, tau, a1, regime="coverage")
        forecasts["singletons"] = species_estimate(prof, tau, a1, regime="singletons")
        for r in (2, 3):
            try:
                forecasts[f"level_{r}"] = species_estimate(prof, tau, a1, r_used=r, regime="level")
            except ValueError:
                forecasts[f"level_{r}"] = None
    if tau > 1.0:
        forecasts["slow_r1"] = species_estimate(prof, tau, r_used=1, regime="slow")
    for name, value in forecasts.items():
        level = int(name[-1]) if name[-1].isdigit() else 1
        rows.append((f"species_{name.rsplit('_', 1)[0] if name[-1].isdigit() else name}", level, value))
    ci = None
    if opts.get("ci") or (prof.setting == "poisson" and opts.get("delta") is not None):
        try:
            ci = gt_ci_poisson(prof, t, float(opts["delta"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    config = _config_block(opts, ("command", "t", "ci", "delta", "tau", "seed"))
    config["profile"] = os.path.basename(path)
    if opts["format"] == "csv":
        extra = []
        if ci is not None:
            extra = [("ci_lower", "", ci.lower), ("ci_upper", "", ci.upper), ("ci_coverage_target", "", ci.coverage_target)]
        _emit(_rows_csv(rows + extra, config, header=("quantity", "r", "value")), opts)
    else:
        payload = {
            "config": config,
            "n": prof.n,
            "K": prof.K,
            "inputs_digest": prof.digest(),
            "estimates": [{"quantity": q, "r": r, "value": v} for q, r, v in rows],
            "interval": ci.to_dict() if ci is not None else None,
        }
        _emit(_dump_json(payload), opts)
    return 0


def _jobs(opts: dict) -> int:
    jobs = opts.get("jobs")
    return int(jobs) if jobs else (os.cpu_count() or 1)


def run_experiment(opts: dict) -> McReport:
    name = opts.get("experiment")
    if name is None:
        raise UsageError(f"--experiment is required; choose from {', '.join(sorted(EXPERIMENTS))}")
    seed, R, jobs = opts["seed"], int(opts["R"]), _jobs(opts)
    if R < 1:
        raise UsageError("--R must be >= 1")
    if name == "lighttail":
        q = float(opts["q"])
        if not 0.0 < q < 1.0:
            raise UsageError("--q must lie in (0, 1)")
        grid = opts.get("n_grid") or [1_000, 10_000, 100_000]
        return experiment_lighttail(q, grid, R, seed, jobs=jobs)
    model = _model(opts)
    if name == "asymptotics":
        grid = opts.get("n_grid") or [10_000, 100_000, 1_000_000]
        try:
            return experiment_asymptotics(model, grid, seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if name == "n0-search":
        grid = opts.get("n_grid") or [10, 30, 100, 300, 1_000, 3_000, 10_000]
        n0, table = search_n0(model, grid)
        rep = McReport("n0_search", model.spec, "poisson", 0, seed)
        rep.quantities = {"n0": n0, "table": table}
        return rep
    if name in ("ci-coverage", "clt"):
        t = opts.get("t")
        if t is None or t <= 0:
            raise UsageError(f"{name} needs --t > 0")
        if name == "clt":
            return check_clt(model, t, R, seed, jobs)
        delta = opts.get("delta")
        if delta is None:
            raise UsageError("ci-coverage needs --delta")
        try:
            return check_ci_coverage(model, t, float(delta), R, seed, jobs)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    setting = _setting(opts)
    if name == "tail-bounds":
        return check_tail_bounds(model, setting, R, seed, opts["s_grid"], n0=int(opts["n0"]), jobs=jobs)
    if name == "replicates":
        st = run_replicates(model, setting, R, seed, jobs)
        rep = McReport("replicates", model.spec, setting.label, R, seed)
        rep.quantities = st.describe()
        rep.extra = {"replicate_digest": st.digest()}
        return rep
    if name == "poissonization":
        if setting.kind != "binomial" or setting.size < 1:
            raise UsageError("poissonization needs --n >= 1")
        n = int(setting.size)
        gap = poissonization_gap(model, n)
        st = run_replicates(model, setting, R, seed, jobs)
        lo, hi = gap.var_binomial_interval
        var_mc = st.var("K")
        rep = McReport("poissonization", model.spec, setting.label, R, seed)
        if var_mc is not None:
            import math

            x = st.column("K")
            d = x - x.mean()
            se = math.sqrt(max(float((d**4).mean()) - var_mc**2, 0.0) / R)
            from .harness import Verdict

            rep.verdicts.append(Verdict("var K_n >= lower", lo, var_mc, 3.0 * se, kind="lower"))
            rep.verdicts.append(Verdict("var K_n <= Var^ind", hi, var_mc, 3.0 * se, kind="upper"))
        rep.quantities = {"var_MC_K": var_mc, **{k: getattr(gap, k) for k in (
            "var_poisson", "var_ind", "poisson_lower", "poisson_upper", "binomial_lower", "binomial_upper",
            "poisson_chain_holds")}}
        return rep
    raise UsageError(f"unknown experiment {name!r}")


def _flatten(obj, prefix: str = "") -> list:
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj, key=str):
            out += _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, (list, tuple)):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [(prefix, obj)]


def _report_text(rep: McReport, opts: dict, config: dict) -> str:
    if opts["format"] == "csv":
        head = "".join(f"# {k}={json.dumps(_clean(config[k]), sort_keys=True)}\n" for k in sorted(config))
        if rep.verdicts:
            return head + rep.to_csv()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for name, value in _flatten(_clean(rep.quantities)):
            w.writerow([name, _fmt(value) if isinstance(value, (int, float)) else value])
        return head + buf.getvalue()
    payload = rep.to_dict()
    payload["config"] = config
    return _dump_json(payload)


_EXP_KEYS = ("command", "experiment", "model", "n", "t", "poisson", "R", "seed", "delta", "q", "s_grid", "n_grid", "n0")


def cmd_experiment(opts: dict, verify: bool = False) -> int:
    if verify and opts.get("suite") == "acceptance":
        return _verify_acceptance(opts)
    rep = run_experiment(opts)
    config = _config_block(opts, _EXP_KEYS)
    _emit(_report_text(rep, opts, config), opts)
    if verify:
        for v in rep.verdicts:
            if v.required:
                print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}" + (f" s={v.s:g}" if v.s is not None else ""),
                      file=sys.stderr)
        return 0 if rep.passed else 1
    return 0


def _verify_acceptance(opts: dict) -> int:
    only = None
    if opts.get("criteria"):
        try:
            only = sorted({int(v) for v in str(opts["criteria"]).split(",") if v.strip()})
        except ValueError:
            raise UsageError("--criteria must be a comma-separated list of integers") from None
        bad = [k for k in only if k not in CRITERIA]
        if bad:
            raise UsageError(f"unknown criteria {bad}; valid are 1..{max(CRITERIA)}")
    results = run_acceptance(opts["seed"], int(opts["R"]), _jobs(opts), only,
                             echo=lambda line: print(line, file=sys.stderr))
    config = _config_block(opts, ("command", "suite", "criteria", "R", "seed"))
    if opts["format"] == "csv":
        rows = [(r.number, r.title, int(r.passed)) for r in results]
        _emit(_rows_csv(rows, config, header=("criterion", "title", "passed")), opts)
    else:
        _emit(_dump_json({"config": config, "passed": all(r.passed for r in results),
                          "criteria": [r.to_dict() for r in results]}), opts)
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        opts = _resolve(args)
        if opts["format"] is None:
            # the moments table reads best as CSV; reports nest, so JSON elsewhere
            opts["format"] = "csv" if args.command == "moments" else "json"
        if args.command == "moments":
            return cmd_moments(opts)
        if args.command == "sample":
            return cmd_sample(opts)
        if args.command == "estimate":
            return cmd_estimate(opts)
        if args.command == "verify":
            return cmd_experiment(opts, verify=True)
        return cmd_experiment(opts)
    except UsageError as exc:
        parser.exit(2, f"urnlab {args.command}: error: {exc}\n")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
