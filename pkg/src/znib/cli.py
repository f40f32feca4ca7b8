"""Command-line front end: fit models from CSV, compare families, evaluate
pmfs, simulate draws, compute bootstrap bands, and run the built-in
verification suites.

Exit codes: 0 success, 1 configuration error, 2 data error,
3 non-convergence (report still written), 4 verification violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import distributions as dist
from .distributions import ZipPair, ZnibParams, conditional_oracle, reflect, sample, zip_condition
from .fit import fit_model, powerlink_loglik
from .inference import bootstrap_bands, compare
from .model import (
    ConstantHurdle,
    ConstantLogit,
    DataError,
    Family,
    LogitLinear,
    ModelSpec,
    NoInflation,
    PowerLink,
    SoftmaxCovariate,
    load_csv,
)

log = logging.getLogger("znib")


class ConfigError(ValueError):
    pass


def _fmt(value):
    return f"{value:.10g}"


def _setup_logging():
    level = os.environ.get("ZNIB_LOG", "error").lower()
    mapping = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=mapping.get(level, logging.ERROR))


def _merge_config(args):
    """Optional JSON config file; command-line flags win on conflict."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if getattr(args, key, None) in (None, [], ()):
            setattr(args, key, value)
    return args


def _build_spec(args):
    try:
        family = Family(args.family or "znib")
    except ValueError:
        raise ConfigError(f"unknown family {args.family!r}") from None
    covs = args.covariates or []
    success_cols = ["const"] + covs
    success_link = args.success or "constant"
    if success_link == "constant":
        success = ConstantLogit()
    elif success_link == "covariate":
        success = LogitLinear(tuple(success_cols))
    else:
        raise ConfigError(f"unknown success link {success_link!r}")
    inflation_link = args.inflation or "constant"
    if family in (Family.BINOMIAL, Family.BETA_BINOMIAL):
        inflation = NoInflation()
    elif inflation_link == "constant":
        inflation = ConstantHurdle()
    elif inflation_link == "covariate":
        inflation = SoftmaxCovariate(tuple(success_cols))
    elif inflation_link == "power":
        inflation = PowerLink()
    else:
        raise ConfigError(f"unknown inflation link {inflation_link!r}")
    try:
        return ModelSpec(family, success=success, inflation=inflation)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load(args):
    if not args.input:
        raise ConfigError("--input is required")
    return load_csv(
        args.input,
        y_col=args.y_col or "y",
        n_col=args.n_col,
        n_value=args.n_value,
        mult_col=args.mult_col,
        covariates=args.covariates or [],
        standardize=args.standardize,
    )


def _spec_json(spec):
    return {
        "family": spec.family.value,
        "success": type(spec.success).__name__,
        "inflation": type(spec.inflation).__name__,
    }


def _report(fit, fitted_path=None):
    return {
        "spec": _spec_json(fit.spec),
        "estimates": [
            {
                "name": name,
                "value": float(v),
                "se": None if not np.isfinite(se) else float(se),
                "boundary": bool(flag),
            }
            for name, v, se, flag in zip(
                fit.names, fit.estimates, fit.std_errors, fit.boundary_flags
            )
        ],
        "loglik": float(fit.loglik),
        "aic": float(fit.aic),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "fitted_path": fitted_path,
    }


def _write_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _print_fit_table(fit):
    print(f"family: {fit.spec.family.value}")
    print(f"{'parameter':<18}{'estimate':>14}{'se':>12}  flags")
    for name, v, se, flag in zip(fit.names, fit.estimates, fit.std_errors, fit.boundary_flags):
        se_txt = f"{se:.3f}" if np.isfinite(se) else "-"
        print(f"{name:<18}{v:>14.3f}{se_txt:>12}  {'boundary' if flag else ''}")
    print(f"loglik {_fmt(fit.loglik)}  aic {_fmt(fit.aic)}  "
          f"converged {fit.converged}  iterations {fit.iterations}")


def cmd_fit(args):
    spec = _build_spec(args)
    data = _load(args)
    fit = fit_model(data, spec)
    fitted_path = None
    if args.fitted_out:
        fitted_path = args.fitted_out
        header = "p,q0,qN"
        np.savetxt(fitted_path, fit.fitted, delimiter=",", header=header, comments="")
    report = _report(fit, fitted_path)
    if args.format == "table":
        _print_fit_table(fit)
        if args.out:
            _write_json(report, args.out)
    else:
        _write_json(report, args.out)
    if fit.expected_counts is not None and args.format == "table":
        print("expected counts:", ", ".join(_fmt(v) for v in fit.expected_counts))
    return 0 if fit.converged else 3


def cmd_compare(args):
    families = args.families or []
    if len(families) < 2:
        raise ConfigError("compare needs at least two families (use fit for one)")
    data = _load(args)
    fits, labels = [], []
    for fam in families:
        sub = argparse.Namespace(**vars(args))
        sub.family = fam
        spec = _build_spec(sub)
        fits.append(fit_model(data, spec))
        labels.append(fam)
    table = compare(fits, labels)
    rows = [
        {
            "family": label,
            "aic": float(a),
            "delta_aic": float(d),
            "loglik": float(f.loglik),
            "converged": bool(f.converged),
        }
        for label, f, a, d in table.rows()
    ]
    if args.format == "table":
        print(f"{'family':<12}{'aic':>16}{'delta':>12}  converged")
        for r in rows:
            print(f"{r['family']:<12}{r['aic']:>16.3f}{r['delta_aic']:>12.3f}  {r['converged']}")
    else:
        _write_json({"comparison": rows}, args.out)
    return 0


def cmd_pmf(args):
    params = ZnibParams(args.N, args.p, args.q0, args.qN)
    pmf = dist.znib_pmf_vector(params)
    if args.format == "csv" or args.out:
        lines = ["k,pmf"] + [f"{k},{_fmt(v)}" for k, v in enumerate(pmf)]
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    elif args.format == "json":
        _write_json({"pmf": [float(v) for v in pmf]}, args.out)
    else:
        for k, v in enumerate(pmf):
            print(f"{k:>4}  {_fmt(v)}")
    return 0


def cmd_simulate(args):
    params = ZnibParams(args.N, args.p, args.q0, args.qN)
    draws = sample(params, args.count, seed=args.seed)
    lines = ["y,n"] + [f"{int(v)},{args.N}" for v in draws]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bootstrap(args):
    spec = _build_spec(args)
    data = _load(args)
    fit = fit_model(data, spec)
    if not fit.converged:
        raise DataError("model fit did not converge; cannot bootstrap")
    bands = bootstrap_bands(fit, B=args.boot_B, seed=args.seed)
    lines = ["x,point,lower,upper"]
    for x, pt, lo, hi in zip(bands.grid, bands.point, bands.lower, bands.upper):
        lines.append(f"{_fmt(x)},{_fmt(pt)},{_fmt(lo)},{_fmt(hi)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if bands.unreliable:
        log.error("bands flagged unreliable: %d replicate failures", bands.n_failed)
    return 0


def _verify_grids(small):
    mus = [0.3, 1.0, 3.0] if small else [0.1, 0.3, 1.0, 3.0, 10.0]
    qs = [0.2, 0.7, 1.0] if small else [0.05, 0.2, 0.5, 0.9, 1.0]
    ns = [1, 2, 5] if small else [1, 2, 3, 5, 10, 30]
    return mus, qs, ns


def cmd_verify(args):
    failures = []
    mus, qs, ns = _verify_grids(args.grid == "small")
    max_cond = 0.0
    for mu1 in mus:
        for mu2 in mus:
            for q1 in qs:
                for q2 in qs:
                    for n in ns:
                        pair = ZipPair(mu1, q1, mu2, q2)
                        law = zip_condition(pair, n)
                        if args.inject_fault:
                            law = ZnibParams(
                                law.n_trials, law.p,
                                min(law.q0 + 1e-6, 1.0 - law.qN), law.qN,
                            )
                        diff = np.max(
                            np.abs(dist.znib_pmf_vector(law) - conditional_oracle(pair, n))
                        )
                        max_cond = max(max_cond, diff)
    print(f"conditioning max discrepancy: {max_cond:.3e}")
    if max_cond > 1e-12:
        failures.append("conditioning")

    max_norm = max_mom = max_refl = 0.0
    for n in [0, 1, 2, 3, 8, 20]:
        for p in [0.0, 0.1, 0.5, 0.9, 1.0]:
            for q0, qN in [(0, 0), (0.3, 0), (0, 0.3), (0.2, 0.3), (0.5, 0.5), (1, 0), (0, 1)]:
                law = ZnibParams(n, p, q0, qN)
                pmf = dist.znib_pmf_vector(law)
                max_norm = max(max_norm, abs(pmf.sum() - 1.0))
                mean, var = dist.znib_moments(law)
                k = np.arange(n + 1)
                max_mom = max(max_mom, abs(mean - (k * pmf).sum()))
                max_mom = max(max_mom, abs(var - ((k - mean) ** 2 * pmf).sum()))
                max_refl = max(
                    max_refl,
                    np.max(np.abs(dist.znib_pmf_vector(reflect(law)) - pmf[::-1])),
                )
    print(f"normalization max discrepancy: {max_norm:.3e}")
    print(f"moment max discrepancy: {max_mom:.3e}")
    print(f"reflection max discrepancy: {max_refl:.3e}")
    if max_norm > 1e-10:
        failures.append("normalization")
    if max_mom > 1e-10:
        failures.append("moments")
    if max_refl > 1e-14:
        failures.append("reflection")

    # power-link response symmetry on a synthetic dataset
    rng = np.random.default_rng(7)
    from .model import Dataset

    n_rows = 40
    x = rng.normal(size=n_rows)
    nvec = rng.integers(5, 30, size=n_rows)
    yvec = rng.integers(0, nvec + 1)
    d1 = Dataset(yvec, nvec, np.column_stack([np.ones(n_rows), x]), ("const", "x"))
    d2 = Dataset(nvec - yvec, nvec, d1.X, d1.columns)
    max_sym = 0.0
    for _ in range(5):
        beta = rng.normal(size=2)
        la = rng.normal(size=2)
        v1 = powerlink_loglik(np.concatenate([beta, la]), d1)
        v2 = powerlink_loglik(np.concatenate([-beta, la[::-1]]), d2)
        max_sym = max(max_sym, abs(v1 - v2))
    print(f"power-link symmetry max discrepancy: {max_sym:.3e}")
    if max_sym > 1e-10:
        failures.append("symmetry")

    if failures:
        print("FAILED:", ", ".join(failures))
        return 4
    print("all verification suites passed")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="optional JSON config file; flags win")
    sub.add_argument("--input")
    sub.add_argument("--y-col", dest="y_col", default=None)
    sub.add_argument("--n-col", dest="n_col")
    sub.add_argument("--n-value", dest="n_value", type=int)
    sub.add_argument("--mult-col", dest="mult_col")
    sub.add_argument("--covariates", nargs="*", default=None)
    sub.add_argument("--standardize", action="store_true")
    # defaults resolve after the config-file merge, so leave them unset here
    sub.add_argument("--family", default=None,
                     choices=[f.value for f in Family])
    sub.add_argument("--inflation", default=None,
                     choices=["constant", "covariate", "power"])
    sub.add_argument("--success", default=None,
                     choices=["constant", "covariate"])
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--boot-B", dest="boot_B", type=int, default=200)
    sub.add_argument("--out")
    sub.add_argument("--fitted-out", dest="fitted_out")
    sub.add_argument("--format", default="json", choices=["json", "csv", "table"])


def build_parser():
    parser = argparse.ArgumentParser(prog="znib")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in [
        ("fit", cmd_fit),
        ("compare", cmd_compare),
        ("pmf", cmd_pmf),
        ("simulate", cmd_simulate),
        ("bootstrap", cmd_bootstrap),
        ("verify", cmd_verify),
    ]:
        sub = subs.add_parser(name)
        _add_common(sub)
        sub.set_defaults(func=fn)
    for sub_name, extra in {
        "compare": [("--families", dict(nargs="*", default=None))],
        "pmf": [
            ("--N", dict(type=int, required=True)),
            ("--p", dict(type=float, required=True)),
            ("--q0", dict(type=float, default=0.0)),
            ("--qN", dict(type=float, default=0.0)),
        ],
        "simulate": [
            ("--N", dict(type=int, required=True)),
            ("--p", dict(type=float, required=True)),
            ("--q0", dict(type=float, default=0.0)),
            ("--qN", dict(type=float, default=0.0)),
            ("--count", dict(type=int, default=100)),
        ],
        "verify": [
            ("--grid", dict(default="full", choices=["small", "full"])),
            ("--inject-fault", dict(action="store_true", dest="inject_fault")),
        ],
    }.items():
        sub = subs.choices[sub_name]
        for flag, kw in extra:
            sub.add_argument(flag, **kw)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        code = args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        log.error("data error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
