"""Command-line interface.

    contraq <subcommand> --config PATH [--out DIR] [--set key=value]... [--seed N]

Subcommands: rates, modulus, lemmas, contract, spline, deconv, report.
Every run writes a manifest (config echo + seed + version) into the output
directory; experiment runs additionally write the CSV, a rendered log-log
figure, and a standalone plot script.  The exit code is 0 exactly when all
checks asserted by the invoked suite pass; failures are listed on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import deconv as dc
from . import rates
from .config import parse_config
from .experiments import (
    DECONV,
    MILD_SEQ,
    SEVERE_SEQ,
    VOLTERRA,
    run_contraction_experiment,
    run_inverse_bound_report,
    run_lemma_suite,
)
from .reporting import emit_csv, emit_plot_script, render_figure, write_manifest

SUBCOMMANDS = ("rates", "modulus", "lemmas", "contract", "spline", "deconv", "report")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contraq",
                                     description="contraction-rate laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key=value config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="key=value", help="override a config key")
        sp.add_argument("--seed", type=int, default=None, help="override the seed")
    return parser


def _cmd_rates(cfg, out: Path) -> list[str]:
    theory = cfg.theory()
    lines = [
        f"regime = {cfg.regime}",
        f"inverse_exponent = {theory.inverse_exponent:.12g}",
        f"direct_exponent = {theory.direct_exponent:.12g}",
        f"log_power_inverse = {theory.log_power_inverse:.12g}",
        f"log_power_direct = {theory.log_power_direct:.12g}",
    ]
    (out / "rates.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return []


def _cmd_modulus(cfg, out: Path) -> list[str]:
    failures = []
    if cfg.regime not in (MILD_SEQ, SEVERE_SEQ):
        return [f"modulus check needs a sequence regime, got {cfg.regime}"]
    spec = cfg.operator_spec()
    lines = []
    for n in cfg.n_grid:
        ts = cfg.tail_set(n)
        mb = rates.modulus_upper_bound(ts, spec, cfg.radius, cfg.beta,
                                       delta=float(n) ** (-cfg.theory().direct_exponent))
        lines.append(
            f"n={n} k_n={ts.k_n} rho_n={ts.rho_n:.6g} "
            f"inversion={mb.inversion_term:.6g} tail={mb.tail_term:.6g} "
            f"bias={mb.bias_term:.6g} total={mb.total:.6g}"
        )
    ts = cfg.tail_set(max(cfg.n_grid))
    head = min(cfg.head_n, 4096)
    if head <= ts.k_n:
        head = 4 * ts.k_n
    try:
        chain = rates.check_modulus_chain(ts, spec, samples=10**4, seed=cfg.seed,
                                          head_n=head)
        lines.append(f"chain: samples={chain.samples} violations={chain.violations} "
                     f"min_slack={chain.min_slack:.6g}")
    except rates.ChainViolation as exc:
        failures.append(str(exc))
    (out / "modulus.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return failures


def _cmd_lemmas(cfg, out: Path) -> list[str]:
    if cfg.regime == VOLTERRA:
        return ["no lemma suite for the volterra regime"]
    report = run_lemma_suite(cfg.regime, seed=cfg.seed)
    lines = []
    failures = []
    for cell in report.cells:
        status = "pass" if cell.passed else "FAIL"
        lines.append(f"[{status}] {cell.name}: {cell.detail}")
        if not cell.passed:
            failures.append(f"lemma cell failed: {cell.name}")
    (out / "lemmas.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return failures


def _asserted_fits(cfg, result):
    """Which slope fits the regime asserts (severe asserts none)."""
    if cfg.regime == MILD_SEQ:
        return [("inverse", result.inverse_fit), ("direct", result.direct_fit)]
    if cfg.regime in (VOLTERRA, DECONV):
        return [("inverse", result.inverse_fit)]
    return []


def _cmd_contract(cfg, out: Path) -> list[str]:
    result = run_contraction_experiment(cfg)
    emit_csv(result.rows, out / "rates.csv")
    render_figure(result, out / "rates.png")
    emit_plot_script(result, out / "plot_rates.py", "rates.csv")
    lines = []
    for d in result.per_n:
        lines.append(f"n={d['n']} inverse={d['mean_inverse']:.6g}+-{d['se_inverse']:.2g} "
                     f"direct={d['mean_direct']:.6g}+-{d['se_direct']:.2g}")
    lines.append(f"inverse slope {result.inverse_fit.slope:.4f} "
                 f"(theory {-result.inverse_fit.theoretical_exponent:.4f})")
    lines.append(f"direct slope {result.direct_fit.slope:.4f} "
                 f"(theory {-result.direct_fit.theoretical_exponent:.4f})")
    failures = []
    for name, fit in _asserted_fits(cfg, result):
        if not fit.passed:
            failures.append(
                f"{name} slope {fit.slope:.4f} misses -{fit.theoretical_exponent:.4f} "
                f"by more than {fit.tolerance}"
            )
    (out / "contract.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return failures


def _cmd_spline(cfg, out: Path) -> list[str]:
    from . import spline_volterra as sv

    if cfg.regime != VOLTERRA:
        cfg = dataclasses.replace(cfg, regime=VOLTERRA)
    design = sv.RegressionDesign.uniform(max(cfg.n_grid), cfg.sigma)
    basis = sv.BSplineBasis(cfg.q, 16 - cfg.q + 1)
    cond = sv.check_design_conditions(design, basis)
    lines = [
        f"design conditions (q={cfg.q}, J=16, n={design.n}): "
        f"d1=({cond.d1[0]:.4g},{cond.d1[1]:.4g}) d2=({cond.d2[0]:.4g},{cond.d2[1]:.4g}) "
        f"pass={cond.passed}"
    ]
    print("\n".join(lines))
    (out / "spline_conditions.txt").write_text("\n".join(lines) + "\n")
    failures = [] if cond.passed else ["design conditions failed"]
    return failures + _cmd_contract(cfg, out)


def _cmd_deconv(cfg, out: Path) -> list[str]:
    if cfg.regime != DECONV:
        cfg = dataclasses.replace(cfg, regime=DECONV)
    kernel = dc.ConvolutionKernel(dc.LAPLACE_P2)
    c_hat, big_c, ok = dc.illposedness_check(kernel, 10.0, 100.0)
    lines = [f"illposedness on [10,100]: c={c_hat:.6f} C={big_c:.6f} pass={ok}"]
    failures = [] if ok and c_hat >= 0.99 else ["illposedness check failed"]
    try:
        chain = dc.check_deconv_chain(kernel, dc.FourierWindow(a_n=8.0, a=1.0),
                                      samples=100, seed=cfg.seed,
                                      priorspec=dc.MixturePriorSpec(c_x=cfg.c_x),
                                      n_ctx=64)
        lines.append(f"chain: samples={chain.samples} violations={chain.violations} "
                     f"min_slack={chain.min_slack:.6g}")
    except dc.ChainViolation as exc:
        failures.append(str(exc))
    print("\n".join(lines))
    (out / "deconv_checks.txt").write_text("\n".join(lines) + "\n")
    return failures + _cmd_contract(cfg, out)


def _cmd_report(cfg, out: Path) -> list[str]:
    if cfg.regime not in (MILD_SEQ, SEVERE_SEQ):
        return [f"report needs a sequence regime, got {cfg.regime}"]
    rep = run_inverse_bound_report(cfg)
    emit_csv(rep.rows, out / "report.csv")
    lines = [
        f"n = {rep.n}",
        f"prior tail mass = {rep.prior_sn_mass.estimate:.3e} "
        f"+- {rep.prior_sn_mass.stderr:.1e}",
        f"measured <= implied in {rep.hold_fraction:.1%} of "
        f"{cfg.replications} replications",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return [] if rep.passed else [
        f"inverse bound held in only {rep.hold_fraction:.1%} of replications (< 95%)"
    ]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides, args.seed)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.txt", cfg, extra={"command": args.command})
    handler = {
        "rates": _cmd_rates,
        "modulus": _cmd_modulus,
        "lemmas": _cmd_lemmas,
        "contract": _cmd_contract,
        "spline": _cmd_spline,
        "deconv": _cmd_deconv,
        "report": _cmd_report,
    }[args.command]
    failures = handler(cfg, out)
    if failures:
        for f in failures:
            print(f"FAIL: {f}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
