"""Batch front door: subcommands over a validated run configuration.

Verbs
-----
probe      sample ``||R(z)||`` along the four sector rays and fit growth laws
comb       build and validate the comb sets for every ray
integrate  densify the weighted resolvent integrals A_k and check identities
certify    full pipeline; exit 0 = CERTIFIED, 10 = INCONCLUSIVE, 20 = FAILED
selftest   fast invariant suite over all modules

Each verb writes JSON/CSV artifacts plus an echo of the effective config to
the output directory, which is locked by a sentinel file for the run's
duration.  Identical config and seed give byte-identical outputs.
"""
from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .calculus import QuadOptions, WeightFunction, quadrature_self_test
from .certify import (
    OperatorIntegral,
    POWER_IDENTITY_FLOOR,
    COMMUTATION_FLOOR_FACTOR,
    classify_margins,
    default_comb_tilt,
    densify_operator,
    extract_subspaces,
    non_comparability_check,
    power_identity_residual,
    run_theorem_pipeline,
    certificate_summary_csv,
)
from .combs import CombBudget, build_comb_set, comb_report_json, validate_comb_set
from .config import ConfigError, RunConfig, config_to_json, load_config, override_scalars
from .geometry import (
    CombPlacement,
    Domain,
    Sector,
    build_boundary_contour,
    circle_contour,
    sector_domain,
)
from .operators import (
    jordan_nilpotent,
    make_operator,
    resolvent_defect,
    resolvent_identity_residual,
    unitary_diagonal,
    volterra_analytic,
    weighted_operator_norm,
    weighted_shift,
)
from .probe import estimate_resolvent_norm, fit_growth_model, growth_model_to_dict, samples_to_csv

EXIT_OK = 0
EXIT_INCONCLUSIVE = 10
EXIT_FAILED = 20
EXIT_USAGE = 2

LOCK_NAME = ".combcalc.lock"
_SIGN_TAG = {-1: "minus", +1: "plus"}


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# artifact plumbing


class _RunDir:
    """Output directory with sentinel-file locking; one run at a time."""

    def __init__(self, path: str, seed: int):
        self.path = path
        self.seed = seed
        self._fd = None
        self.written: list[str] = []

    def __enter__(self):
        os.makedirs(self.path, exist_ok=True)
        lock = os.path.join(self.path, LOCK_NAME)
        try:
            self._fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CliError(
                f"output directory {self.path!r} is locked by another run "
                f"(sentinel {LOCK_NAME}); remove it if that run is dead")
        os.write(self._fd, f"pid {os.getpid()}\n".encode())
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
            os.unlink(os.path.join(self.path, LOCK_NAME))
        return False

    def write_json(self, name: str, doc: dict) -> None:
        doc = dict(doc)
        doc.setdefault("seed", self.seed)
        with open(os.path.join(self.path, name), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, sort_keys=True, indent=2))
            fh.write("\n")
        self.written.append(name)

    def write_text(self, name: str, text: str) -> None:
        with open(os.path.join(self.path, name), "w", encoding="utf-8") as fh:
            fh.write(f"# seed={self.seed}\n")
            fh.write(text)
        self.written.append(name)


def _echo_config(run: _RunDir, cfg: RunConfig) -> None:
    with open(os.path.join(run.path, "config_echo.json"), "w", encoding="utf-8") as fh:
        fh.write(config_to_json(cfg))
        fh.write("\n")
    run.written.append("config_echo.json")


def _ray_list(cfg: RunConfig):
    for k, sc in enumerate(cfg.sectors):
        for sign in (-1, +1):
            yield k, sign, sc.sector()


def _budget(cfg: RunConfig, sectors) -> CombBudget:
    alpha = cfg.alpha if cfg.alpha is not None else default_comb_tilt(*sectors)
    return CombBudget(C0=cfg.C0, C1=cfg.c1_multiplier * cfg.C0, alpha=alpha,
                      c0=cfg.c0, p=cfg.p, phi_form="expPower", r_min=cfg.r_min,
                      probe_density=cfg.probe_density,
                      max_bisections=cfg.max_bisections,
                      norm_method=cfg.norm_method)


def _matrix_csv(mat: np.ndarray) -> str:
    lines = ["i,j,re,im"]
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            lines.append(f"{i},{j},{mat[i, j].real:.17g},{mat[i, j].imag:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verbs


def cmd_probe(cfg: RunConfig, run: _RunDir) -> int:
    op = cfg.make_operator()
    radii = cfg.probe_radii or tuple(np.geomspace(0.5, cfg.r_min, 24))
    if min(radii) <= 0.0:
        raise CliError(
            "probe radii grid touches the origin: resolvent pole at z = 0")
    for k, sign, sector in _ray_list(cfg):
        model = fit_growth_model(op, sign * sector.half_angle, sector.direction,
                                 radii, form=cfg.growth_form,
                                 norm_method=cfg.norm_method)
        tag = f"s{k + 1}_{_SIGN_TAG[sign]}"
        run.write_json(f"growth_{tag}.json", growth_model_to_dict(model))
        samples = [
            estimate_resolvent_norm(
                op, r * sector.direction * cmath.exp(1j * sign * sector.half_angle),
                method=cfg.norm_method)
            for r in sorted(radii, reverse=True)
        ]
        run.write_text(f"samples_{tag}.csv", samples_to_csv(samples))
        print(f"probe {tag}: form={model.form} fit residual {model.fit_residual:.3e}")
    return EXIT_OK


def cmd_comb(cfg: RunConfig, run: _RunDir) -> int:
    op = cfg.make_operator()
    sectors = [sc.sector() for sc in cfg.sectors]
    budget = _budget(cfg, sectors)
    worst = 0.0
    for k, sign, sector in _ray_list(cfg):
        placement = CombPlacement(sector.direction, sign, sector.half_angle)
        comb = build_comb_set(op, placement, budget)
        val = validate_comb_set(op, comb, budget, dense_factor=2.0)
        worst = max(worst, val["ratio"])
        tag = f"s{k + 1}_{_SIGN_TAG[sign]}"
        doc = json.loads(comb_report_json(comb, budget, val))
        run.write_json(f"comb_{tag}.json", doc)
        print(f"comb {tag}: {len(comb.a) - 1} rectangles, "
              f"validation ratio {val['ratio']:.4f}")
    if worst > 1.05:
        print(f"worst validation ratio {worst:.4f} exceeds 1.05", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_integrate(cfg: RunConfig, run: _RunDir) -> int:
    op = cfg.make_operator()
    sectors = [sc.sector() for sc in cfg.sectors]
    budget = _budget(cfg, sectors)
    x = np.ones(op.dim, dtype=complex)
    x /= op.norm_vec(x)
    tmat = op.matrix()
    residuals: dict = {}
    floors: dict = {}
    for k, sector in enumerate(sectors):
        combs = [build_comb_set(op, CombPlacement(sector.direction, s, sector.half_angle),
                                budget) for s in (-1, +1)]
        contour = build_boundary_contour(sector, combs, cfg.clip_radius)
        rep = 0.5 * cfg.clip_radius * sector.direction
        errs = quadrature_self_test(contour, points=(rep,))
        if max(errs.values()) > 1e-8:
            raise CliError(f"contour self-test failed on sector {k + 1}: {errs}")
        c_k = cfg.c0 / math.cos((math.pi / 2) * (sector.half_angle / cfg.beta))
        trunc = min(c.inner_radius for c in combs)
        spec = OperatorIntegral(
            WeightFunction(c_k, cfg.p, sector.direction), contour,
            domain=Domain(contour, rep),
            options=QuadOptions(tol=cfg.tol, truncation_radius=trunc,
                                truncation_tol=cfg.truncation_tol),
            label=f"A_{k + 1}")
        dense = densify_operator(op, spec)
        norm = weighted_operator_norm(dense, op.weight)
        run.write_text(f"operator_A{k + 1}.csv", _matrix_csv(dense))
        key = f"commutation_{k + 1}"
        residuals[key] = weighted_operator_norm(tmat @ dense - dense @ tmat, op.weight)
        floors[key] = COMMUTATION_FLOOR_FACTOR * cfg.tol * norm
        for n in range(1, min(3, cfg.n_max) + 1):
            pkey = f"powerIdentity_{k + 1}_n{n}"
            residuals[pkey] = power_identity_residual(op, spec, n, x)
            floors[pkey] = POWER_IDENTITY_FLOOR
        print(f"A_{k + 1}: weighted norm {norm:.6g}, "
              f"commutation {residuals[key]:.3e}")
    doc = {"residuals": {k: float(v) for k, v in residuals.items()},
           "floors": {k: float(v) for k, v in floors.items()}}
    run.write_json("residuals.json", doc)
    bad = [k for k in floors if residuals[k] > floors[k]]
    if bad:
        print("residual floors violated: " + ", ".join(sorted(bad)), file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_certify(cfg: RunConfig, run: _RunDir) -> int:
    op = cfg.make_operator()
    sectors = [sc.sector() for sc in cfg.sectors]
    cert = run_theorem_pipeline(
        op, sectors[0], sectors[1], beta=cfg.beta, C0=cfg.C0, c0=cfg.c0,
        n_max=cfg.n_max, tol=cfg.tol, alpha=cfg.alpha, r_min=cfg.r_min,
        clip_radius=cfg.clip_radius, c1_multiplier=cfg.c1_multiplier,
        rank_threshold=cfg.rank_threshold, truncation_tol=cfg.truncation_tol,
        norm_method=cfg.norm_method)
    run.write_json("certificate.json", cert.to_dict())
    run.write_text("summary.csv", certificate_summary_csv(cert))
    print(f"verdict: {cert.verdict}")
    if cert.reason:
        print(f"reason: {cert.reason}")
    for st in cert.stages:
        if st["status"] != "ok":
            print(f"stage {st['name']}: {st['status']} ({st['detail']})",
                  file=sys.stderr)
    if cert.verdict == "CERTIFIED_NONCOMPARABLE":
        return EXIT_OK
    if cert.verdict == "INCONCLUSIVE_AK_ZERO":
        return EXIT_INCONCLUSIVE
    return EXIT_FAILED


def _selftest_checks():
    rng = np.random.default_rng(3)

    def quadrature():
        worst = 0.0
        sector = Sector(1.0, math.pi / 4)
        for contour in (circle_contour(0.0, 1.0),
                        build_boundary_contour(sector, (), 1.0),
                        sector_domain(sector, clip_radius=1.0).boundary):
            errs = quadrature_self_test(contour, points=(0.4,))
            worst = max(worst, max(errs.values()))
        if worst > 1e-10:
            raise CliError(f"quadrature self-test residual {worst:.3e}")
        return f"worst residual {worst:.3e}"

    def resolvent_contracts():
        ops = [jordan_nilpotent(6), volterra_analytic(32),
               weighted_shift(rng.uniform(0.5, 1.5, size=12)),
               unitary_diagonal(8, rng.uniform(0.1, math.pi, size=8))]
        # radius-0.5 ring: clear of {0}, of volterra's pole at h/2, and of
        # the unit circle carrying the unitary spectra
        pts = [0.5 * cmath.exp(1j * t) for t in (0.3, 1.2, 2.1, -0.9)]
        worst = 0.0
        for op in ops:
            x = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
            for z in pts:
                worst = max(worst, resolvent_defect(op, z, x),
                            resolvent_identity_residual(op, z, z + 0.3j, x))
        if worst > 1e-9:
            raise CliError(f"resolvent contract residual {worst:.3e}")
        return f"4 operators, worst residual {worst:.3e}"

    def comb_builder():
        op = jordan_nilpotent(4)
        budget = CombBudget(C0=72.0, C1=144.0, alpha=math.pi / 6, c0=1.0,
                            p=1.0, phi_form="expPower", r_min=2e-2)
        comb = build_comb_set(op, CombPlacement(1.0, +1, math.pi / 4), budget)
        val = validate_comb_set(op, comb, budget, dense_factor=2.0)
        if val["ratio"] > 1.05:
            raise CliError(f"comb validation ratio {val['ratio']:.4f}")
        return f"validation ratio {val['ratio']:.4f}"

    def power_identity():
        op = jordan_nilpotent(6)
        sector = Sector(1.0, math.pi / 4)
        contour = build_boundary_contour(sector, (), 1.0)
        spec = OperatorIntegral(
            WeightFunction(1.0, 1.0, 1.0), contour,
            options=QuadOptions(tol=1e-8, truncation_radius=0.0))
        x = np.ones(6, dtype=complex) / math.sqrt(6.0)
        res = power_identity_residual(op, spec, 1, x)
        if res > POWER_IDENTITY_FLOOR:
            raise CliError(f"power identity residual {res:.3e}")
        return f"n=1 residual {res:.3e}"

    def lattice_logic():
        a1 = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
        a2 = np.diag([0.0, 1.0, 0.0, 0.0]).astype(complex)
        w = np.ones(4)
        pairs = [extract_subspaces(a, w) for a in (a1, a2)]
        products = (0.0, 0.0, 1.0, 1.0)
        verdict, reason, margins = non_comparability_check(*pairs, products)
        if verdict != "CERTIFIED_NONCOMPARABLE":
            raise CliError(f"diag model verdict {verdict}: {reason}")
        rederived, _ = classify_margins(margins)
        if rederived != verdict:
            raise CliError("margin re-derivation disagrees with verdict")
        return "diag model certified, margins re-derivable"

    def resolvent_probe():
        op = jordan_nilpotent(2)
        est = estimate_resolvent_norm(op, 1.0).norm_estimate
        exact = (1.0 + math.sqrt(5.0)) / 2.0  # top singular value of [[1,1],[0,1]]
        if abs(est - exact) > 1e-6 * exact:
            raise CliError(f"norm estimate {est:.12g} != exact {exact:.12g}")
        return f"jordan(2) resolvent norm matches closed form ({est:.6g})"

    return [("quadrature", quadrature),
            ("resolventContracts", resolvent_contracts),
            ("combBuilder", comb_builder),
            ("powerIdentity", power_identity),
            ("latticeLogic", lattice_logic),
            ("resolventProbe", resolvent_probe)]


def cmd_selftest() -> int:
    failures = 0
    for name, fn in _selftest_checks():
        try:
            detail = fn()
        except Exception as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
            continue
        print(f"ok   {name}: {detail}")
    if failures:
        print(f"{failures} selftest check(s) failed", file=sys.stderr)
        return EXIT_FAILED
    print("selftest passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combcalc",
        description="Resolvent contour calculus over comb-excised sectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, doc in (("probe", "fit resolvent growth models along sector rays"),
                      ("comb", "build and validate comb sets"),
                      ("integrate", "densify A_k and check integral identities"),
                      ("certify", "run the full certification pipeline")):
        sp = sub.add_parser(verb, help=doc)
        sp.add_argument("--config", required=True, help="path to the run config JSON")
        sp.add_argument("--out", default=None, help="output directory override")
        sp.add_argument("--seed", type=int, default=None, help="seed override")
        sp.add_argument("--tol", type=float, default=None,
                        help="quadrature tolerance override")
    sub.add_parser("selftest", help="run the fast invariant suite of all modules")
    return parser


_VERBS = {"probe": cmd_probe, "comb": cmd_comb,
          "integrate": cmd_integrate, "certify": cmd_certify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "selftest":
        return cmd_selftest()
    try:
        cfg = load_config(args.config)
        cfg = override_scalars(cfg, out_dir=args.out, seed=args.seed, tol=args.tol)
        with _RunDir(cfg.out_dir, cfg.seed) as run:
            _echo_config(run, cfg)
            code = _VERBS[args.verb](cfg, run)
            for name in run.written:
                print(f"wrote {os.path.join(run.path, name)}")
        return code
    except (ConfigError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error ({args.verb}): {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
