"""Experiment orchestration: run checks, write CSV/JSON reports, a summary and a manifest.

Artifacts per subcommand (columns are fixed; floats are written with
``repr`` so identical computations give byte-identical files):

``verify-identities``
    ``identities.csv``: identity, potential, radius, shell_max.
    ``identity_fits.csv``: identity, potential, fit, slope, target, passed.
``mass-convergence``
    ``mass.csv``: potential, eps, rho, flux_F, flux_S, correction_s, M_eps, quad_error, quad_converged.
    ``mass_limits.csv``: potential, M, C, beta, status, oracle, oracle_scale.
``small-terms``
    ``small_terms.csv``: eps1, eps2, k, integral, quad_error, literal_bound, corrected_bound.
``evaluation-check``
    ``evaluation.csv``: potential, field, eps, lhs_half_2_minus_n_M, rhs_G_flux, rhs_W_boundary, rhs_total, gap, rel_gap.
``decay-audit``
    ``decay.csv``: radius, shell_max.
    ``cutoff.csv``: eps plus the cutoff audit fields listed in :data:`CUTOFF_COLUMNS`.

Each subcommand also writes ``<subcommand>.json`` (the rows plus fits, notes and
warnings).  ``summary.txt`` lists every check; ``manifest.json`` records the
config hash, toolkit version, generator, per-check status and the files with
their sha256.  ``config.yaml`` (the resolved config, output directory included)
is left out of the file list; the config hash already identifies it without the
output directory, so reruns into different directories give equal manifests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import build_family, emit_config
from .mass import MASS_COLUMNS, mass, mass_oracle
from .perturbations import decay_audit, shell_points
from .theorem import (
    CROSSCHECK_COLUMNS,
    SMALL_TERMS_COLUMNS,
    build_cutoff_metric,
    check_horosphere_identity,
    check_scalar_divergence,
    cutoff_audit,
    evaluation_crosscheck,
    scaling_slope,
    small_terms_report,
)

__all__ = ["SUBCOMMANDS", "CheckResult", "RunManifest", "Runner", "run", "CUTOFF_COLUMNS"]

SUBCOMMANDS = ("verify-identities", "mass-convergence", "small-terms", "evaluation-check", "decay-audit")
GENERATOR = "numpy.random.default_rng (PCG64)"
CUTOFF_COLUMNS = [
    "eps", "equals_b_inside", "equals_g_outside", "chi_in_unit_interval", "dominated", "domination_ratio",
    "r_far", "far_decay_slope", "sup_chi", "min_chi", "sup_grad_chi", "sup_hess_chi",
    "log_scaled_grad_chi1", "log_scaled_hess_chi1", "C", "passed",
]


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | warn
    detail: str = ""

    @property
    def ok(self):
        return self.status != "fail"


@dataclass
class RunManifest:
    config_hash: str
    version: str
    seed: int
    generator: str
    checks: dict
    files: list = field(default_factory=list)

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "seed": self.seed,
            "generator": self.generator,
            "checks": dict(self.checks),
            "files": list(self.files),
        }


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


class Runner:
    """Runs subcommands for one config and collects artifacts in ``out``."""

    def __init__(self, cfg, out=None):
        self.cfg = cfg
        self.out = out or cfg.output.dir
        self.family = build_family(cfg)
        self.spec = cfg.quadrature.spec()
        self.results = []
        self.files = []

    # -- writers

    def _path(self, name):
        os.makedirs(self.out, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return os.path.join(self.out, name)

    def write_csv(self, name, columns, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        with open(self._path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())

    def write_json(self, name, payload):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def record(self, name, ok, detail="", warn=False):
        status = "pass" if ok else ("warn" if warn else "fail")
        self.results.append(CheckResult(name, status, detail))
        return status

    # -- subcommands

    def verify_identities(self):
        cfg, fam = self.cfg, self.family
        ch = cfg.checks
        radii = np.geomspace(ch.identity_radii[0], ch.identity_radii[1], ch.identity_shells)
        tau = cfg.effective_tau if fam.label == "tail" else fam.tau
        rows, fits, payload = [], [], []
        rng = np.random.default_rng(cfg.seed)
        pts = self._scaling_points(rng)
        for V in cfg.potentials():
            for check in (check_scalar_divergence, check_horosphere_identity):
                rep = check(fam, V, radii=radii, tau=tau, per_shell=ch.per_shell, seed=cfg.seed)
                rows += [[rep.name, V, r, m] for r, m in zip(rep.radii, rep.shell_max)]
                fits.append([rep.name, V, "decay_in_r", rep.slope, rep.threshold, rep.passed])
                self.record(f"{rep.name}_decay[V{V}]", rep.passed,
                            "; ".join(rep.notes) or f"slope {rep.slope:.3f} vs <= {rep.threshold:.3f}")
                d = rep.to_dict()
                d["potential"] = V
                payload.append(d)
            for kind in ("scalar", "horosphere"):
                name = "scalar_divergence" if kind == "scalar" else "horosphere_identity"
                p = pts if kind == "scalar" else self._slice(pts)
                slope, s, vals = self._scaling(fam, V, p, kind)
                ok = not np.isfinite(slope) or abs(slope - 2.0) <= 0.2
                fits.append([name, V, "scaling_in_s", slope, 2.0, ok])
                self.record(f"{name}_scaling[V{V}]", ok,
                            "residual vanishes identically" if not np.isfinite(slope) else f"slope {slope:.3f} vs 2 +- 0.2")
                payload.append({"name": name, "potential": V, "fit": "scaling_in_s", "slope": slope,
                                "s": s, "max_residual": vals})
        self.write_csv("identities.csv", ["identity", "potential", "radius", "shell_max"], rows)
        self.write_csv("identity_fits.csv", ["identity", "potential", "fit", "slope", "target", "passed"], fits)
        self.write_json("verify-identities.json", {"family": fam.label, "reports": payload})

    def _scaling_points(self, rng):
        n = self.cfg.n
        sup = self.family.support
        if sup.kind == "ball":
            d = rng.normal(size=(16, n))
            d /= np.linalg.norm(d, axis=-1, keepdims=True)
            rad = 0.6 * sup.radius * rng.random(16) ** (1.0 / n)
            return np.asarray(sup.center) + rad[:, None] * d
        return shell_points(n, 1.5, 16, rng)

    def _slice(self, pts):
        p = pts.copy()
        p[:, -1] = 1.0
        return p

    def _scaling(self, fam, V, pts, kind):
        from .perturbations import evaluate_jet

        base = evaluate_jet(fam, pts, check=False)
        if not np.any(base.e) and not np.any(base.de):
            return math.nan, [], []
        slope, s, vals = scaling_slope(fam, V, pts, residual=kind)
        if not np.all(vals > 0):
            return math.nan, s, vals
        return slope, s, vals

    def mass_convergence(self):
        cfg, fam = self.cfg, self.family
        sched = cfg.schedule.eps()
        rows, limits, payload = [], [], []
        compact = fam.support.kind == "ball"
        for V in cfg.potentials():
            rep = mass(fam, V, sched, self.spec, cfg.n, cfg.alpha, measure=cfg.conventions.measure,
                       atol=cfg.checks.mass_atol)
            rows += [[V] + r for r in rep.table()]
            d = rep.to_dict()
            oracle, scale = math.nan, math.nan
            if fam.label == "zero":
                ok = bool(np.all(np.abs(rep.values) < cfg.checks.mass_atol))
                detail = f"max |M_eps| = {np.abs(rep.values).max():.3e}"
            elif compact:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    oracle, scale = mass_oracle(fam, V, sched[-1], self.spec, cfg.n, cfg.alpha)
                d["warnings"] = list(d["warnings"]) + sorted({str(w.message) for w in caught})
                gap = abs(rep.M - oracle)
                ok = rep.status == "stable" and gap <= cfg.checks.oracle_rtol * max(scale, abs(oracle)) + 1e-12
                detail = f"status {rep.status}, M {rep.M:.6e}, oracle {oracle:.6e} (scale {scale:.3e})"
            else:
                ok = rep.status in ("converging", "stable")
                detail = f"status {rep.status}, beta {rep.beta:.3f}, M {rep.M:.6e}"
                hyp = self._integrable()
                d["integrability_hypothesis"] = hyp
                if not ok and not hyp:
                    detail += "; e^r (R_g + n(n-1)) is not integrable for tau <= n, divergence expected"
            d["oracle"], d["oracle_scale"] = oracle, scale
            limits.append([V, rep.M, rep.C, rep.beta, rep.status, oracle, scale])
            payload.append(d)
            self.record(f"mass[V{V}]", ok, detail, warn=not compact and not self._integrable())
        self.write_csv("mass.csv", ["potential"] + MASS_COLUMNS, rows)
        self.write_csv("mass_limits.csv", ["potential", "M", "C", "beta", "status", "oracle", "oracle_scale"], limits)
        self.write_json("mass-convergence.json", {"family": fam.label, "measure": cfg.conventions.measure,
                                                  "schedule": sched, "reports": payload})

    def _integrable(self):
        """Whether ``e^r (R_g + n(n-1))`` is integrable: the tail decays like ``cosh^-tau r``
        against a volume growing like ``e^{(n-1) r}``."""
        fam = self.family
        return fam.support.kind == "ball" or fam.label == "zero" or fam.tau > self.cfg.n

    def small_terms(self):
        cfg = self.cfg
        rep = small_terms_report(cfg.effective_tau, cfg.n, cfg.alpha, schedule=cfg.schedule.eps())
        self.write_csv("small_terms.csv", SMALL_TERMS_COLUMNS, [r.as_list() for r in rep.rows])
        self.write_json("small-terms.json", rep.to_dict())
        for k, mono in rep.monotone.items():
            self.record(f"small_terms_monotone[I{k}]", mono, "strictly decreasing, geometric shrink")
        gate = cfg.conventions.bounds
        lit = [o for o in rep.offending if o["chain"] == "literal"]
        cor = [o for o in rep.offending if o["chain"] == "corrected"]
        self.record("small_terms_corrected_bounds", rep.within_corrected,
                    f"{len(cor)} violations", warn=gate != "corrected")
        self.record("small_terms_literal_bounds", rep.within_literal,
                    f"{len(lit)} violations", warn=gate != "literal")

    def evaluation_check(self):
        cfg, fam = self.cfg, self.family
        if not cfg.alpha > 4.0 / 3.0:
            from .config import ConfigError

            raise ConfigError("alpha", "the evaluation check needs alpha > 4/3")
        rows, payload = [], []
        for V in cfg.potentials():
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                rep = evaluation_crosscheck(fam, V, cfg.schedule.eps(), self.spec, cfg.alpha,
                                            g_constant_mode=cfg.conventions.g_constant,
                                            measure=cfg.conventions.measure, rtol=cfg.checks.evaluation_rtol)
            rows += [[V, rep.field] + r.as_list() for r in rep.rows]
            d = rep.to_dict()
            d["warnings"] = sorted({str(w.message) for w in caught})
            payload.append(d)
            last = rep.rows[-1]
            self.record(f"evaluation[V{V},{rep.field}]", rep.passed,
                        f"rel gap {last.rel_gap:.3e} at eps {last.eps:g} ({cfg.conventions.g_constant} constant)")
        self.write_csv("evaluation.csv", ["potential", "field"] + CROSSCHECK_COLUMNS, rows)
        self.write_json("evaluation-check.json", {"family": fam.label, "reports": payload})

    def decay_audit(self):
        cfg, fam = self.cfg, self.family
        ch = cfg.checks
        tau = cfg.effective_tau if fam.label == "tail" else fam.tau
        rep = decay_audit(fam, ch.identity_radii[0], ch.identity_radii[1], ch.identity_shells, tau=tau,
                          per_shell=ch.per_shell, seed=cfg.seed, n=cfg.n)
        self.write_csv("decay.csv", ["radius", "shell_max"], [[r, m] for r, m in zip(rep.radii, rep.shell_max)])
        self.record("decay_audit", rep.passed,
                    "; ".join(rep.notes) or f"slope {rep.slope:.3f} vs <= {-tau + rep.slack:.3f}")
        rows, audits = [], []
        for eps in ch.cutoff_eps:
            cm = build_cutoff_metric(fam, eps, cfg.alpha)
            a = cutoff_audit(cm, fam, seed=cfg.seed, per_shell=ch.per_shell)
            ok = a["equals_b_inside"] and a["equals_g_outside"] and a["chi_in_unit_interval"] and a["decay_passed"]
            b = a["bounds"]
            rows.append([eps, a["equals_b_inside"], a["equals_g_outside"], a["chi_in_unit_interval"], a["dominated"],
                         a["domination_ratio"], a["r_far"], a["far_decay_slope"], b["sup_chi"], b["min_chi"],
                         b["sup_grad_chi"], b["sup_hess_chi"], b["log_scaled_grad_chi1"],
                         b["log_scaled_hess_chi1"], b["C"], ok])
            a["eps"] = eps
            audits.append(a)
            self.record(f"cutoff[eps={eps:g}]", ok,
                        f"C = {b['C']:.3f}, log(1/eps) sup|grad chi1| = {b['log_scaled_grad_chi1']:.3f}")
        self.write_csv("cutoff.csv", CUTOFF_COLUMNS, rows)
        self.write_json("decay-audit.json", {
            "family": fam.label,
            "decay": {"tau": rep.tau, "radii": rep.radii, "shell_max": rep.shell_max, "slope": rep.slope,
                      "sup_weighted": rep.sup_weighted, "passed": rep.passed, "notes": rep.notes},
            "cutoff": audits,
        })

    # -- driver

    def run(self, subcommand):
        todo = SUBCOMMANDS if subcommand == "all" else (subcommand,)
        dispatch = {
            "verify-identities": self.verify_identities,
            "mass-convergence": self.mass_convergence,
            "small-terms": self.small_terms,
            "evaluation-check": self.evaluation_check,
            "decay-audit": self.decay_audit,
        }
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for name in todo:
                dispatch[name]()
        self.write_summary(subcommand)
        return self.write_manifest()

    def write_summary(self, subcommand):
        lines = [f"horomass {__version__}: {subcommand} on family {self.family.label} (n = {self.cfg.n})", ""]
        for r in self.results:
            lines.append(f"{r.status.upper():4s}  {r.name}  {r.detail}".rstrip())
        failing = [r.name for r in self.results if not r.ok]
        lines.append("")
        lines.append("all checks passed" if not failing else "failing checks: " + ", ".join(failing))
        with open(self._path("summary.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.makedirs(self.out, exist_ok=True)
        with open(os.path.join(self.out, "config.yaml"), "w", encoding="utf-8") as fh:
            fh.write(emit_config(self.cfg))

    def write_manifest(self):
        files = []
        for name in self.files:
            with open(os.path.join(self.out, name), "rb") as fh:
                files.append({"path": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        manifest = RunManifest(self.cfg.digest(), __version__, self.cfg.seed, GENERATOR,
                               {r.name: r.status for r in self.results}, files)
        with open(os.path.join(self.out, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest

    @property
    def failing(self):
        return [r.name for r in self.results if not r.ok]


def run(subcommand, cfg, out=None):
    """Run one subcommand (or ``'all'``); returns ``(exit_status, runner, manifest)``."""
    if subcommand != "all" and subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    runner = Runner(cfg, out)
    manifest = runner.run(subcommand)
    return (0 if not runner.failing else 1), runner, manifest
