"""``qmf``: config-driven front end for tessellations, checks and state values.

Exit status is 0 when every executed check passes, 2 when any check fails
and 1 for configuration or contract errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import markov_field as mf
from .amplitudes import AmplitudeError, parse_complex_matrix
from .config import (
    ConfigError,
    apply_overrides,
    load_config,
    make_family,
    make_sites,
    make_state,
    make_tessellation,
    make_window,
)
from .graph_topology import WindowError, closure
from .operator_algebra import DimensionCapError, LocalOperator, OperatorError
from .reports import MalformedReport, VerificationReport, build_report, dumps, render_report

EXIT_OK, EXIT_CONTRACT, EXIT_FAILED = 0, 1, 2

COMMAND_TASKS = {
    "tessellate": ["tessellate"],
    "verify": ["tessellate", "verify-family", "verify-field"],
    "state": ["state-eval"],
}

# check name -> tolerance key in the config
TOLERANCE_KEYS = {
    "plaquette_normalization": "normalization",
    "region_normalization": "normalization",
    "factorization": "factorization",
    "localization": "localization",
    "qce_unitality": "unitality",
    "qce_complete_positivity": "cp",
    "qce_module_property": "module",
    "stationarity": "stationarity",
    "projectivity": "projectivity",
    "classical_oracle": "oracle",
    "state_normalization": "state",
}

TESSELLATION_ANCHORS = {
    "inner_boundary": "no center on the boundary of any level",
    "independence": "centers are pairwise non-adjacent",
    "coverage": "plaquettes cover the complete window vertices",
    "growth": "level sizes grow",
}


def parse_observable(obj, window, sites) -> LocalOperator:
    """``{"support": [labels], "matrix": complex matrix}`` -> LocalOperator."""
    if not isinstance(obj, dict) or set(obj) != {"support", "matrix"}:
        raise ConfigError("observable must have exactly the keys 'support' and 'matrix'")
    labels = [window.decode(v) for v in obj["support"]]
    return sites.operator(labels, parse_complex_matrix(obj["matrix"]))


class Runner:
    """Executes the tasks of one validated config and collects reports."""

    def __init__(self, cfg: dict, observable=None):
        self.cfg = cfg
        self.seed = cfg["seed"]
        self.reports: list = []
        self.skipped: list = []
        self.lines: list = []
        self.values: dict = {}
        self.window = make_window(cfg)
        self.tess = make_tessellation(cfg, self.window)
        self.sites = make_sites(cfg, self.window)
        self.state = make_state(cfg, self.window, self.sites)
        self.observable = observable
        self._family = None

    @property
    def family(self):
        if self._family is None:
            self._family = make_family(self.cfg, self.tess, self.sites, self.state)
        return self._family

    def rng(self, *key):
        return np.random.default_rng([self.seed, *key])

    def add(self, reports):
        for r in reports if isinstance(reports, list) else [reports]:
            key = TOLERANCE_KEYS.get(r.check)
            if key is not None:
                r.tolerance = self.cfg["tolerances"][key]
            self.reports.append(r)

    def skip(self, task, reason):
        self.skipped.append({"task": task, "reason": reason})

    # -- tasks ------------------------------------------------------------

    def tessellate(self):
        t, w = self.tess, self.window
        self.lines.append(f"{'n':>3} {'|V0n|':>6} {'|Vn|':>6}")
        for n, lv in enumerate(t.levels, start=1):
            self.lines.append(f"{n:>3} {len(lv.centers):>6} {len(lv.sites):>6}")
        self.lines.append(f"known centers: {len(t.v0)}; certified vertices: {len(t.certified)}")
        for name, d in t.diagnostics.items():
            witness = [] if d.witness is None else [w.encode(v) if v in w else v
                                                    for v in d.witness]
            self.add(VerificationReport(f"tessellation_{name}", TESSELLATION_ANCHORS[name],
                                        0.0 if d.ok else 1.0, 0.0,
                                        {"witness": witness, "detail": d.detail}))
            if not d.ok:
                self.lines.append(f"{name} FAILED, witness {witness}")
        self.values["tessellation"] = t.to_dict()

    def _family_ready(self, task) -> bool:
        if not self.tess.independence_ok:
            self.skip(task, "tessellation centers are not independent")
            return False
        if self.cfg["amplitudes"] is None:
            self.skip(task, "no amplitude spec in the config")
            return False
        return True

    def verify_family(self):
        if not self._family_ready("verify-family"):
            return
        f = self.family
        cert = f.certificate()
        for c in cert.items():
            if c.name == "invertibility":
                residual, tol = max(0.0, c.tolerance - c.residual), 0.0
                extra = {"min_singular_value": c.residual, "floor": c.tolerance}
            else:
                residual, tol, extra = c.residual, c.tolerance, {}
            self.add(VerificationReport(f"family_{c.name}", f"edge amplitudes: {c.name}",
                                        residual, tol, dict(extra, witness=repr(c.witness))))
        if not cert.ok:
            self.skip("verify-family", "family certificate failed; plaquettes not built")
            return
        for y in f.centers:
            if y in self.tess.plaquettes:
                self.add(mf.plaquette_density_check(f, y))
        self.lines.append(f"family certified; {len(f.centers)} plaquettes checked")

    def verify_field(self):
        if not self._family_ready("verify-field"):
            return
        f = self.family
        if not f.certificate().ok:
            self.skip("verify-field", "family certificate failed")
            return
        ch = self.cfg["checks"]
        size = ch["region_size"]
        for k in range(ch["instances"]):
            rng = self.rng(1, k)
            self._attempt("region_normalization", lambda: mf.region_density_check(
                f, mf.random_region(f, rng, size + 1, within=self.tess.certified)))
            self._attempt("factorization", lambda: mf.factorization_check(
                f, *mf.random_separated_pair(f, rng, size)))
            d = self._attempt("descriptor", lambda: mf.random_descriptor(
                f, rng, inner_size=size, cap=ch["choi_cap"]))
            if d is None:
                continue
            self._attempt("quasi_conditional_expectation",
                          lambda: mf.verify_quasi_cond_expectation(d, seed=self.seed,
                                                                   choi_cap=ch["choi_cap"]))
            for j in range(ch["observables"]):
                a = mf.random_observable(f, d.inner, rng)
                self._attempt("localization", lambda: mf.localization_check(
                    f, d.inner, d.outer, a, seed=self.seed))
                growth = [d.outer]
                for _ in range(ch["growth_steps"] - 1):
                    growth.append(mf.admissible_hull(f, closure(self.window, growth[-1])))
                self._attempt("stationarity", lambda: mf.stationarity_probe(
                    f, d.inner, growth, a, seed=self.seed))
                if ch["sequence_steps"]:
                    self._projectivity(f, d.inner, a, ch["sequence_steps"])

    def _projectivity(self, f, core, a, steps):
        for n in range(steps, 0, -1):
            seq = mf.admissible_sequence(f, core, n)
            if not seq[-1] <= self.tess.certified:
                continue
            try:
                self.add(mf.projectivity_check(f, seq, a, seed=self.seed))
                if n < steps:
                    self.skip("projectivity", f"sequence shortened from {steps} to {n} steps")
                return
            except (DimensionCapError, WindowError):
                continue
        self.skip("projectivity", "no admissible sequence fits the window and caps")

    def _attempt(self, what, fn):
        try:
            out = fn()
        except (DimensionCapError, mf.PreconditionError, WindowError) as exc:
            self.skip(what, f"{type(exc).__name__}: {exc}")
            return None
        if isinstance(out, (VerificationReport, list)):
            self.add(out)
        return out

    def state_eval(self):
        if not self._family_ready("state-eval"):
            return
        f = self.family
        w = self.window
        se = self.cfg["state_eval"]
        region = (w.region([w.decode(v) for v in se["region"]]) if se["region"] is not None
                  else closure(w, [w.root]))
        obs = self.observable if self.observable is not None else se["observable"]
        if obs is None:
            a = self.sites.operator([w.root], np.diag([1.0, -1.0]))
        else:
            a = parse_observable(obs, w, self.sites)
        value = mf.finite_volume_state(f, region, a)
        one = mf.finite_volume_state(f, region, self.sites.identity([]))
        self.add(VerificationReport("state_normalization", "finite-volume state of the identity",
                                    abs(one - 1.0), mf.TOL_STATE,
                                    {"region": [w.encode(v) for v in w.sort(region)]}))
        self.values["state"] = {"region": [w.encode(v) for v in w.sort(region)],
                                "support": [w.encode(v) for v in self.sites.labels(a.support)],
                                "value": value}
        self.lines.append(f"phi(a) = {value.real:.15g} {value.imag:+.3g}i on "
                          f"{len(region)} region vertices")
        if se["oracle"]:
            try:
                r = mf.classical_oracle_compare(f, region, a, seed=self.seed)
            except mf.NonDiagonalInput as exc:
                self.skip("classical_oracle", str(exc))
                self.lines.append(f"oracle skipped: {exc}")
            else:
                self.add(r)
                self.lines.append(f"oracle delta = {r.residual:.3e}")

    def run(self, tasks):
        order = []
        for task in tasks:
            expanded = (["tessellate", "verify-family", "verify-field", "state-eval"]
                        if task == "full-report" else [task])
            order += [t for t in expanded if t not in order]
        for task in order:
            getattr(self, task.replace("-", "_"))()
        # the output path says where the report goes, not what it describes
        echoed = {k: v for k, v in self.cfg.items() if k != "output"}
        return build_report(self.reports, seed=self.seed, config=echoed,
                            extra={"tasks": order, "skipped": self.skipped,
                                   "values": self.values})


def run(cfg: dict, tasks=None, observable=None) -> tuple:
    """Run ``tasks`` (default: the config's list); returns ``(report, text, exit_code)``."""
    runner = Runner(cfg, observable)
    report = runner.run(tasks or cfg["tasks"])
    text = "\n".join(runner.lines + ([""] if runner.lines else [])) + render_report(report)
    s = report["summary"]
    text += (f"{s['passed']}/{s['checks']} checks passed; seed {s['seed']}; "
             f"config {s['config_hash'][:12]}\n")
    code = EXIT_OK if s["passed"] == s["checks"] else EXIT_FAILED
    return report, text, code


def _tol_pair(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    name, value = text.split("=", 1)
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name!r} needs a number") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("tessellate", "verify", "state", "report"):
        c = sub.add_parser(name)
        c.add_argument("--config", required=name != "report", type=Path)
        c.add_argument("--out", type=Path, help="report JSON path (text summary goes next to it)")
        c.add_argument("--seed", type=int)
        c.add_argument("--tol", type=_tol_pair, action="append", default=[], metavar="NAME=VALUE")
        c.add_argument("--repair", choices=["off", "greedy", "greedy-independent"])
        if name == "state":
            c.add_argument("--observable", type=Path)
        if name == "report":
            c.add_argument("--input", type=Path, help="render an existing report JSON")
    return p


def _write(out: Path, report: dict, text: str):
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(report))
    out.with_suffix(".txt").write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report" and args.input is not None:
            sys.stdout.write(render_report(json.loads(args.input.read_text())))
            return EXIT_OK
        if args.config is None:
            raise ConfigError("--config or --input is required")
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, tolerances=dict(args.tol),
                              repair=args.repair, output=args.out)
        observable = None
        if getattr(args, "observable", None) is not None:
            observable = json.loads(args.observable.read_text())
        tasks = COMMAND_TASKS.get(args.command)
        report, text, code = run(cfg, tasks, observable)
    except (ConfigError, MalformedReport, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"qmf: error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (WindowError, AmplitudeError, OperatorError, mf.PreconditionError) as exc:
        where = getattr(exc, "vertices", ())
        suffix = f" (region {list(where)})" if where else ""
        print(f"qmf: contract error: {exc}{suffix}", file=sys.stderr)
        return EXIT_CONTRACT
    sys.stdout.write(text)
    if cfg["output"]:
        _write(Path(cfg["output"]), report, text)
    return code


if __name__ == "__main__":
    sys.exit(main())
