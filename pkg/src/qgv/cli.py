"""Batch front-end: ``qgv simulate | measure | check | reconstruct | continue | report``.

Exit codes: 0 all checks pass, 1 at least one axiom failure, 2 usage or config error.
Heavy modules are imported lazily so ``QGV_THREADS`` can cap BLAS threads before numpy loads.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


class UsageError(Exception):
    pass


class ModuleError(Exception):
    """Upstream failure, tagged with the module that raised it."""

    def __init__(self, module: str, exc: Exception):
        super().__init__(f"[{module}] {type(exc).__name__}: {exc}")


def _apply_thread_cap() -> None:
    n = os.environ.get("QGV_THREADS")
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise UsageError(f"QGV_THREADS must be a positive integer, got {n!r}")
    for var in _THREAD_VARS:
        os.environ[var] = n


# --- output helpers -----------------------------------------------------------------


def _stamp(cfg: RunConfig, payload: dict, inputs: dict | None = None) -> dict:
    prov = {"config_hash": cfg.provenance_hash(), "config": cfg.source, "seed": cfg.seed, "qgv_version": __version__}
    prov.update(inputs or {})
    return dict(payload, provenance=prov)


def _write_json(path: Path, data) -> None:
    from .axioms import _plain

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=1, sort_keys=True, default=str))


def _write_csv(path: Path, rows, header=("x", "y", "yerr")) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(data: dict, fmt: str, rows=None) -> None:
    if fmt == "csv" and rows is not None:
        w = csv.writer(sys.stdout)
        w.writerow(("x", "y", "yerr"))
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    elif fmt == "json":
        from .axioms import _plain

        print(json.dumps(_plain(data), indent=1, sort_keys=True, default=str))


# --- families and ensembles -----------------------------------------------------------


def continuum_family(cfg: RunConfig, lorentz: bool = False):
    from . import axioms, free_fields
    from .algebra import Metric

    kind, m = cfg.kind, cfg.theory["mass"]
    if lorentz:
        if kind != "free_scalar":
            return None
        return free_fields.free_scalar_family(m, metric=Metric.LORENTZ)
    builders = {
        "free_scalar": lambda: free_fields.free_scalar_family(m),
        "charged_scalar": lambda: axioms.charged_scalar_family(m),
        "maxwell": free_fields.maxwell_family,
        "fermion_toy": lambda: free_fields.fermion_toy_family(m),
        "sign_flipped": lambda: axioms.sign_flipped_family(m),
        "time_reflected": lambda: axioms.time_reflected_family(m),
        "nonfactorizing": lambda: axioms.nonfactorizing_family(m),
    }
    return builders[kind]()


def _ensemble_path(cfg: RunConfig) -> Path:
    return Path(cfg.theory["ensemble"]) if cfg.theory["ensemble"] else cfg.out / "ensemble.bin"


def simulate_ensemble(cfg: RunConfig):
    from .lattice.core import Action, Lattice
    from .lattice.ensemble import generate_ensemble

    th = cfg.theory
    try:
        lat = Lattice(tuple(th["dims"]))
        act = Action(th["beta"], th["kappa"], th["lam"])
    except ValueError as exc:
        raise ConfigError(f"[theory] {exc}") from None
    try:
        return generate_ensemble(lat, th["group"], act, cfg.seed, th["n_configs"], th["sweeps_per_config"],
                                 start=th["start"], method=th["method"])
    except ValueError as exc:
        raise ModuleError("lattice_engine", exc) from exc


def obtain_ensemble(cfg: RunConfig):
    """Stored ensemble if present, else a fresh one (written to the output directory)."""
    from .lattice.ensemble import load_ensemble, save_ensemble

    path = _ensemble_path(cfg)
    if path.exists():
        try:
            return load_ensemble(path)
        except ValueError as exc:
            raise ModuleError("lattice_engine", exc) from exc
    if cfg.theory["ensemble"]:
        raise UsageError(f"ensemble file {path} not found")
    ens = simulate_ensemble(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_ensemble(ens, path)
    return ens


def _lattice_separations(ens, seps) -> list:
    half = ens.lattice.dims[1] // 2
    out = []
    for s in seps:
        if not 0 < s <= half:
            raise ConfigError(f"[measure] separation {s} outside 1..{half}")
        v = [0] * ens.lattice.ndim
        v[1] = s
        out.append(tuple(v))
    return out


# --- commands ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, args) -> int:
    from .lattice.ensemble import save_ensemble

    if cfg.kind != "lattice":
        raise ConfigError("simulate needs [theory] kind = lattice")
    ens = simulate_ensemble(cfg)
    path = _ensemble_path(cfg) if not cfg.theory["ensemble"] else cfg.out / "ensemble.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = save_ensemble(ens, path)
    print(f"ensemble {path} sha256 {digest}")
    _emit({"path": str(path), "content_hash": digest, "provenance": ens.provenance}, args.format)
    return EXIT_OK


def cmd_measure(cfg: RunConfig, args) -> int:
    from .lattice.ensemble import composite_correlator, plaquette_average

    if cfg.kind != "lattice":
        raise ConfigError("measure needs [theory] kind = lattice")
    ens = obtain_ensemble(cfg)
    seps = _lattice_separations(ens, cfg.measure["separations"])
    plaq, plaq_err = plaquette_average(ens)
    result = {"plaquette": plaq, "plaquette_err": plaq_err, "n_configs": len(ens), "correlators": {}}
    rows_all = []
    for kind in cfg.measure["observables"]:
        try:
            fam = composite_correlator(ens, kind, seps)
        except (ValueError, KeyError) as exc:
            raise ModuleError("lattice_engine", exc) from exc
        table = fam.meta["table"]
        result["correlators"][kind] = table
        rows = [(r["sep"][1], r["connected"], r["connected_err"]) for r in table]
        _write_csv(cfg.out / f"correlator_{kind}.csv", rows)
        rows_all += rows
    payload = _stamp(cfg, result, {"ensemble_hash": ens.content_hash()})
    _write_json(cfg.out / "measure.json", payload)
    print(f"plaquette {plaq:.6f} +- {plaq_err:.6f} over {len(ens)} configs")
    _emit(payload, args.format, rows_all)
    return EXIT_OK


def _axiom_list(cfg: RunConfig, cli_axioms: str | None) -> list:
    from .axioms import AXIOM_NAMES, EUCLIDEAN_AXIOMS

    names = [a.strip() for a in cli_axioms.split(",") if a.strip()] if cli_axioms else cfg.run["axioms"]
    if names == ["all"]:
        return list(EUCLIDEAN_AXIOMS)
    bad = [n for n in names if n not in AXIOM_NAMES]
    if bad:
        raise UsageError(f"unknown axiom(s) {', '.join(bad)}; valid: {', '.join(AXIOM_NAMES)}")
    if not names:
        raise UsageError("empty axiom list")
    return names


def _run_one(name: str, cfg: RunConfig, fam, ens):
    from . import axioms
    from .correlators import reduce_to_differences

    if name in axioms.EUCLIDEAN_AXIOMS:
        ensemble_targets = ("reflection_positivity", "gauge_covariance", "renormalized_positivity")
        target = ens if ens is not None and name in ensemble_targets else fam
        return axioms.EUCLIDEAN_AXIOMS[name](target)
    if name == "relativistic_covariance":
        mfam = continuum_family(cfg, lorentz=True) if ens is None else None
        if mfam is None:
            return axioms.AxiomReport(name, getattr(fam, "name", "lattice"), "inapplicable",
                                      reason="no Minkowski family for this theory")
        return axioms.check_relativistic_covariance(mfam)
    if ens is not None or fam.kernel is None or fam.meta.get("radial") is None:
        return axioms.AxiomReport(name, getattr(fam, "name", "lattice"), "inapplicable",
                                  reason="needs a continuum 2-point kernel to fit a spectral model")
    model = _fit_model(cfg, fam, reduce_to_differences)
    if name == "spectral_condition":
        return axioms.check_spectral_condition(model)
    return axioms.check_local_commutativity(model)


def _fit_model(cfg: RunConfig, fam, reducer):
    import numpy as np

    from . import continuation
    from .axioms import probe_index

    c = cfg.continuation
    taus = np.linspace(c["tau_min"], c["tau_max"], c["n_tau"])
    form = reducer(fam, probe_index(fam, 2))
    return continuation.fit_spectral(form, {"poles": c["poles"], "signed": c["signed"]}, p=c["momentum"], taus=taus)


def cmd_check(cfg: RunConfig, args) -> int:
    from . import axioms

    names = _axiom_list(cfg, args.axioms)
    ens = None
    if cfg.kind == "lattice":
        from .lattice.ensemble import composite_correlator

        ens = obtain_ensemble(cfg)
        fam = composite_correlator(ens, cfg.measure["observables"][0], _lattice_separations(ens, cfg.measure["separations"]))
    else:
        fam = continuum_family(cfg)
    reports = []
    for name in names:
        try:
            rep = _run_one(name, cfg, fam, ens)
        except Exception as exc:  # a crashing checker is reported, not hidden
            rep = axioms.AxiomReport(name, getattr(fam, "name", "lattice"), "inconclusive",
                                     reason=f"[axiom_suite] {type(exc).__name__}: {exc}")
        reports.append(rep)
        print(rep.summary(), flush=True)
    n_fail = sum(r.verdict == "fail" for r in reports)
    inputs = {"ensemble_hash": ens.content_hash()} if ens is not None else {}
    payload = _stamp(cfg, {"reports": [r.to_json() for r in reports], "failures": n_fail}, inputs)
    _write_json(cfg.out / "check.json", payload)
    print(f"{len(reports)} checks, {n_fail} failed")
    _emit(payload, args.format)
    return EXIT_FAIL if n_fail else EXIT_OK


def cmd_reconstruct(cfg: RunConfig, args) -> int:
    from . import reconstruction as R

    if cfg.kind == "lattice":
        raise ConfigError("reconstruct works on continuum families")
    fam = continuum_family(cfg)
    b = cfg.basis
    tests = R.positive_time_tests(b["n_tests"], b["width"], seed=cfg.seed or 12)
    try:
        space = R.build_physical(fam, tests, cap=b["cap"])
    except Exception as exc:
        raise ModuleError("reconstruction", exc) from exc
    if len(space.basis) <= 1 and space.dim == 0:
        raise ConfigError("[basis] produced an empty basis")
    path = cfg.out / "physical_space.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    space.save(path)
    rows = [(i, lam, space.cutoff) for i, lam in enumerate(space.spectrum)]
    _write_csv(cfg.out / "spectrum.csv", rows)
    summary = _stamp(cfg, {"dim": space.dim, "null_dim": space.null_dim, "basis_size": len(space.basis),
                           "cutoff": space.cutoff, "notes": space.notes},
                     {"space_hash": _file_hash(path)})
    _write_json(cfg.out / "reconstruct.json", summary)
    print(f"physical space dim {space.dim} (basis {len(space.basis)}, null {space.null_dim})")
    _emit(summary, args.format, rows)
    return EXIT_OK


def cmd_continue(cfg: RunConfig, args) -> int:
    import numpy as np

    from .correlators import reduce_to_differences

    if cfg.kind == "lattice":
        raise ConfigError("continue works on continuum 2-point families")
    fam = continuum_family(cfg)
    try:
        model = _fit_model(cfg, fam, reduce_to_differences)
    except Exception as exc:
        raise ModuleError("continuation", exc) from exc
    c = cfg.continuation
    taus = np.linspace(c["tau_min"], c["tau_max"], c["n_tau"])
    fit = model.slice(taus, c["momentum"])
    data = reduce_to_differences(fam, _probe(fam)).momentum_slice(taus, c["momentum"])
    rows = [(t, d, abs(d - f)) for t, d, f in zip(taus, data, fit)]
    _write_csv(cfg.out / "fit.csv", rows)
    payload = _stamp(cfg, {"model": model.to_json()})
    _write_json(cfg.out / "spectral_model.json", payload)
    poles = ", ".join(f"mu2={m2:.6f} rho={r:.6f}" for m2, r in model.poles)
    print(f"spectral model [{model.verdict}] {poles} residual {model.residual:.2e}")
    _emit(payload, args.format, rows)
    return EXIT_OK


def _probe(fam):
    from .axioms import probe_index

    return probe_index(fam, 2)


def cmd_report(cfg: RunConfig, args) -> int:
    out = cfg.out
    parts = {}
    for name in ("measure", "check", "reconstruct", "spectral_model"):
        p = out / f"{name}.json"
        if p.exists():
            parts[name] = {"sha256": _file_hash(p), "content": json.loads(p.read_text())}
    if not parts:
        raise UsageError(f"no results found under {out}")
    n_fail = 0
    if "check" in parts:
        rows = parts["check"]["content"]["reports"]
        n_fail = sum(r["verdict"] == "fail" for r in rows)
        for r in rows:
            print(f"{r['axiom']:<26s} {r['family']:<28s} {r['verdict']:<13s} {r['reason']}")
    for name, p in parts.items():
        print(f"{name:<16s} sha256 {p['sha256']}")
    _write_json(out / "report.json", _stamp(cfg, {"parts": parts, "failures": n_fail}))
    return EXIT_FAIL if n_fail else EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "measure": cmd_measure, "check": cmd_check,
            "reconstruct": cmd_reconstruct, "continue": cmd_continue, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qgv", description="Axiom checks for gauge-theory correlators.")
    ap.add_argument("--version", action="version", version=f"qgv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration (INI-style sections)")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--axioms", help="comma separated axiom names (check)")
        p.add_argument("--out", help="override [run] out")
        p.add_argument("--format", choices=("json", "csv", "none"), default="none",
                       help="also print the result to stdout")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _apply_thread_cap()
        cfg = load_config(args.config, {"run": {"seed": args.seed, "out": args.out}})
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"qgv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModuleError as exc:
        print(f"qgv: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"qgv: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
