"""Run configuration: sectioned key = value text, validated before any work.

Grammar (configparser syntax, ``#`` or ``;`` comments)::

    [theory]
    kind = free_scalar | charged_scalar | maxwell | fermion_toy
         | sign_flipped | time_reflected | nonfactorizing | lattice
    mass = 1.0                     # continuum families
    group = U1 | SU2 | SU3         # lattice
    beta = 1.0
    dims = 16, 16
    n_configs = 200
    sweeps_per_config = 1
    kappa = 0.2                    # optional scalar matter (U(1) only), with lam
    lam = 0.5
    ensemble = path/to/ensemble.bin  # reuse a stored ensemble instead of simulating

    [run]
    seed = 1
    out = qgv-out
    axioms = all | comma separated names

    [basis]
    n_tests = 3
    width = 0.15
    cap = 4

    [measure]
    observables = plaq, W1x1
    separations = 1, 2, 3

    [continuation]
    poles = 1
    signed = false
    momentum = 0.0
    tau_min = 0.4
    tau_max = 6.0
    n_tau = 29
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

CONTINUUM_KINDS = ("free_scalar", "charged_scalar", "maxwell", "fermion_toy",
                   "sign_flipped", "time_reflected", "nonfactorizing")
THEORY_KINDS = CONTINUUM_KINDS + ("lattice",)


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (CLI exit code 2)."""


def _floats(s: str) -> list:
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s: str) -> list:
    return [int(x) for x in s.replace(",", " ").split()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _names(s: str) -> list:
    return [x.strip() for x in s.split(",") if x.strip()]


# section -> key -> (parser, default); a default of ``...`` marks a required key
SCHEMA = {
    "theory": {
        "kind": (str, ...), "mass": (float, 1.0), "group": (str, "U1"), "beta": (float, None),
        "dims": (_ints, None), "n_configs": (int, None), "sweeps_per_config": (int, 1),
        "kappa": (float, None), "lam": (float, None), "ensemble": (str, None), "method": (str, None),
        "start": (str, "hot"),
    },
    "run": {"seed": (int, 0), "out": (str, "qgv-out"), "axioms": (_names, ["all"])},
    "basis": {"n_tests": (int, 3), "width": (float, 0.15), "cap": (int, 4)},
    "measure": {"observables": (_names, ["plaq"]), "separations": (_ints, [1, 2, 3])},
    "continuation": {"poles": (int, 1), "signed": (_bool, False), "momentum": (float, 0.0),
                     "tau_min": (float, 0.4), "tau_max": (float, 6.0), "n_tau": (int, 29)},
}
LATTICE_REQUIRED = ("beta", "dims", "n_configs")


@dataclass
class RunConfig:
    theory: dict
    run: dict
    basis: dict
    measure: dict
    continuation: dict
    source: str = ""
    raw: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.theory["kind"]

    @property
    def seed(self) -> int:
        return self.run["seed"]

    @property
    def out(self) -> Path:
        return Path(self.run["out"])

    def as_dict(self) -> dict:
        return {s: getattr(self, s) for s in SCHEMA}

    def provenance_hash(self) -> str:
        """SHA-256 of the parsed configuration in canonical JSON form."""
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_config(text: str, source: str = "<string>", overrides: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = [s for s in cp.sections() if s not in SCHEMA]
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}; valid: {sorted(SCHEMA)}")
    parsed, raw = {}, {}
    for sec, keys in SCHEMA.items():
        given = dict(cp[sec]) if cp.has_section(sec) else {}
        raw[sec] = dict(given)
        extra = sorted(set(given) - set(keys))
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(extra)}")
        out = {}
        for key, (conv, default) in keys.items():
            if key in given:
                try:
                    out[key] = conv(given[key])
                except ValueError as exc:
                    raise ConfigError(f"[{sec}] {key}: {exc}") from None
            elif default is ...:
                raise ConfigError(f"missing required key [{sec}] {key}")
            else:
                out[key] = default
        parsed[sec] = out
    for sec, vals in (overrides or {}).items():
        parsed[sec].update({k: v for k, v in vals.items() if v is not None})
    cfg = RunConfig(**parsed, source=source, raw=raw)
    validate(cfg)
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p), overrides)


def validate(cfg: RunConfig) -> None:
    th = cfg.theory
    if th["kind"] not in THEORY_KINDS:
        raise ConfigError(f"[theory] kind {th['kind']!r} unknown; valid: {', '.join(THEORY_KINDS)}")
    if th["kind"] == "lattice":
        if th["ensemble"] is None:
            for key in LATTICE_REQUIRED:
                if th[key] is None:
                    raise ConfigError(f"missing required key [theory] {key}")
        if th["group"] not in ("U1", "SU2", "SU3"):
            raise ConfigError(f"[theory] group {th['group']!r} unknown; valid: U1, SU2, SU3")
        if (th["kappa"] is None) != (th["lam"] is None):
            raise ConfigError("[theory] kappa and lam must be given together")
        if th["start"] not in ("hot", "cold"):
            raise ConfigError("[theory] start must be hot or cold")
    elif th["mass"] < 0:
        raise ConfigError("[theory] mass must be non-negative")
    b = cfg.basis
    if b["n_tests"] < 1 or b["cap"] < 2:
        raise ConfigError("[basis] needs n_tests >= 1 and cap >= 2 (empty basis)")
    if b["width"] <= 0:
        raise ConfigError("[basis] width must be positive")
    c = cfg.continuation
    if c["poles"] < 1 or c["n_tau"] < 2 * c["poles"] + 1 or not 0 < c["tau_min"] < c["tau_max"]:
        raise ConfigError("[continuation] needs poles >= 1, n_tau > 2*poles and 0 < tau_min < tau_max")
    if not cfg.measure["observables"]:
        raise ConfigError("[measure] observables is empty")
