"""Run configuration: TOML or JSON documents plus command-line overrides.

Layout (every section optional unless a command needs it)::

    seed = 7
    [graph]       file = "g.json"  |  nodes = 3, edges = [[1, 2], [2, 3]]
    [hamiltonian] theta, theta_tilde, [hamiltonian.h0], [hamiltonian.h1]
    [nls]         preset, sigma, v, w
    [noise]       seed, delta, dt, paths
    [numerics]    h, T, scheme, rho_min, S_max, store_every, M, tol_gap, max_iter, substeps
    [initial]     rho0, S0
    [control]     rho_a, rho_b, variant, sigma, epsilon
    [study]       deltas, eps
    [components]  rho, tol
    [output]      dir

Relative file paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import tomli

from .errors import ConfigError

__all__ = ["SECTIONS", "load_document", "merge_overrides", "config_hash", "get", "require"]

SECTIONS = {
    "seed": None,
    "graph": {"file", "nodes", "edges"},
    "hamiltonian": {"theta", "theta_tilde", "h0", "h1"},
    "nls": {"preset", "sigma", "v", "w"},
    "noise": {"seed", "delta", "dt", "paths"},
    "numerics": {"h", "T", "scheme", "rho_min", "S_max", "store_every", "M", "tol_gap", "max_iter", "substeps"},
    "initial": {"rho0", "S0"},
    "control": {"rho_a", "rho_b", "variant", "sigma", "epsilon"},
    "study": {"deltas", "eps"},
    "components": {"rho", "tol"},
    "output": {"dir"},
}


def _parse_text(text: str, suffix: str, origin: str) -> dict:
    if suffix == ".json" or (suffix not in (".toml",) and text.lstrip().startswith("{")):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{origin}: invalid JSON ({exc})", ["<root>"]) from None
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: invalid TOML ({exc})", ["<root>"]) from None


def _check_fields(doc: dict):
    bad = []
    for key, value in doc.items():
        if key not in SECTIONS:
            bad.append(key)
            continue
        allowed = SECTIONS[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            bad.append(key)
            continue
        bad += [f"{key}.{k}" for k in value if k not in allowed]
    if bad:
        raise ConfigError(f"unknown or malformed config fields: {', '.join(sorted(bad))}", sorted(bad))


def load_document(path=None) -> dict:
    """Read a config file into a plain dict; ``None`` gives an empty document."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist", ["--config"])
    doc = _parse_text(path.read_text(encoding="utf-8"), path.suffix.lower(), str(path))
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table", ["<root>"])
    _check_fields(doc)
    doc = copy.deepcopy(doc)
    base = path.resolve().parent
    graph = doc.get("graph", {})
    if "file" in graph:
        graph["file"] = str((base / graph["file"]).resolve())
    return doc


def merge_overrides(doc: dict, overrides: dict) -> dict:
    """Apply ``{"section.key": value}`` overrides; ``None`` values are skipped."""
    out = copy.deepcopy(doc)
    for dotted, value in overrides.items():
        if value is None:
            continue
        if "." in dotted:
            section, key = dotted.split(".", 1)
            out.setdefault(section, {})[key] = value
        else:
            out[dotted] = value
    _check_fields(out)
    return out


def config_hash(doc: dict, command: str) -> str:
    """SHA-256 of the canonical JSON form of the resolved configuration."""
    blob = json.dumps({"command": command, "config": doc}, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def get(doc: dict, dotted: str, default=None):
    node = doc
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def require(doc: dict, dotted: str, kind=None, positive=False):
    """Fetch a mandatory field, converting with ``kind`` and checking positivity."""
    value = get(doc, dotted)
    if value is None:
        raise ConfigError(f"missing required field {dotted}", [dotted])
    if kind is not None:
        try:
            value = kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"field {dotted} has an invalid value {value!r}", [dotted]) from None
    if positive and not value > 0:
        raise ConfigError(f"field {dotted} must be positive", [dotted])
    return value
