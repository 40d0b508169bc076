"""Line-based model configuration files.

::

    # comment
    [base]
    lambda = 0.5
    gamma_sign = +1

    [global_map]
    x1p = 1.0
    ...

A ``[defaults]`` section with ``use = true`` fills missing keys from
:func:`default_model`.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, fields

from .errors import ParseError
from .model_family import GlobalCoeffs, ModelSpec, ResonantBase, default_model

BASE_KEYS = ("lambda", "gamma_sign")
GLOBAL_KEYS = tuple(f.name for f in fields(GlobalCoeffs))
SECTIONS = {"base": BASE_KEYS, "global_map": GLOBAL_KEYS, "defaults": ("use",)}


def _parse_real(text: str, line: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(line, f"{key}: {text!r} is not a decimal real") from None


def parse_config(text: str) -> ModelSpec:
    values: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    last = len(text.splitlines())
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, f"malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ParseError(lineno, f"unknown section [{section}]")
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected 'key = value'")
        if section is None:
            raise ParseError(lineno, "key outside of any section")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in SECTIONS[section]:
            raise ParseError(lineno, f"unknown key {key!r} in [{section}]")
        if key in values[section]:
            raise ParseError(lineno, f"duplicate key {key!r}")
        values[section][key] = (val, lineno)

    use_defaults = False
    if "use" in values.get("defaults", {}):
        val, lineno = values["defaults"]["use"]
        if val.lower() not in ("true", "false"):
            raise ParseError(lineno, "use must be true or false")
        use_defaults = val.lower() == "true"

    dflt = default_model()
    fallback = {
        "base": {"lambda": dflt.base.lam, "gamma_sign": dflt.base.gamma_sign},
        "global_map": asdict(dflt.coeffs),
    }
    resolved: dict[str, dict[str, float]] = {"base": {}, "global_map": {}}
    for sec, keys in (("base", BASE_KEYS), ("global_map", GLOBAL_KEYS)):
        given = values.get(sec, {})
        for key in keys:
            if key in given:
                val, lineno = given[key]
                resolved[sec][key] = _parse_real(val, lineno, key)
            elif use_defaults:
                resolved[sec][key] = fallback[sec][key]
            else:
                raise ParseError(last, f"missing key {key!r} in [{sec}]")

    gs = resolved["base"]["gamma_sign"]
    if gs not in (1.0, -1.0):
        lineno = values.get("base", {}).get("gamma_sign", ("", 0))[1]
        raise ParseError(lineno, "gamma_sign must be +1 or -1")
    base = ResonantBase(resolved["base"]["lambda"], int(gs))
    return ModelSpec(base, GlobalCoeffs(**resolved["global_map"]))


def serialize_config(spec: ModelSpec) -> str:
    lines = ["[base]", f"lambda = {spec.base.lam!r}", f"gamma_sign = {spec.base.gamma_sign:+d}", ""]
    lines.append("[global_map]")
    for key, val in asdict(spec.coeffs).items():
        lines.append(f"{key} = {val!r}")
    return "\n".join(lines) + "\n"


def config_hash(text: str | None) -> str:
    if text is None:
        return "none"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
