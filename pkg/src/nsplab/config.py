"""Strict flat key = value configuration with bracketed sections.

Unknown sections or keys fail the parse (silent misconfiguration is worse
than a hard error), every value is typed and validated at parse time, and
the accepted grammar is deliberately tiny: blank lines, full-line # comments,
[section] headers, and key = value pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .grids import FluidParams


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    value = int(text)
    return value


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean (on/off), got {text!r}")


def _float_or_auto(text: str):
    if text.strip().lower() == "auto":
        return "auto"
    return float(text)


def _enum(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


def _float_list(text: str):
    return [float(part) for part in text.split(",") if part.strip()]


def _int_list(text: str):
    return [int(part) for part in text.split(",") if part.strip()]


_SCHEMA = {
    "fluid": {
        "gamma": (_float, 2.0),
        "mu": (_float, 0.5),
        "lambda": (_float, 0.0),
        "alpha": (_float, 0.0),
        "c_star": (_float, 1.0),
    },
    "domain": {
        "r_inner": (_float, 1.0),
        "r_outer": (_float, 16.0),
        "n_cells": (_int, 2000),
        "stretch": (_float, 0.0),
    },
    "steady": {
        "profile": (_enum("constant", "admissible_bump",
                          "general_gamma_envelope"), "admissible_bump"),
        "amplitude": (_float, 0.5),
        "tol": (_float, 1e-10),
        "max_iter": (_int, 200),
        "envelope_c0": (_float, 1.0),
        "envelope_eps": (_float, 0.5),
    },
    "evolve": {
        "delta": (_float, 1e-3),
        "t_end": (_float, 10.0),
        "dt": (_float_or_auto, "auto"),
        "sponge_width": (_float_or_auto, "auto"),
        "sponge_rate": (_float_or_auto, "auto"),
        "output_stride": (_int, 50),
        "init_kind": (_enum("standard", "density_only", "velocity_only"),
                      "standard"),
        "mode": (_enum("nonlinear", "linear"), "nonlinear"),
        "pressure": (_bool, True),
        "coupling": (_bool, True),
        "viscosity": (_bool, True),
        "margin": (_float, 2.0),
        "vacuum_floor": (_float, 0.1),
        "checkpoints": (_bool, False),
    },
    "ineqlab": {
        "nr": (_int, 32),
        "ntheta": (_int, 16),
        "nphi": (_int, 32),
        "n_fields": (_int, 100),
        "n_scalars": (_int, 20),
        "n_lame": (_int, 20),
        "modes": (_int, 3),
        "allowance": (_float, 0.05),
        "trace_outer_factor": (_float, 4.0),
    },
    "sweep": {
        "gamma": (_float_list, None),
        "delta": (_float_list, None),
        "n_cells": (_int_list, None),
        "r_max": (_float_list, None),
    },
    "output": {
        "seed": (_int, 0),
    },
}

REQUIRED_SECTIONS = ("fluid", "domain")


@dataclass(frozen=True)
class AppConfig:
    """Typed configuration; section dataclass per schema section."""

    fluid: FluidParams
    domain: dict
    steady: dict
    evolve: dict
    ineqlab: dict
    sweep: dict
    seed: int
    canonical: str = field(repr=False, default="")


def _tokenize(text: str) -> dict:
    """Map (section, key) -> (raw value, line number), strictly."""
    entries = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}] at line {lineno}")
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value at line {lineno}: {raw!r}")
        if section is None:
            raise ConfigError(f"key outside any section at line {lineno}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in section [{section}] at line {lineno}")
        if (section, key) in entries:
            raise ConfigError(
                f"duplicate key {key!r} in section [{section}] at line {lineno}")
        entries[(section, key)] = (value, lineno)
    return entries


def _apply_overrides(entries: dict, overrides: list[str]) -> dict:
    out = dict(entries)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override must look like section.key=value, got {item!r}")
        target, _, value = item.partition("=")
        section, _, key = target.strip().partition(".")
        if section not in _SCHEMA or key not in _SCHEMA.get(section, {}):
            raise ConfigError(f"unknown override target {target!r}")
        out[(section, key)] = (value.strip(), 0)
    return out


def parse_config(text: str, overrides: list[str] | None = None,
                 seed: int | None = None) -> AppConfig:
    """Parse config text (plus optional overrides) into a typed AppConfig.

    Every invariant the downstream types enforce (positivity, gamma >= 1,
    the viscosity condition) is triggered here so misconfiguration fails
    before any run starts.
    """
    entries = _tokenize(text)
    present = {section for (section, _) in entries}
    header_sections = {
        line.strip()[1:-1].strip()
        for line in text.splitlines()
        if line.strip().startswith("[") and line.strip().endswith("]")
    }
    present |= {s for s in header_sections if s in _SCHEMA}
    for section in REQUIRED_SECTIONS:
        if section not in present:
            keys = ", ".join(sorted(_SCHEMA[section]))
            raise ConfigError(
                f"missing required section [{section}] (keys: {keys})")
    if overrides:
        entries = _apply_overrides(entries, overrides)

    typed: dict[str, dict] = {}
    for section, keys in _SCHEMA.items():
        out = {}
        for key, (parser, default) in keys.items():
            if (section, key) in entries:
                raw, lineno = entries[(section, key)]
                try:
                    out[key] = parser(raw)
                except ValueError as exc:
                    where = f"line {lineno}" if lineno else "override"
                    raise ConfigError(
                        f"bad value for {section}.{key} at {where}: {exc}") from exc
            else:
                out[key] = default
        typed[section] = out

    fl = typed["fluid"]
    try:
        fluid = FluidParams(gamma=fl["gamma"], mu=fl["mu"],
                            lambda_=fl["lambda"], alpha=fl["alpha"],
                            c_star=fl["c_star"])
    except Exception as exc:
        raise ConfigError(f"invalid [fluid] parameters: {exc}") from exc

    dom = typed["domain"]
    if not (dom["r_inner"] > 0.0 and dom["r_outer"] > dom["r_inner"]):
        raise ConfigError("[domain] needs 0 < r_inner < r_outer")
    if dom["n_cells"] < 8:
        raise ConfigError("[domain] n_cells must be >= 8")

    st = typed["steady"]
    if not (0.0 <= st["amplitude"] <= 1.0):
        raise ConfigError("[steady] amplitude must lie in [0, 1]")
    if st["tol"] <= 0.0 or st["max_iter"] < 1:
        raise ConfigError("[steady] tol must be > 0 and max_iter >= 1")
    if fluid.gamma > 2.0 and st["profile"] != "general_gamma_envelope":
        raise ConfigError("[steady] gamma > 2 requires the "
                          "general_gamma_envelope profile")

    ev = typed["evolve"]
    if ev["delta"] < 0.0:
        raise ConfigError("[evolve] delta must be >= 0")
    if ev["t_end"] <= 0.0:
        raise ConfigError("[evolve] t_end must be > 0")
    if ev["output_stride"] < 1:
        raise ConfigError("[evolve] output_stride must be >= 1")

    iq = typed["ineqlab"]
    if iq["nr"] < 16 or iq["ntheta"] < 8 or iq["nphi"] < 8:
        raise ConfigError("[ineqlab] needs nr >= 16, ntheta >= 8, nphi >= 8")

    use_seed = typed["output"]["seed"] if seed is None else int(seed)

    canonical_parts = []
    for section in sorted(_SCHEMA):
        for key in sorted(_SCHEMA[section]):
            canonical_parts.append(f"{section}.{key}={typed[section][key]!r}")
    canonical_parts.append(f"seed={use_seed}")
    canonical = ";".join(canonical_parts)

    return AppConfig(fluid=fluid, domain=dom, steady=st, evolve=ev,
                     ineqlab=iq, sweep=typed["sweep"], seed=use_seed,
                     canonical=canonical)
