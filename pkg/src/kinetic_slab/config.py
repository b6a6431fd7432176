"""Run configuration files: flat ``section.key = value`` text.

The format is deliberately primitive -- one assignment per line, ``#``
comments, no nesting -- so the whole schema is greppable and the parser
needs nothing beyond the standard library.  Every key maps onto one field
of :class:`~kinetic_slab.dvm_solver.RunConfig`; unknown keys are rejected
rather than ignored so typos cannot silently fall back to defaults.

``serialize_config`` emits every key with ``repr`` floats, which round-trip
exactly; ``config_hash`` is the first 12 hex digits of the SHA-256 of that
canonical text and names the run directory.
"""

import dataclasses
import hashlib

from .dvm_solver import RunConfig
from .geometry import Domain


class ParseError(ValueError):
    def __init__(self, msg, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    pass


def _parse_bool(s):
    if s.lower() in ("true", "yes", "on", "1"):
        return True
    if s.lower() in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# dotted key -> (RunConfig field, converter)
SCHEMA = {
    "domain.kind": ("kind", str),
    "domain.L": ("L", float),
    "domain.R": ("R", float),
    "domain.H": ("H", float),
    "grid.nx1": ("nx1", int),
    "grid.nx2": ("nx2", int),
    "grid.n_v": ("n_v", int),
    "grid.v_max": ("v_max", float),
    "weight.theta": ("theta", float),
    "wall.alpha_specular": ("alpha_specular", float),
    "wall.alpha_diffuse": ("alpha_diffuse", float),
    "ic.kind": ("ic", str),
    "ic.amplitude": ("ic_amplitude", float),
    "source.kind": ("source", str),
    "run.nonlinear": ("nonlinear", _parse_bool),
    "run.transport": ("transport", _parse_bool),
    "run.t_end": ("t_end", float),
    "run.dt": ("dt", float),
    "run.output_every": ("output_every", int),
    "run.snapshot_every": ("snapshot_every", int),
    "run.seed": ("seed", int),
    "run.cfl_safety": ("cfl_safety", float),
    "run.scheme": ("scheme", str),
    "run.semi_implicit": ("semi_implicit", _parse_bool),
}


def parse_config_text(text):
    """Parse configuration text into a validated RunConfig."""
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno,
                             column=len(line.rstrip()) + 1)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError("missing key before '='", line=lineno, column=1)
        if not value:
            raise ParseError(f"missing value for {key!r}", line=lineno,
                             column=line.index("=") + 2)
        if key not in SCHEMA:
            raise ValidationError(f"unknown key {key!r} (line {lineno})")
        field, conv = SCHEMA[key]
        if field in kwargs:
            raise ValidationError(f"duplicate key {key!r} (line {lineno})")
        kind = {"_parse_bool": "boolean"}.get(conv.__name__, conv.__name__)
        try:
            kwargs[field] = conv(value)
        except ValueError:
            raise ValidationError(
                f"{key} expects a {kind} value, got {value!r} "
                f"(line {lineno})") from None
    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def parse_config(path):
    """Parse a configuration file into a validated RunConfig."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def serialize_config(config):
    """Canonical text form: every schema key, in schema order."""
    lines = []
    for key, (field, _) in SCHEMA.items():
        val = getattr(config, field)
        if isinstance(val, bool):
            txt = "true" if val else "false"
        elif isinstance(val, float):
            txt = repr(val)
        else:
            txt = str(val)
        lines.append(f"{key} = {txt}")
    return "\n".join(lines) + "\n"


def config_hash(config):
    """12-hex-digit run identifier derived from the canonical serialization."""
    text = serialize_config(config)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def domain_of(config):
    """Spatial domain described by the configuration."""
    if config.kind == "cylinder":
        return Domain.cylinder(L=config.L, R=config.R)
    return Domain.rect(L=config.L, H=config.H)


def as_dict(config):
    return dataclasses.asdict(config)
