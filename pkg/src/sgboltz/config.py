"""Run configuration files.

INI-style text with five sections: [grid], [kernel], [ic], [time],
[output].  Every key is validated against a fixed schema; unknown
sections or keys are rejected with their dotted path, and `--set
section.key=value` overrides are applied before validation.  Example:

    [grid]
    S = 4.0
    N = 16
    K = 2

    [kernel]
    gamma = 0.0
    b = 1.0 0.2

    [ic]
    family = bkw

    [time]
    integrator = rk4
    dt = 0.01
    t_end = 1.0

    [output]
    diag_every = 10
    snapshot_times = 0.5 1.0
    dir = out/run1
    weights_dir = weights
"""
from __future__ import annotations

import configparser

from .ic import make_family
from .kernel import ANGULAR_DEFAULT, KernelModel, validate_kernel
from .solver import SUPPORT_TOL_DEFAULT, RunConfig


def _int(raw: str) -> int:
    return int(raw, 10)


def _float(raw: str) -> float:
    return float(raw)


def _floats(raw: str) -> tuple:
    toks = raw.split()
    if not toks:
        raise ValueError("expected one or more numbers")
    return tuple(float(t) for t in toks)


def _str(raw: str) -> str:
    if not raw:
        raise ValueError("expected a non-empty value")
    return raw


SCHEMA = {
    "grid": {"S": _float, "N": _int, "K": _int, "quad_order_z": _int},
    "kernel": {"gamma": _float, "b": _floats, "angular_constant": _float},
    "ic": {"family": _str, "support_tol": _float, "t0": _float,
           "separation": _float, "temp_plus": _floats, "temp_minus": _floats},
    "time": {"integrator": _str, "dt": _float, "t_end": _float},
    "output": {"diag_every": _int, "snapshot_times": _floats, "dir": _str,
               "weights_dir": _str},
}

REQUIRED = (("grid", "S"), ("grid", "N"), ("grid", "K"), ("kernel", "gamma"))

# ic keys forwarded to the family constructor rather than RunConfig itself
IC_FAMILY_KEYS = ("t0", "separation", "temp_plus", "temp_minus")


def read_config_file(path) -> dict:
    """Parse an INI file into {(section, key): raw string}.

    Raises ValueError with the parser's line information on malformed
    input, and with a dotted path on unknown sections or keys.
    """
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ValueError(f"config: cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ValueError(f"config: parse error in {path}: {exc}") from exc
    raw = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ValueError(f"{section}: unknown section (expected one of "
                             f"{', '.join(SCHEMA)})")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ValueError(
                    f"{section}.{key}: unknown key (known: "
                    f"{', '.join(SCHEMA[section])})")
            raw[(section, key)] = value
    return raw


def apply_overrides(raw: dict, overrides) -> dict:
    """Fold `section.key=value` strings into the raw key-value map."""
    out = dict(raw)
    for item in overrides:
        head, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set {item!r}: expected section.key=value")
        section, dot, key = head.partition(".")
        if not dot or not section or not key:
            raise ValueError(f"--set {item!r}: key must be section.key")
        if section not in SCHEMA:
            raise ValueError(f"{section}: unknown section (expected one of "
                             f"{', '.join(SCHEMA)})")
        if key not in SCHEMA[section]:
            raise ValueError(f"{section}.{key}: unknown key (known: "
                             f"{', '.join(SCHEMA[section])})")
        out[(section, key)] = value
    return out


def _convert(raw: dict) -> dict:
    vals = {}
    for (section, key), text in raw.items():
        try:
            vals[(section, key)] = SCHEMA[section][key](text)
        except ValueError as exc:
            raise ValueError(
                f"{section}.{key}: invalid value {text!r} ({exc})") from exc
    return vals


def build_run_config(values: dict, out_dir=None, threads: int = 1) -> RunConfig:
    """Assemble and fully validate a RunConfig from converted values."""
    for section, key in REQUIRED:
        if (section, key) not in values:
            raise ValueError(f"{section}.{key}: required key missing")
    kernel = KernelModel(
        gamma=values[("kernel", "gamma")],
        b_coeffs=values.get(("kernel", "b"), (1.0,)),
        angular_constant=values.get(("kernel", "angular_constant"),
                                    ANGULAR_DEFAULT))
    validate_kernel(kernel)
    ic_family = values.get(("ic", "family"), "bkw")
    ic_params = {k: values[("ic", k)] for k in IC_FAMILY_KEYS
                 if ("ic", k) in values}
    # constructing the family surfaces unknown-parameter errors now
    make_family(ic_family, ic_params, kernel)
    config = RunConfig(
        S=values[("grid", "S")],
        N=values[("grid", "N")],
        K=values[("grid", "K")],
        kernel=kernel,
        integrator=values.get(("time", "integrator"), "rk4"),
        dt=values.get(("time", "dt"), 0.01),
        t_end=values.get(("time", "t_end"), 1.0),
        ic_family=ic_family,
        ic_params=ic_params,
        diag_every=values.get(("output", "diag_every"), 10),
        snapshot_times=values.get(("output", "snapshot_times"), ()),
        out_dir=out_dir if out_dir is not None
        else values.get(("output", "dir")),
        weights_dir=values.get(("output", "weights_dir")),
        quad_order_z=values.get(("grid", "quad_order_z")),
        support_tol=values.get(("ic", "support_tol"), SUPPORT_TOL_DEFAULT),
        threads=threads)
    return config


def parse_config(path, overrides=(), out_dir=None,
                 threads: int = 1) -> RunConfig:
    """File + overrides -> validated RunConfig (the CLI entry path)."""
    raw = apply_overrides(read_config_file(path), overrides)
    return build_run_config(_convert(raw), out_dir=out_dir, threads=threads)
