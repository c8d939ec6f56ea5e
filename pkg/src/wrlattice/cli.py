"""Command-line front end: config parsing, dispatch and JSONL/CSV output.

Config files use INI sections; every key can also be given as a flag
(``--z-min`` for ``z_min``). Flags override file values.

Exit codes: 0 success, 1 a verified inequality failed, 2 validation error,
3 capacity guard, 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .exact import (
    FAMILIES,
    MAX_OCC_SITES,
    MAX_STATES,
    MAX_TRANSFER_STATES,
    CapacityError,
    ConvergenceError,
    chessboard_check,
    event_probability,
    family_count,
    transfer_pressure,
)
from .lattice import Torus
from .measure import measure
from .model import InadmissibleConfiguration, ModelSpec, Variant
from .plaquette import WRAP_FAMILIES, Kind, contiguity_components, site_sea_status
from .sampler import EMPTY_INIT, GENERATOR, Chain, ChainSchedule, InitialState, initial_grid, run_chain
from .thermo import default_init, density_sweep, geometric_grid, locate_jump

COMMANDS = ("simulate", "sweep", "verify-chessboard", "count", "exact-prob", "transfer", "percolation-report")
EXIT_OK, EXIT_FAILED, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_NONCONVERGENCE = 0, 1, 2, 3, 4

CHESSBOARD_FAMILIES = ("B0", "B1", "B2", "B3", "GEVEN", "GODD", "GORD")


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    variant: str = "diamond"
    q: int | None = None
    alpha: float | None = None
    z: float = 1.0
    z_min: float | None = None
    z_max: float | None = None
    z_points: int = 11
    width: int = 8
    height: int = 8
    init: str = "auto"
    burn_in: int = 1000
    sweeps: int = 10000
    measure_every: int = 10
    cluster_every: int = 1
    seed: int = 0
    direction: str = "both"
    level: float = 2 / 3
    family: str = "B2L"
    families: str = ",".join(CHESSBOARD_FAMILIES)
    strip_width: int = 2
    event: str = "empty"
    out: str = "out"

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.variant, self.z, self.q, self.alpha)

    @property
    def torus(self) -> Torus:
        return Torus(self.width, self.height)

    @property
    def schedule(self) -> ChainSchedule:
        return ChainSchedule(self.burn_in, self.sweeps, self.measure_every, self.cluster_every, self.seed)

    def initial_state(self, direction: str = "up") -> InitialState:
        if self.init == "auto":
            return default_init(self.model, direction) if self.command == "sweep" else EMPTY_INIT
        return InitialState.parse(self.init)

    def z_grid(self) -> np.ndarray:
        return geometric_grid(self.z_min, self.z_max, self.z_points)


# key -> section for rendering; parsing accepts any section
SECTIONS = {
    "run": ("command", "out", "seed"),
    "model": ("variant", "q", "alpha", "z"),
    "torus": ("width", "height"),
    "chain": ("init", "burn_in", "sweeps", "measure_every", "cluster_every"),
    "sweep": ("z_min", "z_max", "z_points", "direction", "level"),
    "exact": ("family", "families", "strip_width", "event"),
}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    typ = _TYPES[key]
    raw = raw.strip()
    if raw.lower() in ("", "none") and "None" in typ:
        return None
    if typ.startswith("int"):
        return int(raw)
    if typ.startswith("float"):
        return float(raw)
    return raw


def _line_of(text: str, key: str) -> int:
    for n, line in enumerate(text.splitlines(), 1):
        if line.split("=", 1)[0].strip().replace("-", "_") == key:
            return n
    return 0


def validate(rc: RunConfig) -> RunConfig:
    """Check every downstream guard; raises ValidationError or CapacityError."""
    if rc.command not in COMMANDS:
        raise ValidationError(f"command must be one of {COMMANDS}, got {rc.command!r}")
    try:
        Variant(rc.variant)
    except ValueError:
        raise ValidationError(f"variant must be one of {[v.value for v in Variant]}, got {rc.variant!r}") from None
    try:
        m = rc.model
        t = rc.torus
        rc.schedule
    except ValueError as e:
        msg = str(e)
        if "even" in msg:
            msg += " (torus dimensions must be even so reflections tile the torus)"
        raise ValidationError(msg) from None
    if rc.command in ("simulate", "sweep", "percolation-report"):
        try:
            for d in ("up", "down") if rc.command == "sweep" else ("up",):
                initial_grid(m, t, rc.initial_state(d))
        except (ValueError, InadmissibleConfiguration) as e:
            raise ValidationError(f"init: {e}") from None
    if rc.command in ("sweep", "transfer"):
        if rc.z_min is None or rc.z_max is None:
            raise ValidationError(f"{rc.command} needs z_min and z_max")
        try:
            rc.z_grid()
        except ValueError as e:
            raise ValidationError(str(e)) from None
    if rc.command == "sweep":
        if rc.direction not in ("up", "down", "both"):
            raise ValidationError("direction must be up, down or both")
        if not 0 < rc.level < 1:
            raise ValidationError("level must lie in (0, 1)")
    if rc.command in ("verify-chessboard", "exact-prob", "transfer") and not m.discrete:
        raise ValidationError(f"{rc.command} needs a discrete variant")
    if rc.command == "verify-chessboard":
        for f in rc.families.split(","):
            if f.strip().upper() not in Kind.__members__:
                raise ValidationError(f"unknown plaquette family {f!r}")
        if t.n_sites > MAX_OCC_SITES:
            raise CapacityError(f"W*H = {t.n_sites} exceeds the occupation enumeration guard {MAX_OCC_SITES}")
    if rc.command == "exact-prob":
        _event_predicate(rc.event)
        if (m.q + 1) ** t.n_sites > MAX_STATES:
            raise CapacityError(f"(q+1)^(W*H) exceeds the enumeration guard {MAX_STATES:.0e}")
    if rc.command == "transfer" and (m.q + 1) ** rc.strip_width > MAX_TRANSFER_STATES:
        raise CapacityError(f"(q+1)^W exceeds the transfer guard {MAX_TRANSFER_STATES}")
    if rc.command == "count" and rc.family not in FAMILIES:
        raise ValidationError(f"family must be one of {FAMILIES}")
    return rc


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse INI-style text into a validated RunConfig."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = lambda s: s.replace("-", "_")
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ValidationError(f"config syntax: {e}") from None
    values = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            if key not in _TYPES:
                raise ValidationError(f"line {_line_of(text, key)}: unknown key {key!r} in [{sec}]")
            try:
                values[key] = _convert(key, raw)
            except ValueError:
                raise ValidationError(f"line {_line_of(text, key)}: bad value {raw!r} for {key}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "command" not in values:
        raise ValidationError("missing required key 'command'")
    return validate(RunConfig(**values))


def render(rc: RunConfig) -> str:
    lines = []
    for sec, keys in SECTIONS.items():
        lines.append(f"[{sec}]")
        for k in keys:
            v = getattr(rc, k)
            lines.append(f"{k} = {'none' if v is None else repr(v) if isinstance(v, float) else v}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

class Output:
    def __init__(self, rc: RunConfig):
        self.dir = Path(rc.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = json.dumps({"type": "header", "version": __version__, "generator": GENERATOR,
                                  "config": dataclasses.asdict(rc)}, sort_keys=True)
        self.jsonl = open(self.dir / "records.jsonl", "w")
        self.jsonl.write(self.header + "\n")
        self.rows: list[dict] = []

    def write(self, rec: dict):
        self.jsonl.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")

    def row(self, r: dict):
        self.rows.append(r)

    def close(self):
        self.jsonl.close()
        if self.rows:
            with open(self.dir / "summary.csv", "w", newline="") as fh:
                fh.write("# " + self.header + "\n")
                w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
                w.writeheader()
                w.writerows(self.rows)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _simulate(rc: RunConfig, out: Output) -> int:
    recs = []
    for r in run_chain(rc.model, rc.torus, rc.initial_state(), rc.schedule):
        d = r.to_dict()
        d["type"] = "record"
        out.write(d)
        recs.append(r)
    if recs:
        dens = np.array([r.density for r in recs])
        row = {"variant": rc.variant, "z": rc.z, "samples": len(recs), "density": dens.mean(),
               "staggered": np.mean([r.staggered for r in recs])}
        for f in WRAP_FAMILIES[rc.model.variant]:
            row[f"frac_{f.name}"] = np.mean([r.fraction(f) for r in recs])
            row[f"both_{f.name}"] = np.mean([r.wraps_both(f) for r in recs])
        out.row(row)
    return EXIT_OK


def _sweep(rc: RunConfig, out: Output) -> int:
    dirs = ("up", "down") if rc.direction == "both" else (rc.direction,)
    res = {}
    for d in dirs:
        sr = density_sweep(rc.model, rc.torus, rc.z_grid(), d, rc.schedule, init=rc.initial_state(d))
        res[d] = sr
        for k, z in enumerate(sr.z):
            row = {"direction": d, "z": float(z), "density": float(sr.density[k]),
                   "stderr": float(sr.stderr[k]), "top_class": sr.top_class[k]}
            for name in sr.fractions:
                row[f"frac_{name}"] = float(sr.fractions[name][k])
                row[f"both_{name}"] = float(sr.wrapping[name][k])
            out.write({"type": "sweep-point", **row})
            out.row(row)
    if len(res) == 2:
        try:
            jb = locate_jump(res["up"], res["down"], rc.level)
            out.write({"type": "jump", "level": rc.level,
                       "bracket": None if jb is None else dataclasses.asdict(jb)})
        except ValueError as e:
            out.write({"type": "jump", "level": rc.level, "bracket": None, "note": str(e)})
    return EXIT_OK


def _chessboard(rc: RunConfig, out: Output) -> int:
    ok = True
    for name in rc.families.split(","):
        kind = Kind[name.strip().upper()]
        r = chessboard_check(rc.model, rc.torus, kind)
        row = {"family": kind.name, "q": rc.q, "z": rc.z, "width": rc.width, "height": rc.height,
               "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds}
        out.write({"type": "chessboard", **row})
        out.row(row)
        ok &= r.holds
    return EXIT_OK if ok else EXIT_FAILED


def _count(rc: RunConfig, out: Output) -> int:
    r = family_count(rc.family, rc.torus, rc.q)
    row = {"family": r.family, "width": rc.width, "height": rc.height, "q": r.q,
           "formula": r.formula_value, "kind": "exact" if r.exact else "bound",
           "brute_force": r.brute_force_value, "particle_number": r.particle_number,
           "consistent": r.consistent}
    out.write({"type": "count", **row})
    out.row(row)
    return EXIT_OK


def _event_predicate(spec: str):
    """Vectorized predicates over (K, W, H) stacks selected by name."""
    from .exact import plaquette_classes

    name, _, arg = spec.partition(":")
    if name == "empty":
        return lambda c, m: ~(c != 0).any(axis=(1, 2))
    if name == "full":
        return lambda c, m: (c != 0).all(axis=(1, 2))
    if name == "origin-occupied":
        return lambda c, m: c[:, 0, 0] != 0
    if name == "origin-class":
        if arg.upper() not in Kind.__members__:
            raise ValidationError(f"unknown plaquette class {arg!r}")
        kind = Kind[arg.upper()]
        return lambda c, m: plaquette_classes(m, c)[0] == int(kind)
    raise ValidationError("event must be empty, full, origin-occupied or origin-class:<KIND>")


def _exact_prob(rc: RunConfig, out: Output) -> int:
    m = rc.model
    pred = _event_predicate(rc.event)
    p = event_probability(m, rc.torus, lambda c: pred(c, m), vectorized=True)
    row = {"event": rc.event, "q": rc.q, "z": rc.z, "width": rc.width, "height": rc.height,
           "probability": float(p), "exact": str(p)}
    out.write({"type": "probability", **row})
    out.row(row)
    return EXIT_OK


def _transfer(rc: RunConfig, out: Output) -> int:
    pc = transfer_pressure(rc.model, rc.strip_width, rc.z_grid())
    for k, z in enumerate(pc.z):
        row = {"z": float(z), "pressure": float(pc.pressure[k]), "density": float(pc.density[k]),
               "entropy": float(pc.entropy[k]), "strip_width": rc.strip_width}
        out.write({"type": "pressure", **row})
        out.row(row)
    return EXIT_OK


def _percolation(rc: RunConfig, out: Output) -> int:
    m, t = rc.model, rc.torus
    chain = Chain(m, t, rc.initial_state(), seed=rc.seed, cluster_every=rc.cluster_every)
    chain.advance(rc.burn_in)
    rows = []
    for _ in range(rc.sweeps // rc.measure_every):
        chain.advance(rc.measure_every)
        rec = measure(m, chain.grid, sweep=chain.sweeps, seed=rc.seed)
        cfg = chain.configuration()
        d = {"sweep": rec.sweep, "density": rec.density, **{f"plaq_{k}": v for k, v in rec.wrapping.items()},
             "even_occupied_star": site_sea_status(cfg, 0, True).value,
             "odd_empty_star": site_sea_status(cfg, 1, False).value}
        if m.variant is Variant.SQUARE:
            d["contiguity"] = contiguity_components(cfg).status.value
        out.write({"type": "percolation", **d})
        rows.append(d)
    if rows:
        summary = {"samples": len(rows)}
        for key in rows[0]:
            if key in ("sweep", "density"):
                continue
            summary[f"both_{key}"] = float(np.mean([r[key] == "both" for r in rows]))
        out.row(summary)
    return EXIT_OK


DISPATCH = {
    "simulate": _simulate, "sweep": _sweep, "verify-chessboard": _chessboard, "count": _count,
    "exact-prob": _exact_prob, "transfer": _transfer, "percolation-report": _percolation,
}


def execute(rc: RunConfig) -> int:
    out = Output(rc)
    try:
        code = DISPATCH[rc.command](rc, out)
    except CapacityError as e:
        out.write({"type": "error", "code": EXIT_CAPACITY, "message": str(e)})
        code = EXIT_CAPACITY
    except ConvergenceError as e:
        out.write({"type": "error", "code": EXIT_NONCONVERGENCE, "message": str(e)})
        code = EXIT_NONCONVERGENCE
    finally:
        out.close()
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wrlattice", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="INI config file; flags override its values")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, help=f"(default {f.default!r})")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for k, v in vars(args).items():
            if k == "config" or v is None:
                continue
            try:
                overrides[k] = v if k == "command" else _convert(k, v)
            except ValueError:
                raise ValidationError(f"--{k.replace('_', '-')}: bad value {v!r}") from None
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        rc = parse_config(text, overrides)
    except CapacityError as e:
        print(json.dumps({"type": "error", "code": EXIT_CAPACITY, "message": str(e)}), file=sys.stderr)
        return EXIT_CAPACITY
    except (ValidationError, ValueError, TypeError, OSError) as e:
        print(json.dumps({"type": "error", "code": EXIT_VALIDATION, "message": str(e)}), file=sys.stderr)
        return EXIT_VALIDATION
    print(render(rc), file=sys.stderr)
    return execute(rc)


if __name__ == "__main__":
    sys.exit(main())
