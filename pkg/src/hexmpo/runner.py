"""Experiment configs, sweep execution and result serialization.

A config names an engine, a circuit, an observable and the sweep axes. Every
``(theta_h, chi, flux)`` combination is one independent sweep point; depth lists are
handled inside a point. Results are a JSON record (with the resolved config embedded)
and a long-format CSV table.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import itertools
import json
import math
import os
import re
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from hexmpo import __version__

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DATA_DIR_ENV = "HEXMPO_DATA_DIR"
ENGINES = ("heisenberg", "mps", "bptns", "exact", "clifford")
KINDS = {
    "heisenberg": {"z", "pauli", "stabilizer", "modified_stabilizer", "otoc", "oee"},
    "mps": {"z", "pauli", "echo"},
    "bptns": {"z", "echo", "double_slit"},
    "exact": {"z", "pauli", "stabilizer", "echo", "double_slit"},
    "clifford": {"z", "pauli", "stabilizer"},
}


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_ANGLE = re.compile(
    r"^\s*([+-]?(?:(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)?)\s*\*?\s*(pi|π)?(?:\s*/\s*(\d+\.?\d*))?\s*$", re.I
)


def parse_angle(value: Any, path: str = "angle") -> float:
    """Radians from a number or a string such as ``0.25pi``, ``-pi/2`` or ``1.2``."""
    if isinstance(value, bool):
        raise ConfigError(path, f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    else:
        text = str(value).strip()
        m = _ANGLE.match(text)
        if not m or (m.group(1) in ("", "+", "-") and m.group(2) is None):
            raise ConfigError(path, f"cannot parse angle {value!r}")
        coef, pi, den = m.groups()
        if coef in ("", "+", "-"):
            coef += "1"
        out = float(coef) * (math.pi if pi else 1.0)
        if den:
            out /= float(den)
    if not math.isfinite(out):
        raise ConfigError(path, "angle must be finite")
    return out


@dataclass
class ExperimentConfig:
    """Resolved experiment configuration (angles in radians)."""

    name: str
    engine: str
    geometry: str = "eagle127"
    theta_J: float = -math.pi / 2
    theta_h: list[float] = field(default_factory=lambda: [math.pi / 2])
    depths: list[int] = field(default_factory=lambda: [1])
    chi: list[int] = field(default_factory=lambda: [1])
    variant: str = "standard"
    flux_bond: tuple[int, int] | None = None
    observable: dict[str, Any] = field(default_factory=lambda: {"kind": "z", "site": 0})
    params: dict[str, Any] = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict[str, Any]:
        d = {
            "name": self.name,
            "engine": self.engine,
            "geometry": self.geometry,
            "theta_J": self.theta_J,
            "theta_h": list(self.theta_h),
            "depths": list(self.depths),
            "chi": list(self.chi),
            "variant": self.variant,
            "flux_bond": list(self.flux_bond) if self.flux_bond else None,
            "observable": dict(self.observable),
            "params": dict(self.params),
            "out": self.out,
            "seed": self.seed,
            "workers": self.workers,
        }
        return json.loads(json.dumps(d))

    def hash(self) -> str:
        """Hash of the physics-defining fields (output path and worker count excluded)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        for k in raw:
            if k not in known:
                raise ConfigError(k, "unknown field")
        if "name" not in raw:
            raise ConfigError("name", "required")
        engine = raw.get("engine")
        if engine not in ENGINES:
            raise ConfigError("engine", f"expected one of {ENGINES}, got {engine!r}")

        def grid(key: str, conv, default):
            val = raw.get(key, default)
            if not isinstance(val, (list, tuple)):
                val = [val]
            if len(val) == 0:
                raise ConfigError(key, "sweep grid must be non-empty")
            return [conv(v, f"{key}[{i}]") for i, v in enumerate(val)]

        def pos_int(v, path):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(path, f"expected a positive integer, got {v!r}")
            return v

        def nonneg_int(v, path):
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(path, f"expected a non-negative integer, got {v!r}")
            return v

        from hexmpo.circuits import VARIANTS
        from hexmpo.lattice import GeometryError, geometry

        geo = raw.get("geometry", "eagle127")
        try:
            lat = geometry(geo)
        except (GeometryError, OSError) as exc:
            raise ConfigError("geometry", str(exc)) from None
        variant = raw.get("variant", "standard")
        if variant not in VARIANTS:
            raise ConfigError("variant", f"expected one of {VARIANTS}")
        obs = dict(raw.get("observable", {"kind": "z", "site": 0}))
        kind = obs.get("kind")
        if kind not in KINDS[engine]:
            raise ConfigError("observable.kind", f"{kind!r} not supported by engine {engine}")
        if "site" in obs:
            site = obs["site"]
            if isinstance(site, str):
                try:
                    obs["site"] = lat.label(site)
                except GeometryError as exc:
                    raise ConfigError("observable.site", str(exc)) from None
            elif not (isinstance(site, int) and 0 <= site < lat.site_count):
                raise ConfigError("observable.site", f"site {site!r} outside 0..{lat.site_count - 1}")
        if kind in ("pauli",) and "string" not in obs:
            raise ConfigError("observable.string", "required for kind 'pauli'")
        if kind in ("z", "stabilizer", "modified_stabilizer", "otoc", "echo") and "site" not in obs:
            raise ConfigError("observable.site", f"required for kind {kind!r}")
        fb = raw.get("flux_bond")
        if fb is not None:
            if not (isinstance(fb, (list, tuple)) and len(fb) == 2):
                raise ConfigError("flux_bond", "expected a pair of sites")
            fb = (min(fb), max(fb))
            if not lat.has_edge(*fb):
                raise ConfigError("flux_bond", f"{fb} is not an edge")
        params = dict(raw.get("params", {}))
        if "flux" in params:
            fl = params["flux"] if isinstance(params["flux"], list) else [params["flux"]]
            params["flux"] = [parse_angle(v, f"params.flux[{i}]") for i, v in enumerate(fl)]
        if "theta_prime" in params:
            params["theta_prime"] = parse_angle(params["theta_prime"], "params.theta_prime")
        return cls(
            name=str(raw["name"]),
            engine=engine,
            geometry=geo,
            theta_J=parse_angle(raw.get("theta_J", -math.pi / 2), "theta_J"),
            theta_h=grid("theta_h", parse_angle, [math.pi / 2]),
            depths=grid("depths", nonneg_int, [1]),
            chi=grid("chi", pos_int, [1]),
            variant=variant,
            flux_bond=fb,
            observable=obs,
            params=params,
            out=raw.get("out"),
            seed=nonneg_int(raw.get("seed", 0), "seed"),
            workers=pos_int(raw.get("workers", 1), "workers"),
        )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML or JSON config file, or ``preset:<name>``."""
    text = str(path)
    if text.startswith("preset:"):
        return preset(text[len("preset:"):])
    p = Path(path)
    try:
        if p.suffix == ".json":
            raw = json.loads(p.read_text())
        else:
            with open(p, "rb") as fh:
                raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"no such file {p}") from None
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("<file>", f"parse error: {exc}") from None
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# sweep points


@dataclass
class PointResult:
    point: dict[str, Any]
    rows: list[dict[str, Any]]
    fidelity: dict[str, Any] | None
    diagnostics: dict[str, Any]
    seconds: float
    error: str | None = None


def sweep_points(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    fluxes = cfg.params.get("flux", [None]) if cfg.observable["kind"] == "double_slit" else [None]
    out = []
    for th, chi, fl in itertools.product(cfg.theta_h, cfg.chi, fluxes):
        p = {"theta_h": th, "chi": chi}
        if fl is not None:
            p["flux"] = fl
        out.append(p)
    return out


def _row(depth, quantity, value, site=None, **extra) -> dict[str, Any]:
    r = {"depth": depth, "quantity": quantity, "site": site, "value": float(value)}
    r.update(extra)
    return r


def _target(cfg: ExperimentConfig, lat, D: int):
    """Initial Heisenberg operator / measured string for depth ``D``."""
    from hexmpo.clifford import modified_stabilizer, stabilizer
    from hexmpo.pauli import PauliString

    obs = cfg.observable
    kind = obs["kind"]
    n = lat.site_count
    if kind in ("z", "otoc", "oee"):
        return PauliString.single(n, obs["site"], "Z")
    if kind == "pauli":
        return PauliString.parse(obs["string"], n)
    sd = obs.get("stabilizer_depth", D)
    if kind == "stabilizer":
        return stabilizer(lat, obs["site"], sd)
    if kind == "modified_stabilizer":
        return modified_stabilizer(lat, obs["site"], sd)
    raise ValueError(kind)


def _run_heisenberg(cfg, lat, point) -> tuple[list, dict, dict]:
    from hexmpo.circuits import CircuitSpec
    from hexmpo.heisenberg import evolve_operator, otoc_profile_train

    kind = cfg.observable["kind"]
    variant = "extra_final_rx" if kind == "modified_stabilizer" else cfg.variant
    rows: list = []
    fid = None
    diag: dict = {}
    per_depth = kind in ("stabilizer", "modified_stabilizer") and "stabilizer_depth" not in cfg.observable
    groups = [[d] for d in cfg.depths] if per_depth else [sorted(cfg.depths)]
    for group in groups:
        D = max(group)
        spec = CircuitSpec(cfg.theta_J, point["theta_h"], D, lat, variant, cfg.flux_bond)
        keep = group if kind == "otoc" else "last"
        run = evolve_operator(_target(cfg, lat, D), spec, D, point["chi"], keep=keep,
                              measure_oee=kind == "oee" or cfg.params.get("oee", False))
        for r in run.records:
            if r.depth not in group:
                continue
            extra = {"F": r.F, "max_bond": r.max_bond}
            if kind == "oee":
                rows.append(_row(r.depth, "max_oee", r.oee, **extra))
            elif kind == "otoc":
                prof = otoc_profile_train(run.train(r.depth), run.order)
                for x in sorted(prof):
                    rows.append(_row(r.depth, "otoc", prof[x], site=x, **extra))
            else:
                rows.append(_row(r.depth, "expectation", r.expectation.real, **extra))
                if r.oee is not None:
                    rows.append(_row(r.depth, "max_oee", r.oee, **extra))
        fid = run.fidelity.summary()
        diag[f"round_seconds_D{D}"] = run.round_seconds()
    return rows, fid, diag


def _run_mps(cfg, lat, point):
    from hexmpo.circuits import CircuitSpec, circuit_program, default_layers, restrict_state_program
    from hexmpo.lattice import snake_order
    from hexmpo.pauli import PauliString
    from hexmpo.schrodinger import echo_state, expect_pauli_state, run_state_program, up_train

    obs = cfg.observable
    order = snake_order(lat)
    rows = []
    fid = None
    if obs["kind"] == "echo":
        tp = cfg.params.get("theta_prime", math.pi / 2)
        for D in cfg.depths:
            psi, flog = echo_state(lat, point["theta_h"], tp, D, point["chi"], theta_J=cfg.theta_J,
                                   observable=obs["site"])
            val = expect_pauli_state(psi, order, PauliString.single(lat.site_count, obs["site"], "Z"))
            rows.append(_row(D, "echo", val, site=obs["site"], F=flog.cumulative))
            fid = flog.summary()
        return rows, fid, {}
    P = _target(cfg, lat, max(cfg.depths))
    for D in sorted(cfg.depths):
        spec = CircuitSpec(cfg.theta_J, point["theta_h"], D, lat, cfg.variant, cfg.flux_bond)
        steps = restrict_state_program(circuit_program(spec, default_layers(spec, order)), P.support)
        psi, flog = run_state_program(up_train(lat.site_count), steps, order, point["chi"])
        rows.append(_row(D, "expectation", expect_pauli_state(psi, order, P), F=flog.cumulative,
                         max_bond=psi.max_bond))
        fid = flog.summary()
    return rows, fid, {}


def _run_exact(cfg, lat, point):
    from hexmpo.circuits import CircuitSpec
    from hexmpo.exact import StateVector, double_slit_table, echo_value, evolve, expect_pauli

    obs = cfg.observable
    rows = []
    if obs["kind"] == "double_slit":
        src = obs.get("site", lat.label("source"))
        tab = double_slit_table(lat, src, max(cfg.depths), point["flux"], cfg.flux_bond)
        for D in cfg.depths:
            for j in range(lat.site_count):
                rows.append(_row(D, "x_magnetization", tab[D, j], site=j, engine="exact"))
        return rows, None, {}
    if obs["kind"] == "echo":
        tp = cfg.params.get("theta_prime", math.pi / 2)
        for D in cfg.depths:
            rows.append(_row(D, "echo", echo_value(lat, tp, point["theta_h"], D, obs["site"], cfg.theta_J),
                             site=obs["site"]))
        return rows, None, {}
    for D in sorted(cfg.depths):
        spec = CircuitSpec(cfg.theta_J, point["theta_h"], D, lat, cfg.variant, cfg.flux_bond)
        psi = evolve(StateVector.up(lat.site_count), spec)
        rows.append(_row(D, "expectation", expect_pauli(psi, _target(cfg, lat, D))))
    return rows, None, {}


def _run_clifford(cfg, lat, point):
    from hexmpo.circuits import CircuitSpec
    from hexmpo.clifford import evolve_string, letter_counts

    rows = []
    for D in sorted(cfg.depths):
        spec = CircuitSpec(cfg.theta_J, point["theta_h"], D, lat, cfg.variant, cfg.flux_bond)
        P = _target(cfg, lat, D)
        Q = evolve_string(P, spec, heisenberg=True)
        counts = letter_counts(Q)
        rows.append(_row(D, "expectation", complex(Q.up_expectation()).real, weight=Q.weight,
                         X=counts["X"], Y=counts["Y"], Z=counts["Z"]))
    return rows, {"F_D": 1.0, "steps": 0}, {}


def _run_bptns(cfg, lat, point):
    from hexmpo.bptns import double_slit_bp_table, echo_value_bp
    from hexmpo.exact import double_slit_table

    obs = cfg.observable
    iters = int(cfg.params.get("iters", 15))
    rows = []
    if obs["kind"] == "double_slit":
        src = obs.get("site", lat.label("source"))
        Dm = max(cfg.depths)
        tables = {"bptns": double_slit_bp_table(lat, src, Dm, point["flux"], point["chi"], iters=iters,
                                                flux_bond=cfg.flux_bond)}
        if cfg.params.get("with_exact", True):
            tables["exact"] = double_slit_table(lat, src, Dm, point["flux"], cfg.flux_bond)
        for eng, tab in tables.items():
            for D in cfg.depths:
                for j in range(lat.site_count):
                    rows.append(_row(D, "x_magnetization", tab[D, j], site=j, engine=eng))
        return rows, None, {}
    if obs["kind"] == "echo":
        mode = cfg.params.get("mode", "echo")
        for D in cfg.depths:
            v = echo_value_bp(lat, point["theta_h"], D, point["chi"], obs["site"], mode=mode, iters=iters)
            rows.append(_row(D, "echo", v, site=obs["site"], mode=mode))
        return rows, None, {}
    from hexmpo.bptns import GraphTNS, bp_messages, evolve_tns, local_expectation, _program
    from hexmpo.pauli import PauliString

    for D in sorted(cfg.depths):
        tns, worst = evolve_tns(GraphTNS.up(lat), _program(lat, cfg.theta_J, point["theta_h"], D, cfg.flux_bond),
                                point["chi"], regauge_every=1, iters=iters)
        v = local_expectation(tns, bp_messages(tns, iters), PauliString.single(lat.site_count, obs["site"], "Z"))
        rows.append(_row(D, "expectation", v, site=obs["site"], max_bond=tns.max_bond))
    return rows, None, {}


_ENGINE_FN = {
    "heisenberg": _run_heisenberg,
    "mps": _run_mps,
    "exact": _run_exact,
    "clifford": _run_clifford,
    "bptns": _run_bptns,
}


def run_point(cfg: ExperimentConfig, point: dict[str, Any]) -> PointResult:
    """Execute one sweep point; engine errors are captured, not raised."""
    from hexmpo.lattice import geometry

    t0 = time.perf_counter()
    try:
        lat = geometry(cfg.geometry)
        rows, fid, diag = _ENGINE_FN[cfg.engine](cfg, lat, point)
        return PointResult(point, rows, fid, diag, time.perf_counter() - t0)
    except Exception as exc:  # recorded per point; the sweep continues
        return PointResult(point, [], None, {"traceback": traceback.format_exc()},
                           time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")


def _run_point_star(args):
    return run_point(*args)


@dataclass
class ResultRecord:
    config: ExperimentConfig
    points: list[PointResult]
    wall_seconds: float
    version: str = __version__
    extrapolation: list[dict[str, Any]] = field(default_factory=list)

    @property
    def failed(self) -> list[PointResult]:
        return [p for p in self.points if p.error is not None]

    def to_json(self) -> dict[str, Any]:
        return {
            "config_hash": self.config.hash(),
            "config": self.config.to_dict(),
            "version": self.version,
            "wall_seconds": self.wall_seconds,
            "points": [
                {
                    "point": p.point,
                    "values": p.rows,
                    "fidelity": p.fidelity,
                    "diagnostics": p.diagnostics,
                    "seconds": p.seconds,
                    "error": p.error,
                }
                for p in self.points
            ],
            "extrapolation": self.extrapolation,
        }

    def table(self) -> list[dict[str, Any]]:
        out = []
        for p in self.points:
            for r in p.rows:
                out.append({**p.point, **r})
        return out


def _extrapolate(record: ResultRecord) -> list[dict[str, Any]]:
    """Per ``(theta_h, depth)`` fidelity extrapolation over the chi axis."""
    import warnings

    from hexmpo.schrodinger import ExtrapolationError, extrapolate_fidelity

    groups: dict[tuple, list] = {}
    for p in record.points:
        for r in p.rows:
            if r["quantity"] == "expectation" and "F" in r:
                groups.setdefault((p.point["theta_h"], r["depth"]), []).append((r["F"], r["value"], p.point["chi"]))
    out = []
    for (th, D), pts in sorted(groups.items()):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fit = extrapolate_fidelity(pts)
        except ExtrapolationError as exc:
            out.append({"theta_h": th, "depth": D, "error": str(exc)})
            continue
        out.append({"theta_h": th, "depth": D, "extrapolated": fit.extrapolated, "slope": fit.a,
                    "intercept": fit.b, "residual": fit.residual, "quality": fit.quality})
    return out


def execute(cfg: ExperimentConfig, workers: int | None = None) -> ResultRecord:
    """Run every sweep point, in order, on a bounded process pool."""
    workers = cfg.workers if workers is None else workers
    points = sweep_points(cfg)
    t0 = time.perf_counter()
    if workers <= 1 or len(points) <= 1:
        results = [run_point(cfg, p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point_star, [(cfg, p) for p in points]))
    rec = ResultRecord(cfg, results, time.perf_counter() - t0)
    if cfg.params.get("extrapolate"):
        rec.extrapolation = _extrapolate(rec)
    return rec


def output_dir(cfg: ExperimentConfig, override: str | Path | None = None) -> Path:
    """Resolve the output directory; relative paths live under ``$HEXMPO_DATA_DIR``."""
    base = Path(os.environ.get(DATA_DIR_ENV, "results"))
    target = Path(override) if override is not None else Path(cfg.out or cfg.name)
    return target if target.is_absolute() else base / target


def write_record(record: ResultRecord, out: str | Path) -> tuple[Path, Path]:
    """Write ``<name>.json`` and ``<name>.csv`` into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    jpath = out / f"{record.config.name}.json"
    cpath = out / f"{record.config.name}.csv"
    jpath.write_text(json.dumps(record.to_json(), indent=2))
    rows = record.table()
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(cpath, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols or ["theta_h", "chi", "depth", "quantity", "site", "value"])
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return jpath, cpath


# ---------------------------------------------------------------------------
# presets

_GRID9 = [f"{k / 16}pi" for k in range(0, 9)]

PRESETS: dict[str, tuple[str, dict[str, Any]]] = {
    "fig3ab-weight10-depth5": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": _GRID9, "depths": [5],
        "chi": [16, 32], "observable": {"kind": "stabilizer", "site": "weight10_site"},
    }),
    "fig3ab-weight17-depth5": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": _GRID9, "depths": [5],
        "chi": [16, 32], "observable": {"kind": "stabilizer", "site": "weight17_site"},
    }),
    "fig3c-modified-weight17": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": _GRID9, "depths": [5],
        "chi": [16, 32], "observable": {"kind": "modified_stabilizer", "site": "weight17_site"},
    }),
    "z62-depth-sweep": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": [0.7], "depths": list(range(0, 8)),
        "chi": [16, 32, 64], "observable": {"kind": "z", "site": 62}, "params": {"extrapolate": True},
    }),
    "oee-growth-clifford-zz": ("hours", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": [0.7], "depths": list(range(0, 8)),
        "chi": [256], "observable": {"kind": "oee", "site": 62},
    }),
    "oee-growth-nonclifford-zz": ("hours", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_J": "-0.25pi", "theta_h": [0.7],
        "depths": list(range(0, 8)), "chi": [256], "observable": {"kind": "oee", "site": 62},
    }),
    "oee-growth-noncommuting": ("hours", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": [0.7], "depths": list(range(0, 6)),
        "chi": [256], "variant": "non_commuting", "observable": {"kind": "oee", "site": 62},
    }),
    "fig3c-otoc-deskscale": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": [0.7], "depths": list(range(1, 8)),
        "chi": [64], "observable": {"kind": "otoc", "site": 62},
    }),
    "fig6-otoc-profiles": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": [0.3, 0.7, 1.2],
        "depths": [3, 5, 7], "chi": [64], "observable": {"kind": "otoc", "site": 62},
    }),
    "fig4-stabilizer-echo": ("hours", {
        "engine": "bptns", "geometry": "twohex21", "theta_h": ["0.5pi", "0.49pi", "0.45pi"],
        "depths": list(range(1, 11)), "chi": [128],
        "observable": {"kind": "echo", "site": "detector"}, "params": {"iters": 15, "mode": "echo"},
    }),
    "fig4-stabilizer-echo-dense": ("minutes", {
        "engine": "exact", "geometry": "twohex21", "theta_h": ["0.5pi", "0.49pi", "0.45pi"],
        "depths": list(range(1, 11)), "observable": {"kind": "echo", "site": "detector"},
    }),
    "fig5-double-slit": ("minutes", {
        "engine": "bptns", "geometry": "twohex21", "theta_J": "-0.25pi", "theta_h": ["0.5pi"],
        "depths": list(range(0, 15)), "chi": [128],
        "observable": {"kind": "double_slit", "site": "source"},
        "params": {"flux": [0, "pi"], "iters": 15, "with_exact": True},
    }),
    "extrapolation-demo": ("minutes", {
        "engine": "heisenberg", "geometry": "eagle127", "theta_h": [0.7], "depths": [6, 7],
        "chi": [16, 24, 32, 48], "observable": {"kind": "z", "site": 62}, "params": {"extrapolate": True},
    }),
    "clifford-endpoints": ("seconds", {
        "engine": "clifford", "geometry": "eagle127", "theta_h": [0.0, "0.5pi"],
        "depths": list(range(0, 21)), "observable": {"kind": "z", "site": 62},
    }),
    "twohex-dense-oracle": ("seconds", {
        "engine": "exact", "geometry": "twohex21", "theta_h": [0.3, 0.7, 1.2], "depths": [1, 2, 3, 4],
        "observable": {"kind": "z", "site": "detector"},
    }),
}


def presets() -> list[tuple[str, str]]:
    """``(name, runtime class)`` for every preset."""
    return [(name, rc) for name, (rc, _) in PRESETS.items()]


def preset(name: str) -> ExperimentConfig:
    try:
        _, raw = PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}") from None
    raw = copy.deepcopy(raw)
    raw["name"] = name
    return ExperimentConfig.from_dict(raw)
