"""``hexmpo`` command-line interface.

Every engine subcommand builds an :class:`ExperimentConfig` and goes through the same
runner as ``hexmpo run``, so ad-hoc invocations produce the same JSON/CSV records.
Exit codes: 0 success, 1 config error, 2 partial sweep failure.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any

import click

from hexmpo import __version__
from hexmpo.runner import (
    ConfigError,
    ExperimentConfig,
    PRESETS,
    execute,
    load_config,
    output_dir,
    parse_angle,
    preset,
    presets,
    write_record,
)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


class AngleType(click.ParamType):
    name = "angle"

    def convert(self, value, param, ctx):
        try:
            return parse_angle(value, param.name if param else "angle")
        except ConfigError as exc:
            self.fail(str(exc), param, ctx)


ANGLE = AngleType()


def _csv_list(kind):
    def cb(ctx, param, value):
        if value is None:
            return None
        parts = [p for p in str(value).split(",") if p.strip()]
        try:
            return [kind(p.strip()) for p in parts]
        except (ValueError, ConfigError) as exc:
            raise click.BadParameter(str(exc)) from None

    return cb


def _angles(p: str) -> float:
    return parse_angle(p)


def _depths(text: str) -> list[int]:
    """``7`` means ``1..7``; ``3,5,7`` or ``2-7`` are explicit."""
    if "," in text:
        return [int(x) for x in text.split(",") if x.strip()]
    if "-" in text[1:]:
        a, b = text.split("-", 1)
        return list(range(int(a), int(b) + 1))
    return list(range(1, int(text) + 1))


def _depth_cb(with_zero: bool = False):
    def cb(ctx, param, value):
        try:
            d = _depths(str(value))
        except ValueError as exc:
            raise click.BadParameter(str(exc)) from None
        return ([0] if with_zero and 0 not in d else []) + d

    return cb


def _finish(cfg_raw: dict[str, Any], out: str | None, workers: int, quiet: bool = False) -> None:
    try:
        cfg = ExperimentConfig.from_dict(cfg_raw)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    _execute(cfg, out, workers, quiet)


def _execute(cfg: ExperimentConfig, out: str | None, workers: int | None, quiet: bool = False) -> None:
    rec = execute(cfg, workers)
    target = output_dir(cfg, out)
    jpath, cpath = write_record(rec, target)
    if not quiet:
        for p in rec.points:
            head = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in p.point.items())
            if p.error:
                click.echo(f"[{head}] FAILED: {p.error}")
                continue
            for r in p.rows[:200]:
                extra = f" site={r['site']}" if r.get("site") is not None else ""
                eng = f" {r['engine']}" if "engine" in r else ""
                click.echo(f"[{head}] D={r['depth']}{eng} {r['quantity']}{extra} = {r['value']:.10g}")
            if len(p.rows) > 200:
                click.echo(f"[{head}] ... {len(p.rows) - 200} more rows in {cpath}")
        for e in rec.extrapolation:
            click.echo(f"extrapolation: {e}")
    click.echo(f"wrote {jpath} and {cpath} ({rec.wall_seconds:.1f} s)")
    if rec.failed:
        click.echo(f"{len(rec.failed)} of {len(rec.points)} sweep points failed", err=True)
        sys.exit(EXIT_PARTIAL)


@click.group()
@click.version_option(__version__, prog_name="hexmpo")
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug).")
def main(verbose: int) -> None:
    """Kicked-Ising circuit simulators on heavy-hex lattices."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("config")
@click.option("--workers", type=int, default=None, help="Worker processes (default: config value).")
@click.option("--out", default=None, help="Output directory (default: config value or name).")
@click.option("--quiet", is_flag=True)
def run(config: str, workers: int | None, out: str | None, quiet: bool) -> None:
    """Run a TOML/JSON experiment config, or ``preset:<name>``."""
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    _execute(cfg, out, workers, quiet)


@main.command("presets")
@click.option("--show", default=None, help="Print one preset as resolved JSON.")
def presets_cmd(show: str | None) -> None:
    """List the named experiment presets with their desk runtime class."""
    if show:
        try:
            click.echo(json.dumps(preset(show).to_dict(), indent=2))
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        return
    for name, rc in presets():
        raw = PRESETS[name][1]
        click.echo(f"{name:30s} {rc:8s} engine={raw['engine']} geometry={raw['geometry']}")


# ---------------------------------------------------------------------------
# clifford


@main.group()
def clifford() -> None:
    """Stabilizer strings and lightcones at Clifford points."""


@clifford.command("stabilizer")
@click.option("--geometry", default="eagle127")
@click.option("--site", required=True)
@click.option("--depth", type=int, default=5)
@click.option("--modified", is_flag=True, help="Add the trailing R_X(pi/2) kick.")
def clifford_stabilizer(geometry: str, site: str, depth: int, modified: bool) -> None:
    """Print the depth-D stabilizer of Z_site, its weight and letter counts."""
    from hexmpo.clifford import letter_counts, modified_stabilizer, stabilizer
    from hexmpo.lattice import GeometryError, geometry as get_geometry

    try:
        lat = get_geometry(geometry)
        s = lat.label(site) if not site.isdigit() else int(site)
    except (GeometryError, KeyError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    P = modified_stabilizer(lat, s, depth) if modified else stabilizer(lat, s, depth)
    counts = letter_counts(P)
    click.echo(P.compact())
    click.echo(f"weight={P.weight} X={counts['X']} Y={counts['Y']} Z={counts['Z']}")


@clifford.command("lightcone")
@click.option("--geometry", default="eagle127")
@click.option("--site", type=int, required=True)
@click.option("--depth", type=int, required=True)
@click.option("--mode", type=click.Choice(["standard", "non_commuting"]), default="standard")
def clifford_lightcone(geometry: str, site: int, depth: int, mode: str) -> None:
    """Print the size and members of the past lightcone."""
    from hexmpo.lattice import geometry as get_geometry, lightcone

    cone = lightcone(get_geometry(geometry), site, depth, mode)
    click.echo(f"size={len(cone)}")
    click.echo(" ".join(map(str, sorted(cone))))


@clifford.command("run")
@click.option("--geometry", default="eagle127")
@click.option("--site", default="62")
@click.option("--theta-h", default="0,0.5pi", callback=_csv_list(_angles))
@click.option("--depth", "depths", default="20", callback=_depth_cb(True))
@click.option("--out", default=None)
def clifford_run(geometry, site, theta_h, depths, out) -> None:
    """<Z_site(D)> at Clifford points from string conjugation."""
    _finish({"name": "clifford", "engine": "clifford", "geometry": geometry, "theta_h": theta_h,
             "depths": depths, "observable": {"kind": "z", "site": _site(site)}}, out, 1)


def _site(text: str):
    return int(text) if str(text).lstrip("-").isdigit() else text


# ---------------------------------------------------------------------------
# exact


@main.group()
def exact() -> None:
    """Dense statevector oracle (<= 24 qubits)."""


@exact.command("run")
@click.option("--geometry", default="twohex21")
@click.option("--site", default="detector")
@click.option("--theta-j", type=ANGLE, default="-0.5pi")
@click.option("--theta-h", default="0.7", callback=_csv_list(_angles))
@click.option("--depth", "depths", default="4", callback=_depth_cb())
@click.option("--variant", default="standard")
@click.option("--out", default=None)
def exact_run(geometry, site, theta_j, theta_h, depths, variant, out) -> None:
    """<Z_site(D)> from the dense statevector."""
    _finish({"name": "exact", "engine": "exact", "geometry": geometry, "theta_J": theta_j,
             "theta_h": theta_h, "depths": depths, "variant": variant,
             "observable": {"kind": "z", "site": _site(site)}}, out, 1)


@exact.command("double-slit")
@click.option("--flux", default="0", callback=_csv_list(_angles))
@click.option("--depth", "d_max", type=int, default=14)
@click.option("--out", default=None)
def exact_double_slit(flux, d_max, out) -> None:
    """X magnetization table of the two-hexagon double slit."""
    _finish({"name": "double-slit-exact", "engine": "exact", "geometry": "twohex21",
             "theta_J": "-0.25pi", "theta_h": ["0.5pi"], "depths": list(range(0, d_max + 1)),
             "observable": {"kind": "double_slit", "site": "source"}, "params": {"flux": flux}},
            out, 1, quiet=True)


# ---------------------------------------------------------------------------
# heisenberg / mps


@main.group()
def heisenberg() -> None:
    """Heisenberg-picture operator tensor trains."""


@heisenberg.command("run")
@click.option("--geometry", default="eagle127")
@click.option("--site", default="62")
@click.option("--observable", "kind", type=click.Choice(["z", "stabilizer", "modified_stabilizer", "otoc", "oee"]),
              default="z")
@click.option("--pauli", default=None, help="Explicit Pauli string, e.g. 'X3 Y17'.")
@click.option("--theta-j", type=ANGLE, default="-0.5pi")
@click.option("--theta-h", default="0.7", callback=_csv_list(_angles))
@click.option("--depth", "depths", default="5", callback=_depth_cb())
@click.option("--chi", default="64", callback=_csv_list(int))
@click.option("--variant", default="standard")
@click.option("--extrapolate", is_flag=True, help="Fit value vs log(F) across the chi list.")
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
def heisenberg_run(geometry, site, kind, pauli, theta_j, theta_h, depths, chi, variant, extrapolate,
                   workers, out) -> None:
    """Evolve an observable and report per-depth values with fidelity diagnostics."""
    obs: dict[str, Any] = {"kind": kind, "site": _site(site)}
    if pauli:
        obs = {"kind": "pauli", "string": pauli}
    _finish({"name": "heisenberg", "engine": "heisenberg", "geometry": geometry, "theta_J": theta_j,
             "theta_h": theta_h, "depths": depths, "chi": chi, "variant": variant,
             "observable": obs, "params": {"extrapolate": extrapolate}, "workers": workers},
            out, workers)


@main.group()
def mps() -> None:
    """Schrödinger-picture matrix product states."""


@mps.command("run")
@click.option("--geometry", default="twohex21")
@click.option("--site", default="detector")
@click.option("--theta-j", type=ANGLE, default="-0.5pi")
@click.option("--theta-h", default="0.7", callback=_csv_list(_angles))
@click.option("--depth", "depths", default="4", callback=_depth_cb())
@click.option("--chi", default="256", callback=_csv_list(int))
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
def mps_run(geometry, site, theta_j, theta_h, depths, chi, workers, out) -> None:
    """<Z_site(D)> from lightcone-restricted MPS evolution."""
    _finish({"name": "mps", "engine": "mps", "geometry": geometry, "theta_J": theta_j,
             "theta_h": theta_h, "depths": depths, "chi": chi,
             "observable": {"kind": "z", "site": _site(site)}, "workers": workers}, out, workers)


@mps.command("echo")
@click.option("--geometry", default="twohex21")
@click.option("--site", default="detector")
@click.option("--theta", default="0.7", callback=_csv_list(_angles), help="Backward angle(s).")
@click.option("--theta-prime", type=ANGLE, default="0.5pi", help="Forward angle.")
@click.option("--depth", "depths", default="4", callback=_depth_cb())
@click.option("--chi", default="256", callback=_csv_list(int))
@click.option("--out", default=None)
def mps_echo(geometry, site, theta, theta_prime, depths, chi, out) -> None:
    """Echo observable Z_i(D | theta, theta') on U^dagger(theta)^D U(theta')^D |up>."""
    _finish({"name": "mps-echo", "engine": "mps", "geometry": geometry, "theta_h": theta,
             "depths": depths, "chi": chi, "observable": {"kind": "echo", "site": _site(site)},
             "params": {"theta_prime": theta_prime}}, out, 1)


# ---------------------------------------------------------------------------
# bptns


@main.group()
def bptns() -> None:
    """Belief-propagation tensor networks on the two-hexagon geometry."""


@bptns.command("echo")
@click.option("--theta", default="0.49pi", callback=_csv_list(_angles), help="Forward angle(s).")
@click.option("--depth", "depths", default="10", callback=_depth_cb())
@click.option("--chi", default="128", callback=_csv_list(int))
@click.option("--iters", type=int, default=15)
@click.option("--mode", type=click.Choice(["echo", "forward"]), default="echo")
@click.option("--site", default="detector")
@click.option("--out", default=None)
def bptns_echo(theta, depths, chi, iters, mode, site, out) -> None:
    """Stabilizer echo: forward at theta, backward at pi/2, measure Z_site."""
    _finish({"name": "bptns-echo", "engine": "bptns", "geometry": "twohex21", "theta_h": theta,
             "depths": depths, "chi": chi, "observable": {"kind": "echo", "site": _site(site)},
             "params": {"iters": iters, "mode": mode}}, out, 1)


@bptns.command("double-slit")
@click.option("--flux", default="0", callback=_csv_list(_angles))
@click.option("--depth", "d_max", type=int, default=14)
@click.option("--chi", type=int, default=128)
@click.option("--iters", type=int, default=15)
@click.option("--out", default=None, help="CSV table path; a JSON record is written alongside.")
def bptns_double_slit(flux, d_max, chi, iters, out) -> None:
    """Per-depth X magnetization on BP-TNS and the dense oracle."""
    target = None
    name = "double-slit"
    if out and out.endswith(".csv"):
        target = str(Path(out).parent)
        name = Path(out).stem
    elif out:
        target = out
    _finish({"name": name, "engine": "bptns", "geometry": "twohex21", "theta_J": "-0.25pi",
             "theta_h": ["0.5pi"], "depths": list(range(0, d_max + 1)), "chi": [chi],
             "observable": {"kind": "double_slit", "site": "source"},
             "params": {"flux": flux, "iters": iters}}, target, 1, quiet=True)


# ---------------------------------------------------------------------------
# extrapolate


@main.command()
@click.argument("table", type=click.Path(exists=True, dir_okay=False))
@click.option("--force", is_flag=True, help="Report a value even for non-monotonic data.")
@click.option("--f-column", default="F")
@click.option("--value-column", default="value")
@click.option("--chi-column", default="chi")
def extrapolate(table: str, force: bool, f_column: str, value_column: str, chi_column: str) -> None:
    """Fit value = a log(F) + b over the three largest-chi rows of a CSV table."""
    import warnings

    from hexmpo.schrodinger import ExtrapolationError, NonMonotonicWarning, extrapolate_fidelity

    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        pts = [(float(r[f_column]), float(r[value_column]), int(r[chi_column])) for r in rows]
    except (KeyError, ValueError) as exc:
        click.echo(f"config error: bad table: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            fit = extrapolate_fidelity(pts, force=force)
        except ExtrapolationError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
    for w in caught:
        if issubclass(w.category, NonMonotonicWarning):
            click.echo(f"warning: {w.message}", err=True)
    click.echo(json.dumps({"extrapolated": fit.extrapolated, "slope": fit.a, "intercept": fit.b,
                           "residual": fit.residual, "quality": fit.quality,
                           "points": fit.points}, indent=2))


if __name__ == "__main__":  # pragma: no cover
    main()
