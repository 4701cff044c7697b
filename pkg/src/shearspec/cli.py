"""Batch command-line front end.

Subcommands: sturm, rayleigh, os, catseye, shear3d, drift, sweep.  Each run
reads an optional flat key=value config file, applies command-line overrides
(flags win), dispatches to the owning module, and writes a JSON ResultRecord
plus CSV side files into the output directory.  Identical configurations are
served from a content-addressed cache keyed by the SHA-256 of the canonical
parameter serialization; set SHEARSPEC_CACHE_DIR to relocate it.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 no instability found where one was requested.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 3

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_NO_INSTABILITY = 4


class ConfigError(ValueError):
    pass


class NoInstabilityError(RuntimeError):
    pass


def fmt(x) -> str:
    """Round-trip float formatting (17 significant digits), deterministic."""
    if isinstance(x, complex):
        return f"{fmt(x.real)}{'+' if x.imag >= 0 else '-'}{fmt(abs(x.imag))}j"
    return format(float(x), ".17g")


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return fmt(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def config_hash(params: dict) -> str:
    blob = json.dumps({"schema_version": SCHEMA_VERSION,
                       **_canonical(params)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunConfig:
    command: str
    params: dict
    out_dir: Path
    cache: bool = True

    def subset_for_hash(self) -> dict:
        return {"command": self.command, "params": self.params}


@dataclass
class ResultRecord:
    schema_version: int
    input_hash: str
    created_at: str
    payload: dict
    provenance: dict
    side_files: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": self.schema_version,
            "input_hash": self.input_hash,
            "created_at": self.created_at,
            "payload": self.payload,
            "provenance": self.provenance,
            "side_files": self.side_files,
        }, indent=2, sort_keys=True)


def cache_dir() -> Path:
    return Path(os.environ.get("SHEARSPEC_CACHE_DIR",
                               Path.home() / ".cache" / "shearspec"))


def cache_lookup(key: str) -> ResultRecord | None:
    path = cache_dir() / f"{key}.json"
    if not path.exists():
        return None
    try:
        raw = json.loads(path.read_text())
        if raw.get("schema_version") != SCHEMA_VERSION:
            return None
        return ResultRecord(schema_version=raw["schema_version"],
                            input_hash=raw["input_hash"],
                            created_at=raw["created_at"],
                            payload=raw["payload"],
                            provenance=raw["provenance"],
                            side_files=raw.get("side_files", {}))
    except (json.JSONDecodeError, KeyError) as exc:
        print(f"warning: corrupted cache record {path}: {exc}", file=sys.stderr)
        return None


def cache_store(key: str, record: ResultRecord) -> None:
    d = cache_dir()
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{key}.json").write_text(record.to_json())


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, complex, np.floating))
                              else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _sorted_modes(cs):
    """Canonical eigenvalue ordering: Im descending, then Re ascending."""
    return sorted(cs, key=lambda c: (-c.imag, c.real))


def write_svg(path: Path, polylines, labels=(), width=640, height=360) -> None:
    """Bare-bones SVG: polylines plus text labels, no styling dependencies."""
    xs = np.concatenate([p[:, 0] for p in polylines]) if polylines else np.array([0, 1])
    ys = np.concatenate([p[:, 1] for p in polylines]) if polylines else np.array([0, 1])
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    sx = (width - 20) / max(x1 - x0, 1e-12)
    sy = (height - 20) / max(y1 - y0, 1e-12)

    def tx(p):
        return 10 + (p[:, 0] - x0) * sx, height - 10 - (p[:, 1] - y0) * sy

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">']
    for poly in polylines:
        px, py = tx(poly)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="black" '
                     f'stroke-width="1" points="{pts}"/>')
    for (x, y, text) in labels:
        px = 10 + (x - x0) * sx
        py = height - 10 - (y - y0) * sy
        parts.append(f'<text x="{px:.2f}" y="{py:.2f}" '
                     f'font-size="10">{text}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts))


# ---------------------------------------------------------------------------
# profile construction shared by all subcommands
# ---------------------------------------------------------------------------

def _profile_from_params(params):
    from .profiles import ShearProfile

    if params.get("coeffs"):
        return ShearProfile.sine_series([float(c) for c in
                                         str(params["coeffs"]).split(",")])
    a = float(params.get("A", 0.0))
    if a == 0.0:
        return ShearProfile.linear()
    return ShearProfile.oscillatory(int(params.get("n", 1)), a)


# ---------------------------------------------------------------------------
# subcommand runners: params dict -> (payload, provenance, side_files)
# ---------------------------------------------------------------------------

def run_sturm(params):
    from . import sturm
    from .profiles import amplitude_window

    p = _profile_from_params(params)
    modes = int(params.get("modes", 4))
    payload = {}
    if p.kind == "oscillatory":
        win = amplitude_window(p.A)
        payload["in_window"] = win.in_window
        payload["delta"] = fmt(win.delta)
        if not win.in_window:
            print(f"warning: A={p.A} outside the instability window "
                  "(0.039789, 0.079577); proceeding", file=sys.stderr)
    cert = sturm.certify_instability(p)
    payload["unstable"] = cert.unstable
    payload["witnesses"] = [[fmt(y), fmt(l)] for y, l in cert.witnesses]
    side = {}
    prov = {"grid": None, "refinement_delta": None}
    if cert.unstable:
        spec = sturm.solve_sl(cert.problem, k=modes)
        tf = sturm.plateau_test_function(p.n if p.kind == "oscillatory" else 1)
        payload["lambda"] = [fmt(v) for v in spec.eigenvalues]
        payload["alpha_n"] = fmt(cert.alpha_n)
        payload["quotient_testfn"] = fmt(sturm.rayleigh_quotient(cert.problem, tf))
        if p.kind == "oscillatory":
            try:
                payload["bound"] = fmt(sturm.lambda1_bound(p.n, p.delta))
            except ValueError:
                payload["bound"] = None
        rows = [[y] + list(spec.eigenfunctions[i]) for i, y in enumerate(spec.grid)]
        side["eigenfunctions.csv"] = _csv(
            rows, ["y"] + [f"phi{j+1}" for j in range(spec.eigenfunctions.shape[1])])
        prov = {"grid": len(spec.grid) - 1,
                "refinement_delta": [fmt(d) for d in spec.refinement_delta]}
    return payload, prov, side


def run_rayleigh(params):
    from . import rayleigh, sturm

    p = _profile_from_params(params)
    cert = sturm.certify_instability(p)
    if not cert.unstable:
        if params.get("branch"):
            raise NoInstabilityError("profile is not certified unstable")
        return {"unstable": False}, {}, {}
    payload = {"alpha_n": fmt(cert.alpha_n)}
    side = {}
    if params.get("branch"):
        br = rayleigh.continue_branch(p, cert,
                                      max_steps=int(params.get("max_steps", 60)))
        rows = []
        for a, c in br.samples:
            rows.append([a, c.real, c.imag, 0.0])
        side["branch.csv"] = _csv(rows, ["alpha", "Re_c", "Im_c", "residual"])
        payload["endpoints"] = [
            {"alpha_last": fmt(ep.alpha_last), "reason": ep.reason,
             "alpha_s": None if ep.alpha_s is None else fmt(ep.alpha_s)}
            for ep in br.endpoints]
        payload["max_growth_rate"] = fmt(br.max_growth_rate)
    elif params.get("alpha"):
        alpha = float(params["alpha"])
        mode = rayleigh.solve_rayleigh(p, alpha, complex(0.5, 1e-2))
        if mode is None:
            raise NoInstabilityError(f"no unstable mode at alpha={alpha}")
        payload["mode"] = {"alpha": fmt(alpha), "Re_c": fmt(mode.c.real),
                           "Im_c": fmt(mode.c.imag),
                           "residual": fmt(mode.residual)}
    prov = {"grid": rayleigh._default_grid(p)}
    return payload, prov, side


def run_os(params):
    from . import orrsommerfeld as osm
    from . import rayleigh, sturm

    p = _profile_from_params(params)
    if params.get("track"):
        schedule = [float(r) for r in str(params["track"]).split(",")]
        cert = sturm.certify_instability(p)
        if not cert.unstable:
            raise NoInstabilityError("tracking needs an unstable profile")
        alpha = float(params.get("alpha", 0.0)) or 0.55 * cert.alpha_n
        m = rayleigh.solve_rayleigh(p, alpha, complex(0.5, 1e-2))
        if m is None:
            raise NoInstabilityError(f"no inviscid mode at alpha={alpha}")
        track = osm.track_inviscid_limit(p, alpha, m.c, schedule)
        payload = {
            "alpha": fmt(alpha),
            "inviscid_target": [fmt(m.c.real), fmt(m.c.imag)],
            "schedule": [fmt(r) for r in track.schedule],
            "path": [[fmt(c.real), fmt(c.imag)] for c in track.path],
            "defects": [fmt(d) for d in track.defects],
            "unstable": list(track.unstable),
            "tail_slope": None if track.tail_slope() is None else fmt(track.tail_slope()),
            "truncated_at": track.truncated_at,
        }
        return payload, {"grid": "auto per R"}, {}

    alpha = float(params.get("alpha", 1.0))
    reynolds = float(params.get("R", 1e4))
    spec = osm.solve_os(osm.OSProblem(p, alpha, reynolds))
    cs = _sorted_modes([m.c for m in spec.modes])
    rows = [[c.real, c.imag, next(m.residual for m in spec.modes if m.c == c), 1]
            for c in cs]
    rows += [[c.real, c.imag, "", 0] for c in _sorted_modes(list(spec.discarded))]
    side = {"spectrum.csv": _csv(rows, ["Re_c", "Im_c", "residual", "retained"])}
    top = spec.most_unstable
    payload = {"alpha": fmt(alpha), "R": fmt(reynolds),
               "n_retained": len(spec.modes),
               "max_Im_c": None if top is None else fmt(top.c.imag),
               "max_Re_lambda": None if top is None else fmt(alpha * top.c.imag),
               "noise_floor": fmt(spec.noise_floor),
               "resolution_warning": spec.resolution_warning}
    prov = {"grid": spec.n_grid,
            "two_grid_deltas": [fmt(m.two_grid_delta) for m in spec.modes]}
    return payload, prov, side


def run_catseye(params):
    from . import catseye, sturm

    p = _profile_from_params(params)
    if p.kind != "oscillatory":
        raise ConfigError("catseye needs an oscillatory profile")
    beta = float(params.get("beta", 1e-3))
    cert = sturm.certify_instability(p)
    if not cert.unstable:
        raise NoInstabilityError("no neutral mode to bifurcate from")
    if params.get("newton"):
        wave = catseye.newton_branch(p, cert, beta)
    else:
        wave = catseye.leading_order_wave(p, cert, beta)
    cps = catseye.critical_points(wave)
    saddles = [cp for cp in cps if cp.classification == "saddle"]
    centers = [cp for cp in cps if cp.classification == "center"]
    levels = []
    if saddles:
        levels.append(wave.value(*saddles[0].location))
    if centers:
        cv = wave.value(*centers[0].location)
        levels += [cv + 0.25 * (levels[0] - cv) if levels else cv * 1.01]
    contours = catseye.streamlines(wave, levels) if levels else []

    side = {}
    rows = [[xi, y, wave.psi[i, j]] for i, xi in enumerate(wave.xi)
            for j, y in enumerate(wave.y)]
    side["field.csv"] = _csv(rows, ["xi", "y", "psi_rel"])
    crows = []
    for lev, polys in contours:
        for sid, poly in enumerate(polys):
            for xi, y in poly:
                crows.append([lev, sid, xi, y])
    side["contours.csv"] = _csv(crows, ["level", "segment_id", "xi", "y"])
    payload = {
        "beta": fmt(beta),
        "order": wave.order,
        "alpha_sq": fmt(wave.alpha_sq),
        "alpha_n_sq": fmt(cert.alpha_n ** 2),
        "critical_points": [
            {"xi": fmt(cp.location[0]), "y": fmt(cp.location[1]),
             "class": cp.classification, "hessian_det": fmt(cp.hessian_det)}
            for cp in cps],
    }
    prov = {"grid": [len(wave.xi) - 1, len(wave.y) - 1],
            "newton_residual": fmt(wave.newton_residual)}
    polys = [poly for _, ps in contours for poly in ps]
    labels = [(cp.location[0], cp.location[1], cp.classification[0].upper())
              for cp in cps]
    side["streamlines.svg"] = _svg_string(polys, labels)
    return payload, prov, side


def _svg_string(polys, labels):
    import io
    import tempfile

    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "plot.svg"
        write_svg(path, polys, labels)
        return path.read_text()


def run_shear3d(params):
    from . import rayleigh, shear3d, sturm

    p = _profile_from_params(params)
    cert = sturm.certify_instability(p)
    if not cert.unstable:
        raise NoInstabilityError("base profile is not unstable")
    grid = shear3d.StripGrid(ny=int(params.get("Ny", 96)),
                             nz=int(params.get("Nz", 12)),
                             lz=float(params.get("Lz", 1.0)))
    alpha0 = float(params.get("alpha0", 0.0)) or 0.55 * cert.alpha_n
    m2d = rayleigh.solve_rayleigh(p, alpha0, complex(0.5, 1e-2))
    if m2d is None:
        raise NoInstabilityError(f"no 2D unstable mode at alpha0={alpha0}")
    eps_list = [float(e) for e in str(params.get("eps", "0,1e-3,1e-2")).split(",")]
    gname = params.get("gshape", "default")
    if gname != "default":
        raise ConfigError(f"unknown perturbation shape {gname!r}")

    def gshape(yy, zz):
        return np.sin(np.pi * yy) * np.cos(2 * np.pi * zz / grid.lz)

    rows = shear3d.persistence_sweep(p, gshape, eps_list, alpha0, grid, m2d.c)
    table = []
    side = {}
    for row in rows:
        if row["lost"]:
            table.append([row["eps"], "", "", "lost", row["w14_size"]])
            continue
        table.append([row["eps"], row["c"].real, row["c"].imag,
                      row["defect"], row["w14_size"]])
        mode = row["mode"]
        snap = [[grid.y[i], grid.z[k], mode.u[i, k].real, mode.u[i, k].imag,
                 mode.v[i, k].real, mode.v[i, k].imag,
                 mode.w[i, k].real, mode.w[i, k].imag,
                 mode.P[i, k].real, mode.P[i, k].imag]
                for i in range(grid.ny + 1) for k in range(grid.nz)]
        side[f"mode_eps{fmt(row['eps'])}.csv"] = _csv(
            snap, ["y", "z", "Re_u", "Im_u", "Re_v", "Im_v",
                   "Re_w", "Im_w", "Re_P", "Im_P"])
    side["sweep.csv"] = _csv(table, ["eps", "Re_c", "Im_c", "defect", "w14_size"])
    payload = {"alpha0": fmt(alpha0),
               "c0_2d": [fmt(m2d.c.real), fmt(m2d.c.imag)],
               "rows": [{"eps": fmt(r["eps"]), "lost": r["lost"],
                         "defect": None if r["lost"] else fmt(r["defect"]),
                         "residuals": None if r["lost"] else
                         {k: fmt(v) for k, v in r["mode"].residuals.items()}}
                        for r in rows]}
    prov = {"grid": [grid.ny, grid.nz], "Lz": fmt(grid.lz)}
    return payload, prov, side


def run_drift(params):
    from .profiles import DriftParams, drift, eval_profile

    p = _profile_from_params(params)
    eps = float(params.get("epsilon", 1e-4))
    t = float(params.get("t", 1.0))
    moved = drift(p, DriftParams(epsilon=eps, t=t))
    ys = np.linspace(0, 1, 201)
    side = {"profile.csv": _csv(
        [[y, eval_profile(p, y), eval_profile(moved, y)] for y in ys],
        ["y", "U_before", "U_after"])}
    payload = {"epsilon": fmt(eps), "t": fmt(t), "kind": p.kind}
    if p.kind == "oscillatory":
        payload["A_before"] = fmt(p.A)
        payload["A_after"] = fmt(moved.A)
        payload["decay_exponent"] = fmt(eps * (4 * p.n * np.pi) ** 2 * t)
    return payload, {}, side


_RUNNERS = {
    "sturm": run_sturm,
    "rayleigh": run_rayleigh,
    "os": run_os,
    "catseye": run_catseye,
    "shear3d": run_shear3d,
    "drift": run_drift,
}


def _sweep_worker(args):
    command, params = args
    payload, prov, side = _RUNNERS[command](params)
    return params, payload


def run_sweep(params):
    command = params.get("command")
    if command not in _RUNNERS:
        raise ConfigError(f"sweep needs --command from {sorted(_RUNNERS)}")
    axes = params.get("_axes", {})
    if not axes:
        raise ConfigError("sweep needs at least one --param key=v1,v2,...")
    keys = sorted(axes)
    combos = [dict(zip(keys, vals)) for vals in product(*(axes[k] for k in keys))]
    fixed = {k: v for k, v in params.items()
             if k not in ("command", "_axes", "workers")}
    jobs = [(command, {**fixed, **combo}) for combo in combos]
    workers = int(params.get("workers", 0))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    payload = {"command": command,
               "points": [{"params": _canonical(pp), "payload": pl}
                          for pp, pl in results]}
    return payload, {"n_points": len(results)}, {}


# ---------------------------------------------------------------------------
# argument parsing, config files, dispatch
# ---------------------------------------------------------------------------

def _read_config(path: str) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _build_parser():
    ap = argparse.ArgumentParser(prog="shearspec",
                                 description=__doc__.split("\n")[0])
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--out", default="shearspec_out", help="output directory")
    ap.add_argument("--no-cache", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    common = {
        "--n": dict(type=int, default=1),
        "--A": dict(type=float, default=0.06),
        "--coeffs": dict(type=str, default=None),
    }

    def add(name, extra):
        sp = sub.add_parser(name)
        for flag, kw in {**common, **extra}.items():
            sp.add_argument(flag, **kw)
        return sp

    add("sturm", {"--modes": dict(type=int, default=4)})
    add("rayleigh", {"--branch": dict(action="store_true"),
                     "--alpha": dict(type=float, default=None),
                     "--max-steps": dict(type=int, default=60, dest="max_steps")})
    add("os", {"--alpha": dict(type=float, default=None),
               "--R": dict(type=float, default=1e4),
               "--track": dict(type=str, default=None)})
    add("catseye", {"--beta": dict(type=float, default=1e-3),
                    "--newton": dict(action="store_true")})
    add("shear3d", {"--gshape": dict(type=str, default="default"),
                    "--eps": dict(type=str, default="0,1e-3,1e-2"),
                    "--alpha0": dict(type=float, default=None),
                    "--Ny": dict(type=int, default=96),
                    "--Nz": dict(type=int, default=12),
                    "--Lz": dict(type=float, default=1.0)})
    add("drift", {"--epsilon": dict(type=float, default=1e-4),
                  "--t": dict(type=float, default=1.0)})
    swp = sub.add_parser("sweep")
    swp.add_argument("--command", required=True)
    swp.add_argument("--param", action="append", default=[],
                     help="axis key=v1,v2,... (repeatable)")
    swp.add_argument("--workers", type=int, default=0)
    for flag, kw in common.items():
        swp.add_argument(flag, **kw)
    return ap


def _params_from_args(args) -> dict:
    skip = {"command", "config", "out", "no_cache", "param"}
    params = {}
    if args.config:
        params.update(_read_config(args.config))
    for k, v in vars(args).items():
        if k in skip or v in (None, False):
            continue
        params[k] = v
    if getattr(args, "param", None):
        axes = {}
        for spec in args.param:
            if "=" not in spec:
                raise ConfigError(f"bad --param {spec!r}")
            k, vals = spec.split("=", 1)
            axes[k.strip()] = [v for v in vals.split(",") if v]
        params["_axes"] = axes
    return params


def run(command: str, config: RunConfig) -> tuple[ResultRecord, bool]:
    """Dispatch one subcommand; returns (record, from_cache)."""
    key = config_hash(config.subset_for_hash())
    if config.cache:
        hit = cache_lookup(key)
        if hit is not None:
            return hit, True
    runner = _RUNNERS.get(command, run_sweep if command == "sweep" else None)
    if runner is None:
        raise ConfigError(f"unknown subcommand {command!r}")
    payload, prov, side = runner(config.params)
    record = ResultRecord(schema_version=SCHEMA_VERSION, input_hash=key,
                          created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                                   time.gmtime()),
                          payload=payload, provenance=prov, side_files=side)
    if config.cache:
        cache_store(key, record)
    return record, False


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        params = _params_from_args(args)
        config = RunConfig(command=args.command, params=params,
                           out_dir=Path(args.out), cache=not args.no_cache)
        record, cached = run(args.command, config)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoInstabilityError as exc:
        print(f"no instability: {exc}", file=sys.stderr)
        return EXIT_NO_INSTABILITY
    except Exception as exc:  # solver-level failures
        from .sturm import ConvergenceError
        from .catseye import NewtonDivergenceError
        if isinstance(exc, (ConvergenceError, NewtonDivergenceError)):
            print(f"non-convergence: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGENCE
        raise

    config.out_dir.mkdir(parents=True, exist_ok=True)
    record_path = config.out_dir / f"{args.command}_{record.input_hash[:12]}.json"
    record_path.write_text(record.to_json())
    for name, text in record.side_files.items():
        (config.out_dir / name).write_text(text)
    print(f"{'cache hit' if cached else 'computed'}: {record_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
