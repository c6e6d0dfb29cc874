"""Command-line pipeline: config parsing, stage orchestration, report bundles.

Config grammar (flat, diff-friendly; see README for the EBNF):

    config   = { section } ;
    section  = "[" name "]" newline { entry } ;
    entry    = key "=" value newline ;

with sections [model], [analysis], [output].  Unknown keys are rejected.
A bundle directory holds the stage CSVs plus manifest.json with the config
hash, seed and library versions; identical configs produce byte-identical
bundles.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
The worker count is read from PERFDOM_WORKERS (stages themselves merge
per-realization results in seed order, so totals do not depend on it).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (
    Ball,
    BooleanBalls,
    DelaunayPipes,
    GeometryModel,
    PeriodicReference,
    Window,
    dump_geometry,
    generate,
    lattice_points_Xr,
)
from .regularity import adaptive_cover, write_boundary_csv
from .mesostructure import voronoi, write_cells_csv
from .connectivity import (
    build_graph,
    dump_graph,
    interior_cover,
    stretch_and_radius,
    write_stretch_csv,
)
from .extension import (
    ExtensionReport,
    scaling_experiment,
    write_extension_report_csv,
)
from .estimators import (
    cone_mixing_f,
    moment_conditions,
    write_mixing_csv,
    write_moments_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

STAGES = ("generate", "regularity", "mesh", "graph", "harmonic", "extend", "estimate")

# what each stage subcommand needs to have run first
_DEPS = {
    "generate": (),
    "regularity": ("generate",),
    "mesh": ("generate",),
    "graph": ("generate", "regularity", "mesh"),
    "harmonic": ("generate", "regularity", "mesh", "graph"),
    "extend": ("generate",),
    "estimate": ("generate",),
}

_KNOWN_KEYS = {
    "model": {
        "kind", "window", "margin", "seed", "n_realizations",
        "intensity", "ball_radius", "complement",
        "hardcore_gap", "smoothing_ball_radius", "pipe_radius_lo", "pipe_radius_hi",
        "cell_size", "hole_radius", "hole_center",
    },
    "analysis": {
        "stages", "r", "p", "r_exp", "s", "p0", "p1", "gamma", "beta",
        "h", "eps_list", "profile_spacing", "cover_k", "r_cap",
        "alpha", "R_grid", "meso_r",
    },
    "output": {"directory"},
}
_REQUIRED = {"model": ("kind", "window", "seed"), "output": ("directory",)}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: GeometryModel
    seed: int
    n_realizations: int
    stages: tuple
    outdir: Path
    lattice_r: float
    h: float | None
    eps_list: tuple
    exponents: dict
    profile_spacing: float
    cover_k: int
    r_cap: float
    alpha: float
    R_grid: tuple
    meso_r: float
    text: str = ""

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _floats(raw: str) -> list:
    return [float(v) for v in raw.replace(",", " ").split()]


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError with every problem found."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc

    problems = []
    for sec in cp.sections():
        if sec not in _KNOWN_KEYS:
            problems.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in _KNOWN_KEYS[sec]:
                problems.append(f"unknown key {key!r} in [{sec}]")
    for sec, keys in _REQUIRED.items():
        for key in keys:
            if not cp.has_option(sec, key):
                problems.append(f"missing required key {key!r} in [{sec}]")
    if problems:
        raise ConfigError("; ".join(problems))

    m = cp["model"]
    a = cp["analysis"] if cp.has_section("analysis") else {}
    try:
        win_vals = _floats(m["window"])
        if len(win_vals) % 2 or not win_vals:
            raise ConfigError("window needs an even number of coordinates (lo... hi...)")
        d = len(win_vals) // 2
        window = Window(tuple(win_vals[:d]), tuple(win_vals[d:]))

        kind_name = m["kind"].strip()
        if kind_name == "boolean":
            kind = BooleanBalls(
                float(m["intensity"]),
                float(m.get("ball_radius", 1.0)),
                m.get("complement", "false").strip().lower() in ("1", "true", "yes"),
            )
            default_margin = kind.ball_radius
        elif kind_name == "pipes":
            kind = DelaunayPipes(
                float(m["intensity"]),
                float(m["hardcore_gap"]),
                float(m["smoothing_ball_radius"]),
                (float(m.get("pipe_radius_lo", 0.2)), float(m.get("pipe_radius_hi", 0.9))),
            )
            default_margin = kind.smoothing_ball_radius
        elif kind_name == "periodic":
            center = _floats(m.get("hole_center", "0.5 0.5"))
            kind = PeriodicReference(
                (Ball(tuple(center), float(m.get("hole_radius", 0.25))),),
                float(m.get("cell_size", 1.0)),
            )
            default_margin = 0.0
        else:
            raise ConfigError(f"unknown model kind {kind_name!r} (boolean|pipes|periodic)")
        model = GeometryModel(kind, window, float(m.get("margin", default_margin)))
    except ConfigError:
        raise
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"model section: {exc}") from exc

    stages = tuple(s.strip() for s in a.get("stages", "generate").replace(",", " ").split())
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise ConfigError(f"unknown stages {bad}; choose from {STAGES}")

    exponents = {}
    for key in ("p", "r_exp", "s", "p0", "p1", "gamma", "beta"):
        if key in a:
            exponents[key] = float(a[key])
    _check_exponents(exponents)

    eps_list = tuple(_floats(a["eps_list"])) if "eps_list" in a else (1.0,)
    if any(e <= 0 for e in eps_list):
        raise ConfigError("eps_list entries must be positive")
    h = float(a["h"]) if "h" in a else None
    if h is not None and h <= 0:
        raise ConfigError("grid resolution h must be positive")
    lattice_r = float(a.get("r", 0.25))
    if lattice_r <= 0:
        raise ConfigError("lattice radius r must be positive")

    return ExperimentConfig(
        model=model,
        seed=int(m["seed"]),
        n_realizations=int(m.get("n_realizations", 1)),
        stages=stages,
        outdir=Path(cp["output"]["directory"]),
        lattice_r=lattice_r,
        h=h,
        eps_list=eps_list,
        exponents=exponents,
        profile_spacing=float(a.get("profile_spacing", 0.4)),
        cover_k=int(a.get("cover_k", 2)),
        r_cap=float(a.get("r_cap", 0.5)),
        alpha=float(a.get("alpha", np.pi / 6)),
        R_grid=tuple(_floats(a.get("R_grid", "1 2 3"))),
        meso_r=float(a.get("meso_r", lattice_r)),
        text=text,
    )


def _check_exponents(e: dict):
    """The orderings the analyses assume: 1 <= r < p0 < p, r < s < p, gamma < 1."""
    problems = []
    p = e.get("p")
    r = e.get("r_exp")
    if r is not None and r < 1:
        problems.append(f"r = {r} must be >= 1")
    if p is not None and r is not None and r >= p:
        problems.append(f"exponent ordering violated: r = {r} >= p = {p}")
    s = e.get("s")
    if s is not None and p is not None and not (s < p):
        problems.append(f"exponent ordering violated: s = {s} >= p = {p}")
    if s is not None and r is not None and not (r < s):
        problems.append(f"exponent ordering violated: r = {r} >= s = {s}")
    p0 = e.get("p0")
    if p0 is not None and p is not None and not (p0 < p):
        problems.append(f"exponent ordering violated: p0 = {p0} >= p = {p}")
    if p0 is not None and r is not None and not (r < p0):
        problems.append(f"exponent ordering violated: r = {r} >= p0 = {p0}")
    gamma = e.get("gamma")
    if gamma is not None and not (0 < gamma < 1):
        problems.append(f"gamma = {gamma} must lie in (0, 1)")
    beta = e.get("beta")
    if beta is not None and beta <= 0:
        problems.append(f"beta = {beta} must be positive")
    if problems:
        raise ConfigError("; ".join(problems))


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# stage execution


def _test_fields(d: int):
    def u_lin(x):
        return x.sum(axis=-1)

    def u_wave(x):
        return np.sin(x[..., 0]) * np.cos(x[..., 1]) if d > 1 else np.sin(x[..., 0])

    return [("linear", u_lin), ("wave", u_wave)]


def run_pipeline(config: ExperimentConfig) -> dict:
    """Execute the configured stages in order; returns the manifest dict.

    Stages share one realization chain (seed, seed+1, ...).  A stage failure
    is recorded in the manifest (partial bundle) and re-raised as
    RuntimeError after the manifest is written.
    """
    out = config.outdir
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": config.config_hash,
        "seed": config.seed,
        "versions": {
            "perfdom": __version__,
            "numpy": np.__version__,
        },
        "workers": int(os.environ.get("PERFDOM_WORKERS", "1")),
        "stages": {},
        "files": [],
    }
    (out / "config.ini").write_text(config.text)
    manifest["files"].append("config.ini")

    want = [s for s in STAGES if s in config.stages]
    cache: dict = {}

    def get_real():
        if "real" not in cache:
            cache["real"] = generate(config.model, config.seed)
        return cache["real"]

    def get_cover():
        if "cover" not in cache:
            cache["cover"] = adaptive_cover(
                get_real().domain, config.profile_spacing,
                K=config.cover_k, r_cap=config.r_cap,
            )
        return cache["cover"]

    def get_mesh():
        if "mesh" not in cache:
            sites = lattice_points_Xr(get_real().domain, config.lattice_r)
            if len(sites) == 0:
                raise RuntimeError("no lattice sites survive in the domain")
            cache["sites"] = sites
            cache["mesh"] = voronoi(
                sites, get_real().domain.window, min_separation=config.lattice_r
            )
        return cache["mesh"]

    def get_graph():
        if "graph" not in cache:
            get_mesh()
            interior = interior_cover(
                get_real().domain, get_cover(), cache["sites"], config.lattice_r
            )
            cache["graph"] = build_graph(get_real().domain, get_cover(), interior)
        return cache["graph"]

    error = None
    try:
        for stage in want:
            if stage == "generate":
                (out / "geometry.txt").write_text(dump_geometry(get_real().domain))
                manifest["files"].append("geometry.txt")
            elif stage == "regularity":
                write_boundary_csv(get_cover(), out / "boundary.csv")
                manifest["files"].append("boundary.csv")
            elif stage == "mesh":
                write_cells_csv(get_mesh(), config.lattice_r, out / "cells.csv")
                manifest["files"].append("cells.csv")
            elif stage == "graph":
                (out / "graph.txt").write_text(dump_graph(get_graph()))
                manifest["files"].append("graph.txt")
            elif stage == "harmonic":
                graph, mesh = get_graph(), get_mesh()
                results = [
                    stretch_and_radius(graph, mesh, j) for j in range(len(cache["sites"]))
                ]
                write_stretch_csv(results, out / "stretch.csv")
                manifest["files"].append("stretch.csv")
            elif stage == "extend":
                p = config.exponents.get("p", 2.0)
                r_exp = config.exponents.get("r_exp", 1.0)
                q = config.model.window
                side = min(np.subtract(q.hi, q.lo)) / 2
                Q = Window(tuple(-side / 2 for _ in q.lo), tuple(side / 2 for _ in q.lo))
                report = scaling_experiment(
                    config.model, config.eps_list, _test_fields(q.dim),
                    p, r_exp, Q, config.meso_r,
                    seed=config.seed, h=config.h,
                    cover_kwargs={"K": config.cover_k, "r_cap": config.r_cap},
                )
                write_extension_report_csv(report, out / "extension_report.csv")
                manifest["files"].append("extension_report.csv")
            elif stage == "estimate":
                mix = cone_mixing_f(
                    config.model, config.alpha, config.R_grid,
                    config.n_realizations, config.seed,
                )
                write_mixing_csv(mix, out / "mixing.csv")
                manifest["files"].append("mixing.csv")
                specs = []
                if "beta" in config.exponents:
                    specs.append(("M_tilde", config.exponents["beta"]))
                if "gamma" in config.exponents:
                    specs.append(("delta", -config.exponents["gamma"]))
                if specs:
                    moments = moment_conditions(
                        config.model, specs, config.n_realizations, config.seed,
                        profile_spacing=config.profile_spacing,
                        cover_kwargs={"K": config.cover_k, "r_cap": config.r_cap},
                    )
                    write_moments_csv(moments, out / "moments.csv")
                    manifest["files"].append("moments.csv")
            manifest["stages"][stage] = "ok"
    except Exception as exc:  # record the partial bundle before re-raising
        manifest["stages"][stage] = "failed"
        manifest["error"] = {"stage": stage, "message": str(exc)}
        error = exc

    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if error is not None:
        raise RuntimeError(f"stage {stage!r} failed: {error}") from error
    return manifest


# ---------------------------------------------------------------------------
# validate / describe


def validate_config(text: str) -> list:
    """Diagnostics for a config; empty list means valid."""
    try:
        parse_config(text)
    except ConfigError as exc:
        return [part.strip() for part in str(exc).split(";")]
    return []


_ASSUMPTION_HINTS = {
    "M_tilde": "finite Lipschitz moments (trace and local-extension conditions)",
    "delta": "inverse regularity-scale moments (trace condition)",
    "rho": "inverse extension-scale moments (trace condition)",
    "rho_hat": "inverse extension-scale moments (trace condition)",
    "eta": "inverse covering-scale moments (trace condition)",
}


def describe_bundle(bundle_dir) -> str:
    """Human summary of a bundle: stages, files, and flagged moment conditions."""
    bundle = Path(bundle_dir)
    manifest_path = bundle / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {bundle}")
    manifest = json.loads(manifest_path.read_text())
    lines = [
        f"bundle {bundle}",
        f"config hash {manifest['config_hash'][:16]}  seed {manifest['seed']}",
        "stages: " + ", ".join(
            f"{k}={v}" for k, v in manifest["stages"].items()
        ),
        "files: " + ", ".join(manifest["files"]),
    ]
    if "error" in manifest:
        lines.append(f"error in stage {manifest['error']['stage']}: "
                     f"{manifest['error']['message']}")
    moments = bundle / "moments.csv"
    if moments.exists():
        rows = moments.read_text().strip().splitlines()[2:]
        for row in rows:
            name, exponent, n, mean, se, tail, divergent = row.split(",")
            verdict = "DIVERGENT" if divergent == "1" else "finite"
            lines.append(
                f"moment {name}^{exponent}: mean {float(mean):.4g} "
                f"(n={n}, tail index {float(tail):.3g}) -> {verdict}"
            )
            if divergent == "1":
                hint = _ASSUMPTION_HINTS.get(name, "a moment condition")
                lines.append(f"  violates {hint}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfdom",
        description="random perforated domain pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run",):
        p = sub.add_parser(name, help=f"run the pipeline through the {name} stage"
                           if name != "run" else "run all configured stages")
        p.add_argument("config", help="experiment config file")
    p = sub.add_parser("validate", help="check a config without running anything")
    p.add_argument("config")
    p = sub.add_parser("describe", help="summarize a report bundle")
    p.add_argument("bundle")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "describe":
        try:
            print(describe_bundle(args.bundle))
        except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        return EXIT_OK

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "validate":
        problems = validate_config(text)
        if problems:
            for p in problems:
                print(f"invalid: {p}", file=sys.stderr)
            return EXIT_VALIDATION
        print("config ok")
        return EXIT_OK

    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command != "run":
        # stage subcommand: run just that stage and what it needs
        config.stages = _DEPS[args.command] + (args.command,)
    try:
        run_pipeline(config)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"bundle written to {config.outdir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
