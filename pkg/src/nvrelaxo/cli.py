"""``nv-relaxo`` command-line front end.

Exit codes: 0 success, 1 input error, 2 numerical non-convergence, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, apply_override, config_from_dict, load_config
from .ensemble import CurveFormatError, RatePopulation, T1Curve, add_measurement_noise, synthesize_curve
from .fitters import FAMILIES, FitError, fit
from .inference import (
    ensemble_grid,
    infer_c_surf_from_histogram,
    infer_label_spacing,
    infer_sa_density,
    infer_surface_density_from_curve,
    probability_map,
    sample_population_depths,
    sensitivity_compare,
)
from .parallel import default_workers
from .rng import substream

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_INTERNAL = 0, 1, 2, 3
MANIFEST_VERSION = 1
INFER_KINDS = ("surface", "c-surf", "label-spacing", "sa-density")

log = logging.getLogger("nv-relaxo")


class InputError(Exception):
    pass


class NonConvergence(Exception):
    pass


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


class Outputs:
    """Collects output files, writes them, and records their digests for the manifest."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.digests: dict[str, str] = {}

    def write(self, name: str, text: str):
        path = self.directory / name
        data = text.encode("utf-8")
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc.strerror}") from None
        self.digests[name] = hashlib.sha256(data).hexdigest()
        log.info("wrote %s", path)


def read_values(path) -> np.ndarray:
    """One number per line; an optional non-numeric first line is taken as a header."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    values = []
    for lineno, line in enumerate(lines, start=1):
        field = line.split(",")[0].strip()
        if not field:
            continue
        try:
            values.append(float(field))
        except ValueError:
            if lineno == 1:
                continue
            raise InputError(f"{path}: line {lineno}: not a number: {line!r}") from None
    if not values:
        raise InputError(f"{path}: no values")
    return np.array(values)


def _input_digest(path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


# -- commands --------------------------------------------------------------------

def cmd_simulate_background(cfg: RunConfig, args, out: Outputs, workers: int) -> int:
    ec = cfg.ensemble_config()
    depths = sample_population_depths(ec.n_nv, ec.depths, cfg.seed, workers)
    pop = RatePopulation(ec.surface.rate(depths))
    curve = synthesize_curve(pop, ensemble_grid(ec, pop.rates))
    if ec.noise_sd > 0:
        curve = add_measurement_noise(curve, ec.noise_sd, substream(cfg.seed, "curve-noise", 0))
    out.write("curve.csv", curve.to_csv())
    doc = pop.to_json()
    doc["c_surf"] = ec.surface.c_surf
    out.write("population.json", _dump_json(doc))
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args, out: Outputs, workers: int) -> int:
    try:
        curve = T1Curve.from_csv(Path(args.curve))
    except OSError as exc:
        raise InputError(f"cannot read {args.curve}: {exc.strerror}") from None
    result = fit(curve, args.family)
    text = _dump_json(result.to_json())
    out.write("fit.json", text)
    sys.stdout.write(text)
    if not result.converged:
        raise NonConvergence(f"{args.family} fit did not converge in {result.iterations} iterations")
    return EXIT_OK


def _scan_csv(result) -> str:
    rows = [f"value,{result.score_name}"]
    rows += [f"{v:.17g},{s:.17g}" for v, s in zip(result.scanned_values, result.scores)]
    return "\n".join(rows) + "\n"


def cmd_infer(cfg: RunConfig, args, out: Outputs, workers: int) -> int:
    kind = args.kind
    inf = cfg.infer
    if kind in ("surface", "c-surf", "sa-density") and not args.input:
        raise InputError(f"infer {kind} needs --input")
    if kind == "surface":
        ec = cfg.ensemble_config()
        try:
            target = T1Curve.from_csv(Path(args.input))
        except OSError as exc:
            raise InputError(f"cannot read {args.input}: {exc.strerror}") from None
        result = infer_surface_density_from_curve(
            target, ec.depths, ec.surface.tau_c_surf, ec.surface.gamma_bulk, cfg.grids.sigma_surf_scan,
            n_nv=inf.surface_n_nv, seed=cfg.seed, axis_tilt=ec.surface.axis_tilt,
            constants=ec.surface.constants, workers=workers)
    elif kind == "c-surf":
        sc = cfg.single_nv_config()
        result = infer_c_surf_from_histogram(read_values(args.input), inf.histogram_depth.build(),
                                             sc.surface.gamma_bulk,
                                             cfg.grids.c_surf_scan, inf.bin_space, inf.score)
    elif kind == "sa-density":
        result = infer_sa_density(read_values(args.input), cfg.grids.sa_scan, cfg.single_nv_config(),
                                  n_sim=inf.n_sim, seed=cfg.seed, cutoff=inf.sa_cutoff, workers=workers,
                                  score=inf.score)
    else:
        if inf.delta_gamma is None:
            raise InputError("infer label-spacing needs --delta-gamma (or infer.delta_gamma)")
        densities = np.asarray(cfg.grids.ub_spacings_nm) ** -2.0
        spacing = infer_label_spacing(inf.delta_gamma, inf.delta_gamma_sd, cfg.ensemble_config(), densities,
                                      inf.estimator, cfg.seed, workers)
        out.write("spacing.json", _dump_json(spacing.to_json()))
        rows = ["sigma_ub_nm2,delta_gamma"] + [f"{d:.17g},{s:.17g}" for d, s in zip(spacing.densities,
                                                                                     spacing.simulated)]
        out.write("spacing_response.csv", "\n".join(rows) + "\n")
        return EXIT_OK
    out.write("scan.json", _dump_json(result.to_json()))
    out.write("scan.csv", _scan_csv(result))
    return EXIT_OK


def cmd_probability_map(cfg: RunConfig, args, out: Outputs, workers: int) -> int:
    s, inf, g = cfg.single_nv, cfg.infer, cfg.grids
    pm = probability_map(s.sigma_sa, s.n_nv, cfg.single_nv_config(), g.map_gamma_bg_edges, g.map_delta_edges,
                         cfg.seed, inf.share_threshold, inf.contour_level, workers)
    out.write("map_density.txt", pm.to_matrix_text("density"))
    out.write("map_p_single.txt", pm.to_matrix_text("p_single"))
    out.write("map.json", _dump_json(pm.to_json()))
    out.write("contour.csv", pm.contour_csv())
    if pm.empty:
        log.warning("probability map is empty: no simulated NV has a complex in range")
    return EXIT_OK


def cmd_sensitivity(cfg: RunConfig, args, out: Outputs, workers: int) -> int:
    densities = np.asarray(cfg.grids.ub_spacings_nm) ** -2.0
    if args.include_zero:
        densities = np.concatenate([[0.0], densities])
    table = sensitivity_compare(densities, cfg.ensemble_config(), cfg.seed, workers)
    out.write("sensitivity.csv", table.to_csv())
    doc = table.to_json()
    out.write("sensitivity.json", _dump_json(doc))
    if not table.included.any():
        raise NonConvergence("no grid point produced converged fits")
    return EXIT_OK


COMMANDS = {
    "simulate-background": cmd_simulate_background,
    "fit": cmd_fit,
    "infer": cmd_infer,
    "probability-map": cmd_probability_map,
    "sensitivity": cmd_sensitivity,
}


# -- argument handling ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file or a previous run's manifest.json")
    common.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    common.add_argument("--workers", type=int,
                        help="worker processes (default: $NV_RELAXO_WORKERS or 1); never changes outputs")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config value, e.g. single_nv.sigma_sa=0.01 (repeatable)")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nv-relaxo", description="NV relaxometry simulation and inference")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate-background", parents=[common], help="ensemble background T1 curve")

    p = sub.add_parser("fit", parents=[common], help="fit a T1 curve CSV")
    p.add_argument("curve")
    p.add_argument("--family", choices=FAMILIES, default="biexp")

    p = sub.add_parser("infer", parents=[common], help="grid-scan inference")
    p.add_argument("kind", choices=INFER_KINDS)
    p.add_argument("--input", help="curve CSV (surface) or one-value-per-line file (c-surf, sa-density)")
    p.add_argument("--delta-gamma", type=float, help="measured mean rate change for label-spacing (s^-1)")
    p.add_argument("--sd", type=float, help="uncertainty of --delta-gamma (s^-1)")

    p = sub.add_parser("probability-map", parents=[common], help="(Gamma_BG, delta) map and p_single")
    p.add_argument("--sigma-sa", type=float, help="SA density (nm^-2)")

    p = sub.add_parser("sensitivity", parents=[common], help="estimator response to Ub planes")
    p.add_argument("--include-zero", action="store_true", help="prepend a zero-density row")
    return parser


def resolve_config(args) -> RunConfig:
    """defaults < config file < --set overrides < dedicated flags."""
    cfg = load_config(args.config) if args.config else RunConfig()
    for assignment in args.set:
        cfg = apply_override(cfg, assignment)
    flags = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if getattr(args, "delta_gamma", None) is not None:
        flags.setdefault("infer", {})["delta_gamma"] = args.delta_gamma
    if getattr(args, "sd", None) is not None:
        flags.setdefault("infer", {})["delta_gamma_sd"] = args.sd
    if getattr(args, "sigma_sa", None) is not None:
        flags["single_nv"] = {"sigma_sa": args.sigma_sa}
    if args.workers is not None:
        flags["workers"] = args.workers
    return config_from_dict(flags, cfg).validate()


def _arguments(args) -> dict:
    skip = {"config", "seed", "workers", "set", "out", "verbose", "command", "delta_gamma", "sd", "sigma_sa"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    out = Outputs(Path(args.out))
    try:
        cfg = resolve_config(args)
        workers = cfg.workers if cfg.workers is not None else default_workers()
        inputs = {}
        for name in ("curve", "input"):
            path = getattr(args, name, None)
            if path:
                inputs[name] = {"path": str(path), "sha256": _input_digest(path)}
        code = EXIT_OK
        try:
            code = COMMANDS[args.command](cfg, args, out, workers)
        except NonConvergence as exc:
            log.error("%s", exc)
            code = EXIT_NONCONVERGED
        manifest = {
            "manifest_version": MANIFEST_VERSION,
            "package_version": __version__,
            "command": args.command,
            "arguments": _arguments(args),
            "config": cfg.to_json(),
            "inputs": inputs,
            "outputs": dict(sorted(out.digests.items())),
            "exit_code": code,
        }
        out.write("manifest.json", _dump_json(manifest))
        return code
    except (InputError, ConfigError, CurveFormatError, FitError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_INTERNAL


def run():  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":
    run()
