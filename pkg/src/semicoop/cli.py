"""Command-line front end.

Subcommands map one-to-one onto the library layers; every command reads
JSON scenarios, writes binary grids or ensembles plus JSON summaries,
and prints a JSON result to stdout.  Exit codes: 0 on success, 2 on
validation failures, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, brane, evolution, geometry, market, stubbornness
from .errors import NumericalError, ValidationError
from .fieldio import read_grid, write_ensemble, write_grid
from .pipeline import export_ensemble_csv, run_pipeline
from .scenario import parse_scenario
from .polygon import assemble_polygon
from .profitops import CascadeParams, cascade_derivative, cascade_limit, cascade_sum
from .vectorfields import lie_bracket

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out-dir", default=".", help="artifact directory")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    return common


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="semicoop",
        description="curved-strategy differential game toolkit",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geometry", parents=[common], help="metric-derived fields")
    p.add_argument("--metric", required=True, help="metric grid file")
    p.add_argument("--op", required=True, choices=("christoffel", "curvature", "laplacian"))
    p.add_argument("--out", required=True)
    p.add_argument("--field", help="scalar field file (laplacian only)")

    p = sub.add_parser("polygon-area", parents=[common], help="strategy polygon area")
    p.add_argument("--scenario", required=True)
    p.add_argument("--time", type=float, default=0.0)
    p.add_argument("--nodes", type=int, default=32, help="quadrature nodes per axis")

    p = sub.add_parser("lie-bracket", parents=[common], help="field commutator at a point")
    p.add_argument("--scenario", required=True)
    p.add_argument("--point", required=True, help="comma-separated 3 coordinates")
    p.add_argument("--spacing", type=float)

    p = sub.add_parser("gff-sample", parents=[common], help="stubbornness field draw")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate-sde", parents=[common], help="share-dynamics ensemble")
    p.add_argument("--scenario", required=True)
    p.add_argument("--paths", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", action="store_true", help="also export CSV")

    p = sub.add_parser("cascade", parents=[common], help="resale cascade values")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--theta", type=int, required=True)
    p.add_argument("--m", type=int, default=1)

    p = sub.add_parser("action", parents=[common], help="world-volume action")
    p.add_argument("--config", required=True)
    p.add_argument("--ghost", action="store_true")
    p.add_argument("--fp-det", action="store_true")

    p = sub.add_parser("kernel-check", parents=[common], help="kernel diagnostics")
    p.add_argument("--config", required=True)

    p = sub.add_parser("evolve", parents=[common], help="strategy-field evolution")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("optimal-rho", parents=[common], help="cooperation-degree search")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", type=int, default=64)

    p = sub.add_parser("pipeline", parents=[common], help="full run with manifest")
    p.add_argument("--scenario", required=True)

    return parser


def _emit(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def _cmd_geometry(args):
    values, grid, _ = read_grid(args.metric)
    if grid is None:
        raise ValidationError(
            "metric file has no grid descriptor; extents are required"
        )
    metric = geometry.MetricField(values, grid)
    chris = geometry.christoffel(metric)
    if args.op == "christoffel":
        write_grid(args.out, chris.values, grid)
        _emit({"out": args.out, "max_abs": float(np.abs(chris.values).max())})
        return
    if args.op == "curvature":
        bundle = geometry.curvature(metric, chris)
        write_grid(args.out, bundle.scalar, grid)
        _emit(
            {
                "out": args.out,
                "scalar_range": [float(bundle.scalar.min()), float(bundle.scalar.max())],
            }
        )
        return
    if not args.field:
        raise ValidationError("laplacian needs --field")
    field, fgrid, _ = read_grid(args.field)
    lap = geometry.covariant_laplacian(metric, chris, field)
    write_grid(args.out, lap, grid)
    _emit({"out": args.out})


def _cmd_polygon(args):
    config = parse_scenario(args.scenario)
    areas, assembly = config.build_polygon(time=args.time, quadrature_nodes=args.nodes)
    _emit({"area": assemble_polygon(assembly), "per_side": areas})


def _cmd_bracket(args):
    config = parse_scenario(args.scenario)
    field_v, field_u, spacing = config.build_fields()
    point = [float(v) for v in args.point.split(",")]
    if len(point) != 3:
        raise ValidationError("--point needs 3 comma-separated coordinates")
    if args.spacing is not None:
        spacing = args.spacing
    bracket = lie_bracket(field_v, field_u, point, spacing)
    _emit({"bracket": [float(v) for v in bracket], "norm": float(np.linalg.norm(bracket))})


def _cmd_gff(args):
    field = stubbornness.sample_gff(args.size, args.seed)
    q = stubbornness.stubbornness_measure(args.gamma)
    write_grid(args.out, field, extra={"gamma": args.gamma, "seed": args.seed})
    _emit(
        {
            "out": args.out,
            "stubbornness_measure": q,
            "regime": stubbornness.regime_note(args.gamma),
        }
    )


def _cmd_sde(args):
    config = parse_scenario(args.scenario)
    grid = config.build_grid()
    metric = config.build_metric(grid)
    chris = geometry.christoffel(metric)
    coeffs = market.derive_coefficients(metric, chris)
    sde_cfg = config.data["sde"]
    firm = config.build_firms()[0]
    ensemble = market.simulate(
        coeffs,
        firm,
        horizon=float(sde_cfg["horizon"]),
        steps=args.steps or int(sde_cfg["steps"]),
        paths=args.paths or int(sde_cfg["paths"]),
        seed=args.seed,
        threads=args.threads,
    )
    write_ensemble(args.out, ensemble.times, ensemble.values, seed=args.seed)
    if args.csv or args.format == "csv":
        export_ensemble_csv(args.out + ".csv", ensemble)
    _emit({"out": args.out, "summary": ensemble.summary()})


def _cmd_cascade(args):
    params = CascadeParams(consumers=args.m, sales=args.theta, kappa=args.kappa)
    derivative = cascade_derivative(args.kappa)
    _emit(
        {
            "sum": cascade_sum(params),
            "limit": cascade_limit(args.kappa),
            "derivative": derivative.value,
            "divergence_flag": derivative.divergent,
            "expansion_regime": derivative.expansion_regime,
        }
    )


def _brane_setup(config):
    grid = config.build_grid()
    metric = config.build_metric(grid)
    chris = geometry.christoffel(metric)
    curv = geometry.curvature(metric, chris)
    kernel_cfg = config.data["kernel"]
    mesh = grid.meshgrid()
    emb = np.zeros(grid.shape + (brane.TRANSVERSE_DIM,))
    for k in range(3):
        emb[..., k] = mesh[k]
    gamma = float(config.data["gff"]["gamma"])
    cfg_brane = brane.BraneConfiguration(
        embedding=emb,
        world_metric=metric,
        background=np.eye(brane.BACKGROUND_DIM),
        freedom_exponent=float(kernel_cfg["freedom_exponent"]),
        mean_share=float(kernel_cfg["mean_share"]),
        stubbornness_measure=stubbornness.stubbornness_measure(gamma),
        ricci_scalar=curv.scalar,
        multiplier=float(kernel_cfg["multiplier"]),
    )
    return grid, metric, chris, curv, cfg_brane, mesh


def _cmd_action(args):
    config = parse_scenario(args.config)
    grid, metric, chris, curv, cfg_brane, mesh = _brane_setup(config)
    firm = config.build_firms()[0]
    profit, _ = config.build_profit()
    payload = {
        "action": brane.evaluate_action(
            cfg_brane, firm, profit, residuals=np.zeros(grid.shape)
        ),
        "ghost": None,
        "logdet_fp": None,
    }
    if args.ghost:
        e = np.zeros(grid.shape + (3, 3))
        e[...] = np.eye(3)
        c = np.stack(mesh, axis=-1)
        cfg_ghost = brane.BraneConfiguration(
            embedding=cfg_brane.embedding,
            world_metric=metric,
            background=np.eye(brane.BACKGROUND_DIM),
            ghost_e=e,
            ghost_c=c,
        )
        payload["ghost"] = brane.ghost_action(
            cfg_ghost, chris, float(config.data["kernel"]["step"])
        )
    if args.fp_det:
        fp = brane.fp_determinant(cfg_brane, chris)
        payload["logdet_fp"] = None if fp.singular else fp.log_abs_det
        payload["fp_singular"] = fp.singular
    _emit(payload)


def _kernel_spec(config, effective_scale=1.0):
    kernel_cfg = config.data["kernel"]
    return evolution.KernelSpec(
        mass=float(kernel_cfg["mass"]),
        step=float(kernel_cfg["step"]),
        effective_scale=effective_scale,
        domain_halfwidth=float(kernel_cfg["domain_halfwidth"]),
    )


def _cmd_kernel_check(args):
    config = parse_scenario(args.config)
    spec = _kernel_spec(config)
    kernel_cfg = config.data["kernel"]
    deviation = evolution.kernel_normalization_check(
        spec, int(kernel_cfg["normalization_samples"])
    )
    correlation = evolution.two_point_correlation(
        spec, int(kernel_cfg["correlation_samples"]), seed=args.seed
    )
    target = spec.covariance()
    _emit(
        {
            "normalization_deviation": deviation,
            "correlation_max_error": float(np.abs(correlation - target).max()),
            "normalization_constant": spec.normalization,
        }
    )


def _evolve_setup(config):
    grid = config.build_grid()
    metric = config.build_metric(grid)
    from .pipeline import _strategy_slice_metric

    slice_metric = _strategy_slice_metric(metric, grid)
    slice_chris = geometry.christoffel(slice_metric)
    evolve_cfg = config.data["evolve"]
    width = evolve_cfg.get("packet_width")
    if width is None:
        width = 0.15 * min(
            grid.extents[1][1] - grid.extents[1][0],
            grid.extents[2][1] - grid.extents[2][0],
        )
    psi = evolution.gaussian_packet(slice_metric.grid, float(width))
    return slice_metric, slice_chris, psi, evolve_cfg


def _cmd_evolve(args):
    config = parse_scenario(args.config)
    slice_metric, slice_chris, psi, evolve_cfg = _evolve_setup(config)
    spec = _kernel_spec(config)
    steps = args.steps or int(evolve_cfg["steps"])
    out = evolution.evolve(psi, spec, slice_metric, slice_chris, steps)
    write_grid(args.out, out.values, slice_metric.grid, extra={"time": out.time})
    _emit({"out": args.out, "norm": out.norm(), "time": out.time})


def _cmd_optimal_rho(args):
    config = parse_scenario(args.config)
    slice_metric, slice_chris, psi, _ = _evolve_setup(config)
    profit, rho_to_scale = config.build_profit()
    firm = config.build_firms()[0]
    kernel_cfg = config.data["kernel"]
    omega_exp = float(kernel_cfg["freedom_exponent"])
    area = firm.polygon_area if firm.polygon_area is not None else 1.0

    def spec_builder(rho):
        if rho_to_scale is not None:
            scale = rho_to_scale(rho)
        else:
            u_own = firm.alpha_own**rho * area
            pw = float(np.asarray(profit(np.zeros(1), firm.share, u_own, 0.0)).reshape(-1)[0])
            scale = (3.0 + 3.0 * (pw * firm.stubbornness) ** omega_exp) / brane.BACKGROUND_DIM
        return _kernel_spec(config, effective_scale=scale)

    search = evolution.optimal_rho(
        spec_builder, psi, slice_metric, slice_chris, grid=args.grid
    )
    _emit(
        {
            "rho_star": search.rho_star,
            "stationary_points": list(search.stationary_points),
            "boundary_flag": search.boundary_flag,
            "degenerate_flag": search.degenerate_flag,
        }
    )


def _cmd_pipeline(args):
    config = parse_scenario(args.scenario)
    manifest = run_pipeline(
        config,
        out_dir=args.out_dir,
        seed=args.seed,
        threads=args.threads,
        csv=args.format == "csv",
    )
    _emit(manifest)


_COMMANDS = {
    "geometry": _cmd_geometry,
    "polygon-area": _cmd_polygon,
    "lie-bracket": _cmd_bracket,
    "gff-sample": _cmd_gff,
    "simulate-sde": _cmd_sde,
    "cascade": _cmd_cascade,
    "action": _cmd_action,
    "kernel-check": _cmd_kernel_check,
    "evolve": _cmd_evolve,
    "optimal-rho": _cmd_optimal_rho,
    "pipeline": _cmd_pipeline,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
