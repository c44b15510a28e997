"""Command-line entry point.

Subcommands map to the harness suites: ``evolve``, ``verify``,
``sweep-kappa``, ``invert-r``, ``equicontinuity`` and ``gauge-check``.  Every
run reads a flat INI configuration, writes CSV/JSON (and plain two-column
plot data where applicable) with a provenance header, and exits 0 when all
checks pass, 1 when any check fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import __version__, harness
from . import flows as flw
from .harness import (ResultRow, all_passed, config_hash, make_grid,
                      parse_config, row_info, write_report_json, write_rows_csv,
                      write_xy)


class ConfigError(ValueError):
    pass


def _section(config: dict, name: str) -> dict:
    return config.get(name, {})


def _get(section: dict, key: str, cast, default):
    if key not in section:
        return default
    try:
        return cast(section[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {section[key]!r}") from exc


def _floats(text: str) -> tuple:
    return tuple(float(part) for part in text.replace(",", " ").split())


def _geometry(config: dict):
    grid = _section(config, "grid")
    kind = grid.get("kind", "circle")
    period = _get(grid, "period", float, 1.0)
    n_modes = _get(grid, "n_modes", int, 256)
    return make_grid(kind, period, n_modes)


def _initial_field(config: dict, geometry, seed: int):
    data = dict(_section(config, "data"))
    family = data.pop("family", "random-smooth")
    rng = np.random.default_rng(seed)
    return harness.make_initial_field(geometry, family, data, rng)


def _common_suite_kwargs(config: dict, args) -> dict:
    data = _section(config, "data")
    out = {}
    if "count" in data:
        out["count"] = int(data["count"])
    if "ball" in data:
        out["ball"] = float(data["ball"])
    out["seed"] = args.seed if args.seed is not None else _get(data, "seed", int, 2025)
    out["tol_scale"] = args.tol_scale
    return out


def _cmd_verify(config: dict, args) -> list:
    probes = _section(config, "verify")
    names = [s.strip() for s in probes.get("suites", "identities").split(",") if s.strip()]
    kwargs = _common_suite_kwargs(config, args)
    rows = []
    for name in names:
        if name == "identities":
            rows += harness.run_identity_suite(**kwargs)
        elif name == "crossval":
            rows += harness.run_crossval_suite(**kwargs)
        elif name == "variational":
            rows += harness.run_variational_suite(
                count=min(kwargs.get("count", 8), 8),
                seed=kwargs["seed"], tol_scale=kwargs["tol_scale"])
        elif name == "bracket":
            rows += harness.run_bracket_suite(**kwargs)
        elif name == "conservation":
            rows += harness.run_conservation_suite(
                seed=kwargs["seed"], tol_scale=kwargs["tol_scale"])
        else:
            raise ConfigError(f"unknown verify suite {name!r}")
    return rows


def _cmd_sweep(config: dict, args) -> list:
    sweep = _section(config, "sweep")
    targets = [s.strip() for s in sweep.get("targets",
               "expansion,remainders,difference-proxy").split(",") if s.strip()]
    rows = []
    for target in targets:
        if target == "expansion":
            rows += harness.run_expansion_sweep(tol_scale=args.tol_scale,
                                                jobs=args.jobs)
        elif target == "remainders":
            rows += harness.run_remainder_sweep(tol_scale=args.tol_scale)
        elif target == "difference-proxy":
            rows += harness.run_difference_proxy(tol_scale=args.tol_scale)
        elif target == "commuting":
            rows += harness.run_commuting_suite(tol_scale=args.tol_scale)
        else:
            raise ConfigError(f"unknown sweep target {target!r}")
    return rows


def _cmd_evolve(config: dict, args, out_dir: str, config_digest: str) -> list:
    flow = _section(config, "flow")
    geometry = _geometry(config)
    seed = args.seed if args.seed is not None else 0
    q0 = _initial_field(config, geometry, seed)
    probe = _floats(flow.get("probe_kappas", "")) if "probe_kappas" in flow else ()
    spec = flw.FlowSpec(
        hamiltonian=flow.get("hamiltonian", "mkdv"),
        mu=_get(flow, "mu", int, 1),
        dt=_get(flow, "dt", float, 1e-5),
        t_final=_get(flow, "t_final", float, 0.01),
        integrator=flow.get("integrator", "etd_rk4"),
        save_every=_get(flow, "save_every", int, 100),
        kappa=_get(flow, "kappa", float, None),
        probe_kappas=probe,
        lax_cutoff=_get(flow, "lax_cutoff", int, None),
    )
    trajectory = flw.evolve(q0, spec)
    rows = []
    base = trajectory.conserved_log[0]
    for key, start in base.items():
        worst = max(abs(e[key] - start) for e in trajectory.conserved_log)
        rows.append(row_info("evolve", f"{spec.hamiltonian}", f"drift[{key}]",
                             worst / (1.0 + abs(start))))
    for index, (t, state) in enumerate(zip(trajectory.times, trajectory.states)):
        path = os.path.join(out_dir, f"state_{index:04d}.dat")
        write_xy(path, geometry.nodes, state.samples, config,
                 {"config_hash": config_digest, "time": repr(t)})
    return rows


def _cmd_invert(config: dict, args) -> list:
    kwargs = _common_suite_kwargs(config, args)
    return harness.run_inversion_suite(**kwargs)


def _cmd_equicontinuity(config: dict, args) -> list:
    kwargs = _common_suite_kwargs(config, args)
    probes = _section(config, "probes")
    if "s" in probes:
        kwargs["s_assert"] = float(probes["s"])
    return harness.run_equicontinuity_suite(**kwargs)


def _cmd_gauge(config: dict, args) -> list:
    data = _section(config, "data")
    return harness.run_gauge_suite(
        seed=args.seed if args.seed is not None else _get(data, "seed", int, 51),
        tol_scale=args.tol_scale)


_COMMANDS = {
    "verify": _cmd_verify,
    "sweep-kappa": _cmd_sweep,
    "invert-r": _cmd_invert,
    "equicontinuity": _cmd_equicontinuity,
    "gauge-check": _cmd_gauge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkdvlab",
        description="verification experiments for the mKdV commuting-flows machinery")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("evolve", "verify", "sweep-kappa", "invert-r",
                 "equicontinuity", "gauge-check"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="INI configuration file")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--jobs", type=int, default=1)
        cmd.add_argument("--tol-scale", dest="tol_scale", type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config)
    except (FileNotFoundError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    digest = config_hash(config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "evolve":
            rows = _cmd_evolve(config, args, args.out, digest)
        else:
            rows = _COMMANDS[args.command](config, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for row in rows:
        row.config_hash = digest
    stem = args.command.replace("-", "_")
    extra = {"config_hash": digest, "seed": args.seed, "tol_scale": args.tol_scale}
    write_rows_csv(os.path.join(args.out, f"{stem}.csv"), rows, config, extra)
    write_report_json(os.path.join(args.out, f"{stem}.json"), rows, config, extra)
    for row in rows:
        status = "PASS" if row.passed else ("FAIL" if row.passed is not None else "info")
        print(f"[{status}] {row.experiment} {row.params} {row.metric} = {row.value:.6e}")
    return 0 if all_passed(rows) else 1


if __name__ == "__main__":
    sys.exit(main())
