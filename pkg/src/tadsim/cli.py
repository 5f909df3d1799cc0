"""Command-line entry point: runs, paired comparisons, regression suite.

Exit codes: 0 success, 1 validation or check failure, 2 numerical failure
(finite escape, or the gain iteration cap under --strict).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import os
import sys
from importlib import resources

import numpy as np

from .consistency import IterationLimit, OptimizerSettings
from .model import ConfigError, PlayerId, build_matrices
from .riccati import FiniteEscape, TimeGrid, solve_nzs, solve_zs
from .simulator import (
    config_from_dict,
    config_to_dict,
    run,
    run_paired_delay,
    run_suicidal_check,
    write_csv,
    write_sidecar,
)

__all__ = ["main", "load_config"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; reroute to the validation
    # exit code instead.
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- config loading ---------------------------------------------------------


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} must look like dotted.key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings such as interaction=I2
    return key.strip(), value


def _apply_override(doc: dict, key: str, value) -> None:
    parts = key.split(".")
    node = doc
    for depth, part in enumerate(parts):
        path = ".".join(parts[: depth + 1])
        last = depth == len(parts) - 1
        if isinstance(node, dict):
            if part not in node:
                raise ConfigError(f"override {path}: unknown key {part!r}")
            if last:
                node[part] = value
            else:
                node = node[part]
        elif isinstance(node, list):
            try:
                idx = int(part)
            except ValueError:
                raise ConfigError(f"override {path}: {part!r} is not a list index") from None
            if not 0 <= idx < len(node):
                raise ConfigError(f"override {path}: index out of range (length {len(node)})")
            if last:
                node[idx] = value
            else:
                node = node[idx]
        else:
            raise ConfigError(f"override {path}: {'.'.join(parts[:depth])} is not a container")


def load_config(path, overrides=()):
    """Read a scenario document, fill defaults, then apply dotted overrides.

    Overrides address the normalized document, so defaulted groups (weights,
    control_penalties, ...) are always present as targets.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    doc = config_to_dict(config_from_dict(doc))
    for text in overrides:
        key, value = _parse_override(text)
        _apply_override(doc, key, value)
    return config_from_dict(doc)


# --- subcommands ------------------------------------------------------------


def _term_line(term) -> str:
    who = f" by d{term.defender}" if term.defender else ""
    return f"{term.kind}{who} at t={term.time:g} (distance {term.distance:.4g})"


def _render_figures(outdir: str, csv_path: str, json_path: str) -> None:
    try:
        from tadplots import plot
    except ImportError as exc:
        raise ConfigError("--figures needs the tadplots package installed") from exc
    for kind in ("trajectories", "controls", "network-timeline"):
        out = os.path.join(outdir, kind.replace("-", "_") + ".png")
        plot({"kind": kind, "trajectory": csv_path, "events": json_path, "out": out})
        print(f"wrote {out}")


def _cmd_run(args) -> int:
    cfg = load_config(args.config, args.override)
    log = run(cfg, args.profile, strict=args.strict)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "trajectory.csv")
    json_path = os.path.join(args.out, "events.json")
    write_csv(log, csv_path)
    write_sidecar(log, json_path)
    print(_term_line(log.termination))
    print(f"wrote {csv_path} and {json_path}")
    if args.figures:
        _render_figures(args.out, csv_path, json_path)
    return 0


def _print_delay(rep) -> None:
    t1, t2 = rep.t_first_edge
    div = "none" if rep.first_divergence is None else f"{rep.first_divergence:g}"
    verdict = "ok" if rep.identical_before_min else "VIOLATION"

    def z(v):
        return "unlimited" if v is None else f"{v:g}"

    print(
        f"paired {rep.player.label}: zeta {z(rep.zeta_base)} vs {z(rep.zeta_alt)}; "
        f"first edge t1={t1:g} t2={t2:g}; first divergence {div}; "
        f"identical before min(t1,t2): {verdict}"
    )


def _cmd_paired(args) -> int:
    cfg = load_config(args.config, args.override)
    player = PlayerId.parse(args.player)
    if args.zeta is None and not args.randomize:
        raise UsageError("paired: needs --zeta or --randomize")
    ok = True
    if args.zeta is not None:
        rep = run_paired_delay(cfg, player, args.zeta)
        _print_delay(rep)
        ok &= rep.identical_before_min
    if args.randomize:
        base = cfg.zeta_d[player.index - 1] if player.kind == "d" else cfg.zeta_tau
        if base is None:
            raise ConfigError("cannot randomize an unlimited observation radius")
        rng = np.random.default_rng(args.seed)
        for _ in range(args.randomize):
            rep = run_paired_delay(cfg, player, float(base * rng.uniform(0.25, 2.0)))
            _print_delay(rep)
            ok &= rep.identical_before_min
    return 0 if ok else 1


def _cmd_suicidal(args) -> int:
    cfg = load_config(args.config, args.override)
    rep = run_suicidal_check(cfg)
    for label, log in (("complete", rep.complete), ("limited", rep.limited)):
        print(f"{label}: {_term_line(log.termination)}")
    print(f"max |cross| = {rep.max_cross:.3e} (bound {rep.cross_bound:.3e})")
    print(f"max attacker/target cross-mode deviation = {rep.max_mode_deviation:.3e}")
    ok = rep.straight_line_ok and rep.modes_agree
    print("straight-line check:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def _scenario_doc(name: str) -> dict:
    return json.loads(resources.files("tadsim").joinpath("scenarios", name).read_text())


def _run_row(row: dict, out_dir: str | None) -> dict:
    cfg = config_from_dict(_scenario_doc(row["config"]))
    log = run(cfg, row["profile"])
    if out_dir:
        stem = row["name"].replace("-", "_")
        write_csv(log, os.path.join(out_dir, stem + ".csv"))
        write_sidecar(log, os.path.join(out_dir, stem + ".json"))
    term = log.termination
    return {"kind": term.kind, "defender": term.defender, "time": term.time}


def _thread_cap(n_tasks: int) -> int:
    raw = os.environ.get("TADSIM_THREADS", "")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"TADSIM_THREADS={raw!r} is not an integer") from None
        if cap < 1:
            raise ConfigError("TADSIM_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _cmd_regress(args) -> int:
    manifest = json.loads(
        resources.files("tadsim").joinpath("scenarios", "expected.json").read_text()
    )
    rows = manifest["rows"]
    if args.only:
        rows = [r for r in rows if args.only in r["name"] or args.only in r["config"]]
        if not rows:
            raise ConfigError(f"--only {args.only!r} matches no manifest row")
    if args.out:
        os.makedirs(args.out, exist_ok=True)

    workers = _thread_cap(len(rows))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_row, rows, [args.out] * len(rows)))
    else:
        results = [_run_row(row, args.out) for row in rows]

    all_ok = True
    print(f"{'scenario':<22} {'expected':<28} {'actual':<28} verdict")
    for row, res in zip(rows, results):
        exp = row["expected"]
        ok = (
            res["kind"] == exp["kind"]
            and res["defender"] == exp["defender"]
            and abs(res["time"] - exp["time"]) <= exp["tolerance"]
        )
        all_ok &= ok

        def fmt(kind, defender, time):
            who = f" d{defender}" if defender else ""
            return f"{kind}{who} @ {time:g}"

        print(
            f"{row['name']:<22} {fmt(exp['kind'], exp['defender'], exp['time']):<28} "
            f"{fmt(res['kind'], res['defender'], res['time']):<28} "
            f"{'ok' if ok else 'MISMATCH'}"
        )
    print(f"note: {manifest['caveat']}")
    return 0 if all_ok else 1


def _cmd_dump_riccati(args) -> int:
    cfg = load_config(args.config, args.override)
    mats = build_matrices(cfg)
    grid = TimeGrid.for_config(cfg)
    if cfg.interaction == "I1":
        sol = solve_nzs(mats, grid)
        blocks = (("Pd", sol.P_d), ("Ptau", sol.P_tau), ("Pa", sol.P_a))
    else:
        sol = solve_zs(mats, grid)
        blocks = (("P", sol.P),)
    parent = os.path.dirname(args.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    dim = cfg.dim
    header = ["t"] + [
        f"{name}_{i}_{j}" for name, _ in blocks for i in range(dim) for j in range(dim)
    ]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(grid.n_nodes):
            row = [repr(float(grid.times[k]))]
            for _, arr in blocks:
                row += [repr(float(v)) for v in arr[k].reshape(-1)]
            writer.writerow(row)
    print(f"wrote {args.out} ({grid.n_nodes} nodes)")
    return 0


# --- parser -----------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="tadsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="scenario JSON path")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-key config override, repeatable (e.g. lambda=0)",
        )
        return p

    p = with_config(sub.add_parser("run", help="simulate a scenario and write artifacts"))
    p.add_argument("--profile", default="limited", help="complete or limited (default)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--strict", action="store_true", help="fail on the gain iteration cap")
    p.add_argument("--figures", action="store_true", help="also render figures (needs tadplots)")
    p.set_defaults(handler=_cmd_run)

    p = with_config(sub.add_parser("paired", help="compare two runs across one radius"))
    p.add_argument("--player", required=True, help="varied player, e.g. d3 or tau")
    p.add_argument("--zeta", type=float, help="alternative observation radius")
    p.add_argument("--randomize", type=int, default=0, metavar="N", help="N random alternatives")
    p.add_argument("--seed", type=int, default=0, help="seed for --randomize")
    p.set_defaults(handler=_cmd_paired)

    p = with_config(sub.add_parser("suicidal-check", help="straight-line checks for lambda=0"))
    p.set_defaults(handler=_cmd_suicidal)

    p = sub.add_parser("regress", help="run the shipped scenarios against expectations")
    p.add_argument("--suite", default="vi", choices=["vi"], help="scenario suite")
    p.add_argument("--only", help="substring filter on scenario names")
    p.add_argument("--out", help="directory for per-scenario artifacts")
    p.set_defaults(handler=_cmd_regress)

    p = with_config(sub.add_parser("dump-riccati", help="write the solution matrices as CSV"))
    p.add_argument("--out", default="riccati.csv", help="output CSV path")
    p.set_defaults(handler=_cmd_dump_riccati)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FiniteEscape as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except IterationLimit as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
