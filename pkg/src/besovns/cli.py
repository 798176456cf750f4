"""
Command-line front end.

Subcommands: norm, heatflow, flow, solve, oracle-compare, selftest.  Exit
codes: 0 success, 1 validation error, 2 numerical failure.  Structured
output goes to files or stdout; the human log goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import io as bio
from .flows import (
    bilinear_trajectory,
    coeff_decay_check,
    heat_flow,
    paraproduct_trajectory,
    couple_trajectory,
    spectral_extent_traj,
)
from .grid_field import GridField, SpectralField, divergence, forward_transform
from .lorentz_spaces import (
    SpaceParams,
    besov_lorentz_norm,
    besov_lorentz_terms,
    besov_norm,
    microlocal_norm,
    triebel_lizorkin_lorentz_norm,
)
from .meyer_wavelet import analyze, system_for
from .ns_solver import SolverConfig, picard_solve, relative_l2_errors, rk4_reference, taylor_green_field, trajectory_l2
from .samples import random_divfree_field, random_wavelet_field

log = logging.getLogger("besovns")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


@dataclass
class RunManifest:
    """Provenance embedded in every structured output (wall-clock kept apart)."""

    command: str
    config: dict
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seed: Optional[int] = None
    version: str = field(default_factory=_version)
    wall_clock: float = 0.0

    def as_record(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "version": self.version,
        }


# ---------------------------------------------------------------- config


DEFAULTS = {
    "n": 2,
    "N": 32,
    "rings": (1, 4),
    "S": 8,
    "tol": 1e-10,
    "max_iter": 30,
    "p": 2.0,
    "q": 2.0,
    "r": math.inf,
    "s": None,
    "m": 1.25,
    "mprime": 0.25,
    "seed": 0,
    "datum": "taylor-green",
    "amplitude": 1.0,
    "k0": 4,
}

_INT = {"n", "N", "S", "max_iter", "seed", "k0"}
_FLOAT = {"tol", "p", "q", "r", "m", "mprime", "amplitude"}


def _coerce(key: str, value):
    if value is None:
        return None
    if key == "rings":
        if isinstance(value, str):
            parts = value.replace(",", " ").split()
        else:
            parts = list(value)
        if len(parts) != 2:
            raise ValueError("rings needs two integers: lo hi")
        return (int(parts[0]), int(parts[1]))
    if key in _INT:
        return int(value)
    if key in _FLOAT or key == "s":
        v = str(value).strip().lower()
        return math.inf if v in ("inf", "infinity") else float(v)
    return str(value)


def parse_config(path: Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides defaults."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(parse_config(Path(args.config)))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = _coerce(key, v)
    return cfg


def space_params(cfg: dict) -> SpaceParams:
    return SpaceParams(p=cfg["p"], q=cfg["q"], r=cfg["r"], s=cfg["s"], m=cfg["m"], mprime=cfg["mprime"])


def solver_config(cfg: dict) -> SolverConfig:
    lo, hi = cfg["rings"]
    return SolverConfig(
        n=cfg["n"], N=cfg["N"], ring_lo=lo, ring_hi=hi, S=cfg["S"],
        tol=cfg["tol"], max_iter=cfg["max_iter"], params=space_params(cfg),
    )


def _jsonable_config(cfg: dict) -> dict:
    out = {}
    for k, v in sorted(cfg.items()):
        if isinstance(v, tuple):
            v = list(v)
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        out[k] = v
    return out


# ---------------------------------------------------------------- output


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def emit_report(
    records: Iterable[dict],
    jsonl: Optional[Path],
    csv_path: Optional[Path] = None,
    columns: Optional[Sequence[str]] = None,
    header: Optional[dict] = None,
) -> None:
    """
    JSON lines (one record per line; stdout when ``jsonl`` is None) and an
    optional CSV projection onto ``columns``.  ``header`` is written as a
    leading ``# `` comment line of the CSV.
    """
    records = [_clean(r) for r in records]
    text = "".join(bio.dumps_json(r) + "\n" for r in records)
    try:
        if jsonl is None:
            sys.stdout.write(text)
        else:
            Path(jsonl).write_text(text)
        if csv_path is not None:
            cols = list(columns) if columns else sorted({k for r in records for k in r})
            buf = _io.StringIO()
            if header is not None:
                buf.write("# " + bio.dumps_json(_clean(header)) + "\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(cols)
            for r in records:
                w.writerow([_fmt(r.get(c)) for c in cols])
            Path(csv_path).write_text(buf.getvalue())
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}") from exc


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def _write_json(path: Optional[Path], obj: dict) -> None:
    emit_report([obj], path)


def _timing(manifest: RunManifest, out_dir: Optional[Path]) -> None:
    log.info("%s finished in %.3f s", manifest.command, manifest.wall_clock)
    if out_dir is not None:
        try:
            (out_dir / "timing.json").write_text(bio.dumps_json({"command": manifest.command, "wall_clock": manifest.wall_clock}) + "\n")
        except OSError as exc:
            raise UsageError(f"cannot write output: {exc}") from exc


# ---------------------------------------------------------------- data


def _load_field(path: Path) -> SpectralField:
    F = bio.read_field(path)
    return forward_transform(F) if isinstance(F, GridField) else F


def make_datum(cfg: dict) -> SpectralField:
    """Initial velocity from the ``datum`` key, scaled by ``amplitude``."""
    d = cfg["datum"]
    rng = np.random.default_rng(cfg["seed"])
    if d == "taylor-green":
        if cfg["n"] != 2:
            raise ValueError("taylor-green datum needs n = 2")
        F = taylor_green_field(cfg["N"])
    elif d == "random":
        F = random_divfree_field(cfg["n"], cfg["N"], rng, cfg["k0"], P=space_params(cfg))
    elif d.startswith("file:"):
        F = _load_field(Path(d[5:]))
        if (F.n, F.N) != (cfg["n"], cfg["N"]):
            raise ValueError(f"datum file grid (n={F.n}, N={F.N}) does not match config (n={cfg['n']}, N={cfg['N']})")
    else:
        raise ValueError(f"unknown datum {d!r}")
    return F.with_data(cfg["amplitude"] * F.data)


def field_norms(F: SpectralField, P: SpaceParams) -> dict:
    """Norms summed over components, plus per-band Besov-Lorentz terms."""
    W = system_for(F.n, F.N, F.kmax)
    out = {"besov": 0.0, "besov_lorentz": 0.0, "tll": 0.0}
    bands = None
    for a in range(F.c):
        c = analyze(F.component(a), W)
        out["besov"] += besov_norm(c, P)
        out["besov_lorentz"] += besov_lorentz_norm(c, P)
        out["tll"] += triebel_lizorkin_lorentz_norm(c, P)
        t = besov_lorentz_terms(c, P)
        bands = t if bands is None else bands + t
    out["per_band"] = [{"j": j, "besov_lorentz": float(v)} for j, v in enumerate(bands)]
    return out


# ---------------------------------------------------------------- commands


def cmd_norm(args, cfg, man: RunManifest) -> int:
    path = Path(args.inp)
    man.inputs.append(str(path))
    P = space_params(cfg)
    if path.suffix == ".json":
        T = bio.read_trajectory(path)
        rec = field_norms(T.field(0), P)
        rec["microlocal"] = microlocal_norm(T, P)
    else:
        rec = field_norms(_load_field(path), P)
        rec["microlocal"] = None
    rec["manifest"] = man.as_record()
    if not all(math.isfinite(rec[k]) for k in ("besov", "besov_lorentz", "tll")):
        raise NumericalFailure("non-finite norm")
    _write_json(Path(args.out) if args.out else None, rec)
    return EXIT_OK


def cmd_heatflow(args, cfg, man: RunManifest) -> int:
    out = Path(args.out)
    if args.inp:
        F = _load_field(Path(args.inp))
        man.inputs.append(args.inp)
    else:
        rng = np.random.default_rng(cfg["seed"])
        F = random_wavelet_field(cfg["n"], cfg["N"], rng, space_params(cfg))
    lo, hi = cfg["rings"]
    T = heat_flow(F, lo, hi, cfg["S"])
    out.mkdir(parents=True, exist_ok=True)
    mpath = bio.write_trajectory(out, "heat", T)
    man.outputs.append(str(mpath))
    P = space_params(cfg)
    comps = [coeff_decay_check(T.with_data(T.data[:, a : a + 1])) for a in range(T.c)]
    rec = {
        "microlocal": microlocal_norm(T, P),
        "decay": comps,
        "manifest": man.as_record(),
    }
    _write_json(out / "heatflow.json", rec)
    return EXIT_OK


FLOW_KINDS = {"paraproduct": paraproduct_trajectory, "couple": couple_trajectory}


def cmd_flow(args, cfg, man: RunManifest) -> int:
    out = Path(args.out)
    u = bio.read_trajectory(Path(args.u))
    v = bio.read_trajectory(Path(args.v))
    man.inputs += [args.u, args.v]
    P = space_params(cfg)
    axes = tuple(args.axes) if args.axes else ((1,) if args.kernel == "A1" else (1, 1, 1))
    if args.kind == "B":
        R = bilinear_trajectory(u, v)
        alt = bilinear_trajectory(u, v, interp="linear")
    else:
        fn = FLOW_KINDS[args.kind]
        R = fn(u, v, args.kernel, axes)
        alt = fn(u, v, args.kernel, axes, interp="linear")
    idx = np.nonzero(np.isclose(R.times, args.t, rtol=1e-12, atol=0))[0]
    if idx.size == 0:
        raise ValueError(f"t={args.t} is not a stored time; choose one of the manifest times")
    i = int(idx[0])
    out.mkdir(parents=True, exist_ok=True)
    bio.write_field(out / "flow.bnf1", R.field(i))
    man.outputs.append(str(out / "flow.bnf1"))
    mu, mv, mr = microlocal_norm(u, P), microlocal_norm(v, P), microlocal_norm(R, P)
    num = float(np.sqrt(np.sum(np.abs(R.data[i] - alt.data[i]) ** 2)))
    den = float(np.sqrt(np.sum(np.abs(R.data[i]) ** 2)))
    rec = {
        "kind": args.kind,
        "kernel": args.kernel if args.kind != "B" else None,
        "axes": list(axes) if args.kind != "B" else None,
        "t": float(R.times[i]),
        "micro_u": mu,
        "micro_v": mv,
        "micro_out": mr,
        "ratio": mr / (mu * mv) if mu * mv > 0 else None,
        "quadrature_residual": num / den if den > 0 else 0.0,
        "spectral_extent": spectral_extent_traj(R),
        "manifest": man.as_record(),
    }
    if args.kind == "B":
        rec["divergence"] = float(
            max(np.sqrt(np.sum(np.abs(divergence(R.field(k))) ** 2)) for k in range(len(R.times)))
        )
    if not math.isfinite(mr):
        raise NumericalFailure("non-finite flow norm")
    _write_json(out / "flow.json", rec)
    return EXIT_OK


def cmd_solve(args, cfg, man: RunManifest) -> int:
    out = Path(args.out)
    sc = solver_config(cfg)
    f = make_datum(cfg)
    u, rep = picard_solve(f, sc)
    out.mkdir(parents=True, exist_ok=True)
    mpath = bio.write_trajectory(out, "solution", u)
    man.outputs += [str(mpath), str(out / "iterations.jsonl")]
    records = [{"record": "manifest", **man.as_record()}]
    records += [{"record": "iterate", **r} for r in rep.records()]
    records.append({"record": "summary", **rep.summary()})
    emit_report(records, out / "iterations.jsonl")
    if not rep.converged:
        log.error("Picard iteration did not converge: %s", rep.status)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_oracle(args, cfg, man: RunManifest) -> int:
    out = Path(args.out)
    sc = solver_config(cfg)
    f = make_datum(cfg)
    u, rep = picard_solve(f, sc, track_micro=False)
    r = rk4_reference(f, sc)
    err = relative_l2_errors(u, r)
    lu, lr = trajectory_l2(u), trajectory_l2(r)
    rows = [
        {"t": float(t), "ring": int(j), "picard_l2": float(a), "rk4_l2": float(b), "rel_diff": float(e)}
        for t, j, a, b, e in zip(u.times, u.rings, lu, lr, err)
    ]
    out.mkdir(parents=True, exist_ok=True)
    man.outputs += [str(out / "oracle.csv"), str(out / "oracle.jsonl"), str(out / "oracle_rows.jsonl")]
    emit_report(
        [{"record": "manifest", **man.as_record()}, {"record": "summary", "max_rel_diff": float(np.max(err)), **rep.summary()}],
        out / "oracle.jsonl",
    )
    emit_report(rows, out / "oracle_rows.jsonl", out / "oracle.csv",
                ["t", "ring", "picard_l2", "rk4_l2", "rel_diff"], header=man.as_record())
    if not rep.converged:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_selftest(args, cfg, man: RunManifest) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    records = [{"record": "manifest", **man.as_record()}] + results
    emit_report(records, Path(args.out) if args.out else None)
    failed = [r["name"] for r in results if not r["passed"]]
    for name in failed:
        log.error("selftest check failed: %s", name)
    return EXIT_NUMERIC if failed else EXIT_OK


# ---------------------------------------------------------------- parser


def _add_space_flags(p: argparse.ArgumentParser) -> None:
    for key in ("p", "q", "r", "s", "m", "mprime"):
        p.add_argument(f"--{key}", default=None)


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", default=None)
    p.add_argument("--N", default=None)
    p.add_argument("--rings", nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--S", default=None)
    p.add_argument("--seed", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="besovns", description="Wavelet norms, flows and mild Navier-Stokes solutions on the torus.")
    ap.add_argument("--verbose", "-v", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("norm", help="Besov, Besov-Lorentz, TLL and microlocal norms")
    p.add_argument("--in", dest="inp", required=True, help="BNF1 field or trajectory manifest (.json)")
    p.add_argument("--out", default=None, help="JSON output (default stdout)")
    p.add_argument("--config", default=None)
    _add_space_flags(p)

    p = sub.add_parser("heatflow", help="heat-flow trajectory and coefficient decay fit")
    p.add_argument("--in", dest="inp", default=None, help="BNF1 datum (default: seeded random wavelet datum)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None)
    _add_grid_flags(p)
    _add_space_flags(p)

    p = sub.add_parser("flow", help="paraproduct, couple or B flow of two trajectories")
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--kind", choices=["paraproduct", "couple", "B"], required=True)
    p.add_argument("--kernel", choices=["A1", "A3"], default="A1")
    p.add_argument("--axes", type=int, nargs="+", default=None)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None)
    _add_space_flags(p)

    for name, helptext in (("solve", "Picard mild solution"), ("oracle-compare", "Picard against the RK4 oracle")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None)
        p.add_argument("--out", required=True, help="output directory")
        _add_grid_flags(p)
        _add_space_flags(p)
        p.add_argument("--tol", default=None)
        p.add_argument("--max_iter", "--max-iter", dest="max_iter", default=None)
        p.add_argument("--datum", default=None, help="taylor-green | random | file:PATH")
        p.add_argument("--amplitude", default=None)
        p.add_argument("--k0", default=None)

    p = sub.add_parser("selftest", help="quick invariant checks")
    p.add_argument("--out", default=None)
    return ap


COMMANDS = {
    "norm": cmd_norm,
    "heatflow": cmd_heatflow,
    "flow": cmd_flow,
    "solve": cmd_solve,
    "oracle-compare": cmd_oracle,
    "selftest": cmd_selftest,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"besovns: {exc}")
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s")
    start = time.perf_counter()
    try:
        cfg = resolve(args)
        man = RunManifest(args.command, _jsonable_config(cfg), seed=cfg["seed"])
        code = COMMANDS[args.command](args, cfg, man)
    except (UsageError, ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"besovns: error: {exc}\n")
        return EXIT_INVALID
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"besovns: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        sys.stderr.write(f"besovns: error: {exc}\n")
        return EXIT_INVALID
    man.wall_clock = time.perf_counter() - start
    out = getattr(args, "out", None)
    out_dir = Path(out) if out and Path(out).is_dir() else None
    _timing(man, out_dir)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
