"""Scenario runner.

Reads a sectioned key-value config (a TOML-compatible subset), builds a
built-in model, integrates, writes the trajectory with diagnostics, and
prints a verification report.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 integration failure (partial output is still written).

CSV schema (stable):
    t,xi_0..xi_{n-1},mu_0..mu_{n-1},a_0..a_{m-1},energy,res_constraint,res_dirac,res_advection
with every field in fixed scientific notation with 17 significant digits, so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
import time

import numpy as np

from . import dynamics, models
from .constraints import RankDrop, SingularContact
from .dynamics import NewtonDiverged, NotHyperregular

__version__ = "1.0.0"

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3

FIELD_FMT = "%.16e"  # 17 significant digits


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------- config

def _parse_value(text, path, lineno):
    text = text.strip()
    if not text:
        raise ConfigError(f"{path}:{lineno}: empty value")
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"{path}:{lineno}: unterminated array")
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(p, path, lineno) for p in inner.split(",")]
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        if any(c in text for c in ".eE") or text in ("inf", "-inf", "nan"):
            return float(text)
        return int(text)
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: cannot parse value {text!r}")


def _strip_comment(line):
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)


def parse_config_text(text, path="<config>"):
    """Sections of key = value pairs; values are strings, numbers, booleans,
    or flat arrays.  Comments start with '#'."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"{path}:{lineno}: empty section name")
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if current is None:
            raise ConfigError(f"{path}:{lineno}: key outside any section")
        key, _, value = line.partition("=")
        current[key.strip()] = _parse_value(value, path, lineno)
    return sections


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read(), path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")


# ------------------------------------------------------------------ writers

def csv_header(n, m):
    cols = (["t"] + [f"xi_{i}" for i in range(n)]
            + [f"mu_{i}" for i in range(n)] + [f"a_{i}" for i in range(m)]
            + ["energy", "res_constraint", "res_dirac", "res_advection"])
    return ",".join(cols)


def _rows(traj, sample_every):
    idx = list(range(0, len(traj), sample_every))
    if idx and idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    return idx


def write_csv(traj, path, sample_every=1):
    n = traj.xi.shape[1]
    m = traj.a.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_header(n, m) + "\n")
        for k in _rows(traj, sample_every):
            vals = np.concatenate((
                [traj.times[k]], traj.xi[k], traj.mu[k], traj.a[k],
                [traj.energy[k], traj.res_constraint[k], traj.res_dirac[k],
                 traj.res_advection[k]]))
            fh.write(",".join(FIELD_FMT % v for v in vals) + "\n")


def write_json(traj, path, metadata, sample_every=1):
    idx = _rows(traj, sample_every)
    n = traj.xi.shape[1]
    m = traj.a.shape[1]

    def col(arr):
        return [FIELD_FMT % arr[k] for k in idx]

    columns = {"t": col(traj.times)}
    for i in range(n):
        columns[f"xi_{i}"] = col(traj.xi[:, i])
    for i in range(n):
        columns[f"mu_{i}"] = col(traj.mu[:, i])
    for i in range(m):
        columns[f"a_{i}"] = col(traj.a[:, i])
    columns["energy"] = col(traj.energy)
    columns["res_constraint"] = col(traj.res_constraint)
    columns["res_dirac"] = col(traj.res_dirac)
    columns["res_advection"] = col(traj.res_advection)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"metadata": metadata, "columns": columns}, fh,
                  indent=1, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------- run

def _get(section, key, default, caster, path="config"):
    try:
        return caster(section.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad value for {key!r}: {exc}")


def _report_and_verify(traj, verify, wall_time, out):
    e0 = traj.energy[0]
    scale = max(1.0, abs(e0))
    drift = float(np.max(np.abs(traj.energy - e0))) / scale
    max_con = float(np.max(traj.res_constraint))
    max_dirac = float(np.max(traj.res_dirac))
    max_adv = float(np.max(traj.res_advection))
    print(f"samples:               {len(traj)}", file=out)
    print(f"max |energy drift|:    {drift:.6e} (relative)", file=out)
    print(f"max constraint resid:  {max_con:.6e}", file=out)
    print(f"max Dirac resid:       {max_dirac:.6e}", file=out)
    print(f"max advection resid:   {max_adv:.6e}", file=out)
    print(f"wall time:             {wall_time:.3f} s", file=out)
    energy_tol = verify.get("energy_tol", 1e-8)
    dirac_tol = verify.get("dirac_tol", 1e-8)
    ok = (drift <= energy_tol and max_dirac <= dirac_tol
          and max_con <= 1e-10)
    print("verification:          " + ("PASS" if ok else "FAIL"), file=out)
    return ok


def cmd_run(args, out=None):
    out = out if out is not None else _sys.stdout
    try:
        cfg = load_config(args.config)
        model_tbl = dict(cfg.get("model", {}))
        name = model_tbl.pop("name", None)
        if name not in models.REGISTRY:
            raise ConfigError(f"unknown model {name!r}; see list-models")
        integ = cfg.get("integrator", {})
        method = _get(integ, "method", "midpoint", str)
        if method not in ("midpoint", "rk4-oracle"):
            raise ConfigError(f"unknown integrator method {method!r}")
        dt = _get(integ, "dt", 1e-3, float)
        t_final = _get(integ, "t_final", 1.0, float)
        advection = _get(integ, "advection_mode", "ode", str)
        if advection not in ("ode", "exact"):
            raise ConfigError(f"unknown advection_mode {advection!r}")
        if dt <= 0 or t_final < 0:
            raise ConfigError("need dt > 0 and t_final >= 0")
        output = cfg.get("output", {})
        out_path = args.output or output.get("path")
        if not out_path:
            raise ConfigError("no output path (config [output] or --output)")
        fmt = args.format or output.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}")
        sample_every = _get(output, "sample_every", 1, int)
        if sample_every < 1:
            raise ConfigError("sample_every must be >= 1")
        verify = cfg.get("verify", {})
        try:
            system, state0 = models.REGISTRY[name].build(model_tbl)
        except SingularContact as exc:
            # a singular initial contact is a t=0 integration failure,
            # not a malformed config
            print(f"integration failure: SingularContact: {exc}",
                  file=_sys.stderr)
            return EXIT_INTEGRATION
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad model parameters: {exc}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG

    if args.seed is not None:
        np.random.seed(args.seed % 2 ** 32)

    metadata = {
        "model": name,
        "params": {k: (list(v) if isinstance(v, list) else v)
                   for k, v in model_tbl.items()},
        "method": method, "dt": dt, "t_final": t_final,
        "advection_mode": advection,
        "tolerances": {"dirac_tol": verify.get("dirac_tol", 1e-8),
                       "energy_tol": verify.get("energy_tol", 1e-8)},
        "seed": args.seed, "version": __version__,
    }

    def emit(traj):
        if fmt == "csv":
            write_csv(traj, out_path, sample_every)
        else:
            write_json(traj, out_path, metadata, sample_every)

    start = time.perf_counter()
    try:
        if method == "midpoint":
            traj = dynamics.integrate(system, state0, t_final, dt,
                                      advection=advection)
        else:
            traj = dynamics.oracle_rk4(system, state0, t_final, dt)
            dynamics.fill_diagnostics(system, traj)
    except (NewtonDiverged, SingularContact, RankDrop, NotHyperregular) as exc:
        wall = time.perf_counter() - start
        print(f"integration failure: {type(exc).__name__}: {exc}",
              file=_sys.stderr)
        partial = getattr(exc, "partial", None)
        if partial is not None and len(partial) > 0:
            emit(partial)
            print(f"partial trajectory ({len(partial)} samples) written to "
                  f"{out_path}", file=out)
        print(f"wall time:             {wall:.3f} s", file=out)
        return EXIT_INTEGRATION
    wall = time.perf_counter() - start
    emit(traj)
    print(f"model:                 {name}", file=out)
    print(f"output:                {out_path} ({fmt})", file=out)
    ok = _report_and_verify(traj, verify, wall, out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_list_models(args, out=None):
    out = out if out is not None else _sys.stdout
    for name in sorted(models.REGISTRY):
        print(name, file=out)
    return EXIT_OK


def cmd_describe(args, out=None):
    out = out if out is not None else _sys.stdout
    info = models.REGISTRY.get(args.model)
    if info is None:
        print(f"config error: unknown model {args.model!r}", file=_sys.stderr)
        return EXIT_CONFIG
    print(info.name, file=out)
    print("  " + info.summary, file=out)
    print("  parameters:", file=out)
    for key, doc in info.params.items():
        print(f"    {key}: {doc}", file=out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nonholo",
        description="Integrate and verify nonholonomic systems on Lie groups "
                    "with advected parameters.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a scenario config")
    runp.add_argument("config", help="path to scenario config")
    runp.add_argument("--output", help="override output path")
    runp.add_argument("--format", choices=["csv", "json"],
                      help="override output format")
    runp.add_argument("--seed", type=int, default=None,
                      help="seed for randomized property suites")
    runp.set_defaults(func=cmd_run)

    lst = sub.add_parser("list-models", help="list built-in models")
    lst.set_defaults(func=cmd_list_models)

    desc = sub.add_parser("describe", help="describe a built-in model")
    desc.add_argument("model")
    desc.set_defaults(func=cmd_describe)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
