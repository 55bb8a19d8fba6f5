"""Render standard figures from a trajectory CSV.

The input must follow the trajectory schema written by the `nonholo run`
command; any deviation is reported as a column diff and the process exits
nonzero.  Rendering is deterministic: fixed backend, figure size and dpi.
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("energy", "residuals", "gamma-sphere", "components")

FIXED_TRAILER = ("energy", "res_constraint", "res_dirac", "res_advection")

_RC = {"figure.figsize": (6.0, 4.0), "figure.dpi": 100, "savefig.dpi": 100}


class SchemaError(Exception):
    """Input header does not match the trajectory schema."""


@dataclass(frozen=True)
class PlotJob:
    csv_path: str
    kind: str
    out_path: str


def _expected_columns(n, m):
    return (["t"] + [f"xi_{i}" for i in range(n)]
            + [f"mu_{i}" for i in range(n)] + [f"a_{i}" for i in range(m)]
            + list(FIXED_TRAILER))


def _infer_dims(columns):
    n = len([c for c in columns if re.fullmatch(r"xi_\d+", c)])
    m = len([c for c in columns if re.fullmatch(r"a_\d+", c)])
    return n, m


def _diff(expected, got):
    missing = [c for c in expected if c not in got]
    extra = [c for c in got if c not in expected]
    lines = []
    if missing:
        lines.append("missing columns: " + ", ".join(missing))
    if extra:
        lines.append("unexpected columns: " + ", ".join(extra))
    if not lines:
        lines.append("columns out of order: expected "
                     + ",".join(expected) + " got " + ",".join(got))
    return "\n".join(lines)


def load_table(path):
    """Parse the CSV, validating the header; returns {column: 1-d array}."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if not header:
        raise SchemaError(f"{path}: empty file")
    got = header.split(",")
    n, m = _infer_dims(got)
    expected = _expected_columns(n, m)
    if got != expected:
        raise SchemaError(f"{path}: header does not match the trajectory "
                          f"schema\n{_diff(expected, got)}")
    data = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    return {c: np.atleast_1d(data[c]) for c in got}


def _plot_energy(table, ax):
    t, e = table["t"], table["energy"]
    scale = max(1.0, abs(e[0]))
    drift = np.abs(e - e[0]) / scale
    floor = 1e-18
    ax.semilogy(t, np.maximum(drift, floor),
                marker="o" if len(t) == 1 else None)
    ax.set_xlabel("t")
    ax.set_ylabel("|e(t) - e(0)| / max(1, |e(0)|)")
    ax.set_title("relative energy drift")


def _plot_residuals(table, ax):
    t = table["t"]
    floor = 1e-18
    marker = "o" if len(t) == 1 else None
    for name in ("res_constraint", "res_dirac", "res_advection"):
        ax.semilogy(t, np.maximum(table[name], floor), label=name,
                    marker=marker)
    ax.set_xlabel("t")
    ax.set_ylabel("residual")
    ax.set_title("verification residuals")
    ax.legend()


def _plot_gamma_sphere(table, fig):
    a_cols = sorted((c for c in table if c.startswith("a_")),
                    key=lambda c: int(c.split("_")[1]))
    if len(a_cols) != 3:
        raise SchemaError("gamma-sphere needs exactly three advected "
                          f"components, found {len(a_cols)}")
    ax = fig.add_subplot(projection="3d")
    u = np.linspace(0.0, 2.0 * np.pi, 30)
    v = np.linspace(0.0, np.pi, 15)
    ax.plot_wireframe(np.outer(np.cos(u), np.sin(v)),
                      np.outer(np.sin(u), np.sin(v)),
                      np.outer(np.ones_like(u), np.cos(v)),
                      color="lightgray", linewidth=0.4)
    xs, ys, zs = (table[c] for c in a_cols)
    if len(xs) == 1:
        ax.scatter(xs, ys, zs, color="C0")
    else:
        ax.plot(xs, ys, zs, color="C0")
    ax.set_box_aspect((1, 1, 1))
    ax.set_title("advected vector on the unit sphere")


def _plot_components(table, ax):
    t = table["t"]
    xi_cols = sorted((c for c in table if c.startswith("xi_")),
                     key=lambda c: int(c.split("_")[1]))
    marker = "o" if len(t) == 1 else None
    for c in xi_cols:
        ax.plot(t, table[c], label=c, marker=marker)
    ax.set_xlabel("t")
    ax.set_ylabel("velocity component")
    ax.set_title("reduced velocity components")
    ax.legend()


def plot(job: PlotJob) -> str:
    """Render one figure; returns the output path."""
    if job.kind not in KINDS:
        raise ValueError(f"unknown figure kind {job.kind!r}")
    table = load_table(job.csv_path)
    with plt.rc_context(_RC):
        fig = plt.figure()
        try:
            if job.kind == "energy":
                _plot_energy(table, fig.add_subplot())
            elif job.kind == "residuals":
                _plot_residuals(table, fig.add_subplot())
            elif job.kind == "gamma-sphere":
                _plot_gamma_sphere(table, fig)
            else:
                _plot_components(table, fig.add_subplot())
            fig.savefig(job.out_path, metadata={"Software": "plotkit"})
        finally:
            plt.close(fig)
    return job.out_path


def build_parser():
    p = argparse.ArgumentParser(prog="plotkit",
                                description="figures for trajectory CSVs")
    sub = p.add_subparsers(dest="command", required=True)
    pl = sub.add_parser("plot", help="render one figure from a CSV")
    pl.add_argument("csv", help="trajectory CSV (nonholo run output)")
    pl.add_argument("--kind", choices=KINDS, required=True)
    pl.add_argument("--out", required=True, help="output image path")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    job = PlotJob(csv_path=args.csv, kind=args.kind, out_path=args.out)
    try:
        plot(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
