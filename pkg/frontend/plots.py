#!/usr/bin/env python3
"""Render diagnostic figures from simulation output bundles.

Reads only the documented bundle files (manifest.json, delimited tables,
prediction/rates JSON) -- no simulation code is imported, and no physics is
recomputed beyond overlaying the analytic curves whose constants the bundle
carries. Each figure type embeds a consistency assertion and the script
exits nonzero when one fails.

Usage:
    plots.py <bundle_dir> --figure <name> --out <file>

Figures: params_vs_ode | phase_plane | residual_scaling | refraction |
conservation
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SUPPORTED_FORMAT = 1
FIGURES = ("params_vs_ode", "phase_plane", "residual_scaling", "refraction",
           "conservation")


class PlotsError(RuntimeError):
    pass


def load_manifest(bundle: Path) -> dict:
    path = bundle / "manifest.json"
    if not path.exists():
        raise PlotsError(f"no manifest.json in {bundle} (empty or foreign bundle)")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != SUPPORTED_FORMAT:
        raise PlotsError(
            f"bundle format {manifest.get('format')} unsupported "
            f"(expected {SUPPORTED_FORMAT})"
        )
    return manifest


def read_table(bundle: Path, name: str, columns) -> dict:
    path = bundle / name
    if not path.exists():
        raise PlotsError(f"required table {name} missing from bundle")
    with open(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise PlotsError(f"{name} is missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise PlotsError(f"{name} has no data rows")
    return {col: [float(r[col]) for r in rows] for col in columns}


def read_json(bundle: Path, name: str) -> dict:
    path = bundle / name
    if not path.exists():
        raise PlotsError(f"required file {name} missing from bundle")
    return json.loads(path.read_text())


def _fit_slope(xs, ys):
    """Plain least-squares slope in log-log coordinates."""
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    n = len(lx)
    mx = sum(lx) / n
    my = sum(ly) / n
    sxx = sum((x - mx) ** 2 for x in lx)
    sxy = sum((x - mx) * (y - my) for x, y in zip(lx, ly))
    return sxy / sxx


def _new_axes(nrows=1, height=3.2):
    fig, axes = plt.subplots(nrows, 1, figsize=(6.4, height * nrows), dpi=150,
                             squeeze=False)
    return fig, [ax[0] for ax in axes]


def figure_params_vs_ode(bundle: Path):
    track = read_table(bundle, "track.csv", ["t", "c", "v"])
    ode = read_table(bundle, "effective.csv", ["t", "C", "V"])
    fig, (ax_c, ax_v) = _new_axes(2)
    ax_c.plot(ode["t"], ode["C"], "-", color="0.4", label="reduced dynamics")
    ax_c.plot(track["t"][::4], track["c"][::4], ".", ms=3, color="crimson",
              label="fitted")
    ax_c.set_ylabel("scaling c(t)")
    ax_c.legend(loc="best", frameon=False)
    ax_v.plot(ode["t"], ode["V"], "-", color="0.4")
    ax_v.plot(track["t"][::4], track["v"][::4], ".", ms=3, color="crimson")
    ax_v.set_ylabel("velocity v(t)")
    ax_v.set_xlabel("t")
    fig.suptitle("Fitted modulation parameters vs reduced dynamics")
    return fig


def figure_phase_plane(bundle: Path):
    ode = read_table(bundle, "effective.csv", ["C", "V"])
    pred = read_json(bundle, "prediction.json")
    for key in ("c0", "lambda0"):
        if key not in pred:
            raise PlotsError(f"prediction.json is missing {key!r} for the "
                             "phase-plane overlay")
    c0, lam0 = pred["c0"], pred["lambda0"]
    parabola = [c0 + v * v / (4.0 * lam0) for v in ode["V"]]
    deviation = max(abs(c - p) for c, p in zip(ode["C"], parabola))
    if deviation >= 1e-6:
        raise PlotsError(
            f"phase-plane data departs from the scaling parabola by {deviation:.3e}"
        )
    fig, (ax,) = _new_axes(1, height=4.2)
    vv = sorted(ode["V"])
    ax.plot(vv, [c0 + v * v / (4.0 * lam0) for v in vv], "-", color="0.6",
            label=r"C = c0 + V^2/(4*lambda0)")
    ax.plot(ode["V"][::3], ode["C"][::3], ".", ms=3.5, color="navy",
            label="trajectory")
    ax.set_xlabel("V")
    ax.set_ylabel("C")
    ax.set_title(f"Phase plane (max parabola deviation {deviation:.2e})")
    ax.legend(loc="best", frameon=False)
    return fig


def figure_residual_scaling(bundle: Path):
    table = read_table(bundle, "scaling.csv", ["epsilon", "order", "residual_h1"])
    rates = read_json(bundle, "rates.json")
    fig, (ax,) = _new_axes(1, height=4.2)
    orders = sorted({int(o) for o in table["order"]})
    for order in orders:
        eps = [e for e, o in zip(table["epsilon"], table["order"]) if int(o) == order]
        res = [r for r, o in zip(table["residual_h1"], table["order"]) if int(o) == order]
        slope = _fit_slope(eps, res)
        stored = rates["rates"][str(order)]["slope"]
        if abs(slope - stored) > 1e-9:
            raise PlotsError(
                f"re-fitted slope {slope!r} for order {order} disagrees with "
                f"rates.json value {stored!r}"
            )
        ax.loglog(eps, res, "o-", ms=4, label=f"order {order}: slope {slope:.3f}")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("residual (Sobolev norm)")
    ax.set_title("Ansatz residual scaling")
    ax.legend(loc="best", frameon=False)
    return fig


def figure_refraction(bundle: Path):
    ref = read_json(bundle, "refraction.json")
    for key in ("theta_in", "theta_out_predicted", "v_out_predicted"):
        if key not in ref:
            raise PlotsError(f"refraction.json is missing {key!r}")
    pred = read_json(bundle, "prediction.json")
    v_in = pred.get("v_in")
    if v_in is None:
        raise PlotsError("prediction.json is missing 'v_in'")
    v_out = ref["v_out_predicted"]
    # transverse-component conservation recomputed from the stored vectors
    lhs = v_in[1]
    rhs = math.hypot(*v_out) * math.sin(math.atan2(v_out[1], v_out[0]))
    if abs(lhs - rhs) > 1e-9:
        raise PlotsError(f"stored refraction data violates the sine law by "
                         f"{abs(lhs - rhs):.3e}")
    fig, (ax,) = _new_axes(1, height=4.6)
    ax.axvline(0.0, color="0.8", lw=8, zorder=0)
    ax.annotate("", xy=(0, 0), xytext=(-v_in[0], -v_in[1]),
                arrowprops=dict(arrowstyle="->", color="navy", lw=2))
    ax.annotate("", xy=(v_out[0], v_out[1]), xytext=(0, 0),
                arrowprops=dict(arrowstyle="->", color="crimson", lw=2))
    if "v_out_measured" in ref:
        vm = ref["v_out_measured"]
        ax.annotate("", xy=(vm[0], vm[1]), xytext=(0, 0),
                    arrowprops=dict(arrowstyle="->", color="seagreen", lw=1.2,
                                    linestyle="--"))
    ax.set_aspect("equal")
    span = max(abs(v) for v in (v_in + list(v_out))) * 1.2
    ax.set_xlim(-span, span)
    ax.set_ylim(-span, span)
    ax.set_title(
        "Refraction geometry: "
        f"{math.degrees(ref['theta_in']):.1f}° -> "
        f"{math.degrees(ref['theta_out_predicted']):.1f}°"
    )
    ax.set_xlabel("axis 1 (medium step direction)")
    ax.set_ylabel("axis 2")
    return fig


def figure_conservation(bundle: Path):
    cols = ["t", "M", "Ea"]
    # momentum column name differs between 1D and 2D bundles
    path = bundle / "diagnostics.csv"
    if not path.exists():
        raise PlotsError("required table diagnostics.csv missing from bundle")
    with open(path) as fh:
        header = next(csv.reader(fh))
    pcol = "P" if "P" in header else ("P1" if "P1" in header else None)
    if pcol is None:
        raise PlotsError("diagnostics.csv is missing column 'P'")
    table = read_table(bundle, "diagnostics.csv", cols + [pcol])
    m0 = table["M"][0]
    drift = max(abs(v - m0) for v in table["M"]) / abs(m0)
    if drift > 1e-8:
        raise PlotsError(f"mass drift {drift:.3e} too large for a valid run")
    fig, (ax_m, ax_e, ax_p) = _new_axes(3, height=2.2)
    ax_m.plot(table["t"], [v - m0 for v in table["M"]], color="navy")
    ax_m.set_ylabel("M(t) - M(0)")
    ax_m.set_title(f"Conserved quantities (mass drift {drift:.1e})")
    e0 = table["Ea"][0]
    ax_e.plot(table["t"], [v - e0 for v in table["Ea"]], color="seagreen")
    ax_e.set_ylabel("Ea(t) - Ea(0)")
    ax_p.plot(table["t"], table[pcol], color="crimson")
    ax_p.set_ylabel("momentum")
    ax_p.set_xlabel("t")
    return fig


RENDERERS = {
    "params_vs_ode": figure_params_vs_ode,
    "phase_plane": figure_phase_plane,
    "residual_scaling": figure_residual_scaling,
    "refraction": figure_refraction,
    "conservation": figure_conservation,
}


def render(bundle_dir, figure: str, out_path) -> Path:
    """Validate the bundle, build one figure, write the image file."""
    bundle = Path(bundle_dir)
    if not bundle.is_dir():
        raise PlotsError(f"bundle directory {bundle} does not exist")
    load_manifest(bundle)
    if figure not in RENDERERS:
        raise PlotsError(f"unknown figure {figure!r}; choose from {FIGURES}")
    fig = RENDERERS[figure](bundle)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, bbox_inches="tight")
    plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("bundle_dir")
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        out = render(args.bundle_dir, args.figure, args.out)
    except PlotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
