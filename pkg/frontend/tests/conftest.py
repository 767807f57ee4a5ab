import csv
import json
import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))


def write_manifest(bundle: Path, kind="reflection_1d", fmt=1):
    bundle.mkdir(parents=True, exist_ok=True)
    (bundle / "manifest.json").write_text(json.dumps({
        "name": "synthetic",
        "kind": kind,
        "version": "0.1.0",
        "format": fmt,
        "config": {"m": 3.0},
    }))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


@pytest.fixture
def reflection_bundle(tmp_path):
    """Synthetic reflection bundle whose trajectory sits exactly on the parabola."""
    bundle = tmp_path / "reflection"
    write_manifest(bundle)
    lam0 = 1.0 / 3.0
    v0 = 0.8
    c0 = 1.0 - v0**2 / (4.0 * lam0)
    rows = []
    track_rows = []
    n = 101
    for i in range(n):
        t = -20.0 + 40.0 * i / (n - 1)
        v = v0 * (1.0 - 2.0 * i / (n - 1))  # sweeps +v0 .. -v0
        c = c0 + v * v / (4.0 * lam0)
        rows.append([repr(t), repr(c), repr(v), repr(v * t), repr(0.1 * t),
                     repr(0.0)])
        track_rows.append([repr(t), repr(c * (1 + 2e-4)), repr(v + 1e-4),
                           repr(v * t), repr(0.1 * t), repr(1e-12), repr(1e-3)])
    write_csv(bundle / "effective.csv",
              ["t", "C", "V", "U", "H", "invariant_drift"], rows)
    write_csv(bundle / "track.csv",
              ["t", "c", "v", "rho", "gamma", "fit_residual", "remainder_h1"],
              track_rows)
    (bundle / "prediction.json").write_text(json.dumps({
        "kind": "reflected", "c_inf": 1.0, "v_inf": -v0, "lambda_inf": 1.0,
        "lambda0": lam0, "c0": c0, "v0": v0, "m": 3.0,
    }))
    diag_rows = []
    for i in range(n):
        t = -20.0 + 40.0 * i / (n - 1)
        diag_rows.append([repr(t), repr(4.0), repr(-0.5333 + 1e-11 * i),
                          repr(0.8 - 0.016 * i), repr(1e-9)])
    write_csv(bundle / "diagnostics.csv", ["t", "M", "Ea", "P", "law_residual"],
              diag_rows)
    return bundle


@pytest.fixture
def scaling_bundle(tmp_path):
    bundle = tmp_path / "scaling"
    write_manifest(bundle, kind="residual_scaling")
    eps = [0.1, 0.05, 0.025]
    rows = []
    rates = {}
    for order, slope in ((0, 1.0), (1, 2.0), (2, 3.0)):
        vals = [0.7 * e**slope for e in eps]
        for e, v in zip(eps, vals):
            rows.append([repr(e), order, repr(v)])
        # slope stored exactly as the renderer's refit computes it
        lx = [math.log(e) for e in eps]
        ly = [math.log(v) for v in vals]
        mx = sum(lx) / 3
        my = sum(ly) / 3
        fitted = sum((x - mx) * (y - my) for x, y in zip(lx, ly)) / \
            sum((x - mx) ** 2 for x in lx)
        rates[str(order)] = {"slope": fitted, "stderr": 0.0}
    write_csv(bundle / "scaling.csv", ["epsilon", "order", "residual_h1"], rows)
    (bundle / "rates.json").write_text(json.dumps(
        {"m": 3.0, "target_slope": 3, "rates": rates, "passed": True}))
    return bundle


@pytest.fixture
def refraction_bundle(tmp_path):
    bundle = tmp_path / "refraction"
    write_manifest(bundle, kind="refraction_2d")
    v_in = [1.0, 1.0]
    v_out = [2.6458, 1.0]
    th_in = math.atan2(v_in[1], v_in[0])
    th_out = math.atan2(v_out[1], v_out[0])
    (bundle / "prediction.json").write_text(json.dumps({
        "kind": "transmitted", "c_inf": 4.0, "v_inf": v_out[0],
        "lambda_inf": 0.707, "kappa": 1.5, "m": 2.0, "v_in": v_in,
    }))
    (bundle / "refraction.json").write_text(json.dumps({
        "theta_in": th_in,
        "theta_out_predicted": th_out,
        "theta_out_measured": th_out + 1e-3,
        "law_residual_predicted": 0.0,
        "law_residual_measured": 1e-3,
        "v_out_predicted": v_out,
        "v_out_measured": [v_out[0] * 1.001, v_out[1] * 0.999],
    }))
    return bundle
