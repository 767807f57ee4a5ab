"""Acceptance criterion 12: the five figure types render from real bundles.

Bundles are produced by invoking the simulator CLI as a subprocess, keeping
this package import-isolated from it. Bundle generation is outside the
criterion's time budget; only the rendering is timed.
"""

import subprocess
import sys
import time
from pathlib import Path

import pytest

from plots import render

REPO = Path(__file__).resolve().parents[2]


def _run_cli(args, cwd):
    proc = subprocess.run(
        [sys.executable, "-m", "nlslab.cli", *args],
        cwd=cwd, capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"CLI failed: {proc.stdout}\n{proc.stderr}")
    return proc


@pytest.fixture(scope="module")
def real_bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundles")
    (root / "transmission.toml").write_text(f"""
[scenario]
name = "fig-transmission"
kind = "interaction_1d"
m = 3.0
v0 = 1.0
output_dir = "{root / 'transmission'}"

[potential]
direction = "increasing"
epsilon = 0.05
steepness = 5.0

[grid]
n = 4096
length = 128.0

[time]
dt = 1e-3
horizon = "auto"
observer_stride = 25
""")
    (root / "reflection.toml").write_text(f"""
[scenario]
name = "fig-reflection"
kind = "reflection_1d"
m = 3.0
v0 = 0.8
output_dir = "{root / 'reflection'}"

[potential]
direction = "decreasing"
epsilon = 0.05
a_minus = 1.0
a_plus = 0.5
steepness = 5.0

[grid]
n = 4096
length = 128.0

[time]
dt = 1e-3
horizon = "auto"
observer_stride = 25
""")
    (root / "scaling.toml").write_text(f"""
[scenario]
name = "fig-scaling"
kind = "residual_scaling"
m = 3.0
v0 = 1.0
epsilons = [0.1, 0.05, 0.025]
output_dir = "{root / 'scaling'}"

[potential]
direction = "increasing"
epsilon = 0.05
steepness = 1.0
""")
    (root / "refraction.toml").write_text(f"""
[scenario]
name = "fig-refraction"
kind = "refraction_2d"
m = 2.0
v_in = [1.0, 0.5]
output_dir = "{root / 'refraction'}"

[potential]
direction = "increasing"
epsilon = 0.05
steepness = 5.0

[grid]
n = 128
length = 40.0
dim = 2

[time]
dt = 1e-3
horizon = [-4.0, 4.0]
observer_stride = 100
""")
    _run_cli(["simulate", str(root / "transmission.toml")], REPO)
    _run_cli(["simulate", str(root / "reflection.toml")], REPO)
    _run_cli(["residual-scaling", str(root / "scaling.toml")], REPO)
    _run_cli(["simulate", str(root / "refraction.toml")], REPO)
    return root


def test_criterion_12_figures(real_bundles, tmp_path):
    start = time.time()
    outputs = [
        render(real_bundles / "transmission", "params_vs_ode",
               tmp_path / "params_vs_ode.png"),
        render(real_bundles / "transmission", "conservation",
               tmp_path / "conservation.png"),
        render(real_bundles / "reflection", "phase_plane",
               tmp_path / "phase_plane.png"),
        render(real_bundles / "scaling", "residual_scaling",
               tmp_path / "residual_scaling.png"),
        render(real_bundles / "refraction", "refraction",
               tmp_path / "refraction.png"),
    ]
    elapsed = time.time() - start
    ok = all(out.exists() and out.stat().st_size > 0 for out in outputs)
    print(f"[criterion 12] {'PASS' if ok else 'FAIL'} "
          f"({elapsed:.1f}s / budget 60s): five figures rendered "
          "with embedded assertions")
    assert ok
    assert elapsed < 60.0
