"""Import the compiled extension and exercise each binding once.

Build first, then run from the repo root:

    cargo build --release -p escapekit-py --features extension-module
    cp target/release/libescapekit_py.so python/escapekit.so
    python3 python/smoke_test.py
"""

import json
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import escapekit  # noqa: E402

EUCLIDEAN = json.dumps({"dim": 2, "family": "euclidean"})
POWER = json.dumps({"dim": 2, "family": "radial_power", "params": {"m1": 2.0}})
CYLINDER = json.dumps(
    {"dim": 2, "family": "cylinder", "r_c": 1.0, "params": {"R0": 2.0}, "alpha": {"kind": "zero"}}
)


def main():
    rep = escapekit.certify(POWER)
    assert rep["pass"] and rep["worst_margin"] >= -1e-8, rep["worst_margin"]
    assert not escapekit.certify(CYLINDER)["pass"]

    shot = escapekit.shoot(POWER, [1.5, 0.0], [0.0, 1.0], 100.0)
    assert shot["asymptotic_speed"] > 0.9, shot["asymptotic_speed"]
    flat = escapekit.shoot(EUCLIDEAN, [2.0, 0.0], [1.0, 0.0], 10.0, dt=1e-2)
    assert math.isclose(flat["final_radius"], 12.0, abs_tol=1e-9)

    radial = escapekit.wave_radial(2.0, n=1024, bump_power=8, window=(9.0, 24.0))
    assert radial["class"] == "finite_time_zero", radial["class"]

    wave = escapekit.wave_energy(EUCLIDEAN, n_r=128, n_theta=16, t_final=4.0)
    assert wave["max_relative_drift"] < 5e-2

    try:
        escapekit.certify('{"dim": 2, "family": "sphere"}')
    except ValueError as e:
        assert "metric spec" in str(e)
    else:
        raise AssertionError("bad metric accepted")

    print(f"escapekit {escapekit.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
