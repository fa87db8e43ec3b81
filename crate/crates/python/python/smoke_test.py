"""Smoke test for the compiled `spillover` extension module.

Build it and put it on the path, e.g.

    cargo build --release -p spillover-py --features extension-module
    cp target/release/libspillover.so /tmp/spillover.so
    PYTHONPATH=/tmp python3 crates/python/python/smoke_test.py
"""

import math
import os
import tempfile

import spillover

TRUE = [0.0, 0.0, 0.1, 0.0, 0.0, 0.1,
        0.2, 0.1, 1.0,
        0.3, 0.3, 0.0, 0.3,
        0.9, 0.3, 0.0, 0.9]


def main():
    assert len(spillover.PARAM_NAMES) == 17

    x = spillover.simulate_bekk(TRUE, 1000, seed=1)
    assert len(x) == 1000 and len(x[0]) == 2

    fit = spillover.fit_bekk(x, seed=1)
    assert fit.converged
    stat, p = fit.wald("first_to_second")
    assert p < 0.05, p
    a, b, w = fit.spillover_weight("first_to_second")
    assert math.isclose(w, abs(a) + abs(b))

    panel = spillover.simulate_panel(4, 300, seed=2, edges=[(0, 1, 0.3, 0.3)])
    assert panel.node_ids == ["N01", "N02", "N03", "N04"]
    assert len(panel) == 300 and len(panel.pair(0, 1)) == 300

    net = spillover.Network(["a", "b", "c"], [[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    assert abs(net.topology()["ne"] - 0.75) < 1e-12
    assert net.local_spillover_index("out") == [0.5, 0.5, 0.5]

    assert spillover.resilience(0.002, 0.032) == 15.0
    s = spillover.pattern_shift(([0.0, 1.0], [0.0, 1.0]), ([0.0, 1.0], [1.0, 1.0]))
    assert abs(s - 0.5) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "panel.csv")
        panel.to_csv(path)
        back = spillover.Panel.from_csv(path)
        assert back.dates == panel.dates
        cfg = os.path.join(d, "run.cfg")
        with open(cfg, "w") as f:
            f.write("input = panel.csv\nperiod.all = 2019-01-01..2019-10-27\n")
        assert spillover.run_pipeline(cfg, out=os.path.join(d, "out"), jobs=2) == {"all": 6}
        assert os.path.exists(os.path.join(d, "out", "all", "blocks.csv"))

    print("smoke test passed")


if __name__ == "__main__":
    main()
