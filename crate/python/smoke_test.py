"""Smoke test for the reclaimpy extension module.

Build and install it first:  pip install --no-build-isolation ./crates/py
"""

import json
import math

import reclaimpy


def main():
    adder = reclaimpy.Program.bench("adder4")
    assert "main" in adder.functions
    assert adder.level("add_w2_m5") == 1

    reports = {p: adder.simulate(policy=p, arch="lattice", grid="6x6") for p in ("eager", "lazy", "square")}
    for r in reports.values():
        assert r.aqv > 0 and r.depth_cycles > 0
        area = sum((b[0] - a[0]) * a[1] for a, b in zip(r.trace, r.trace[1:]))
        assert area == r.aqv, (area, r.aqv)
    assert reports["eager"].qubit_count < reports["lazy"].qubit_count

    full = adder.simulate(policy="square", arch="full", verify=True)
    assert full.swap_count == 0 and full.verified is True
    assert json.loads(full.to_json())["arch"] == "full"

    same = reclaimpy.Program.parse(adder.source())
    assert same.simulate(arch="full").to_json() == full.to_json()

    syn = reclaimpy.Program.synthetic(2, 2, 4, 2, 6, seed=3)
    assert syn.simulate(arch="ft", grid="8x8").braid_retries >= 0
    assert set(reclaimpy.SMALL_SUITE) >= {"adder4", "belle-s"}
    assert "belle-s" in reclaimpy.presets()

    c1 = reclaimpy.cost_uncompute(10, 4, 100, 50, s=2.0, level=1)
    c0 = reclaimpy.cost_no_uncompute(10, 4, 100, 50, s=2.0, level=1)
    assert math.isclose(c1, 10 * 100 * 2.0 * 2)
    assert math.isclose(c0, 4 * 50 * 2.0 * math.sqrt(14 / 10))

    for bad in (lambda: adder.simulate(arch="lattice"), lambda: reclaimpy.Program.bench("nope")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        adder.simulate(policy="lazy", arch="full", max_qubits=12)
    except RuntimeError as e:
        assert "deadlock" in str(e)
    else:
        raise AssertionError("expected a deadlock")

    print("smoke test passed:", reports["square"])


if __name__ == "__main__":
    main()
