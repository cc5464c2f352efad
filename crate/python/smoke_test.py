"""Smoke test for the deobtime_py extension module.

Build it first with ``python/build.sh`` (or see README.md).
"""

import json
import os
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)

import deobtime_py as d  # noqa: E402

C17 = os.path.join(HERE, "..", "crates", "core", "data", "c17.bench")


def nand(a, b):
    return not (a and b)


def main():
    c = d.Circuit.load(C17)
    assert (c.num_inputs, c.num_outputs, c.num_keys) == (5, 2, 0), c
    assert dict(c.type_histogram())["NAND"] == 6

    for v in range(32):
        x = [bool(v >> (4 - i) & 1) for i in range(5)]
        n1, n2, n3, n6, n7 = x
        n11 = nand(n3, n6)
        n16 = nand(n2, n11)
        expect = [nand(nand(n1, n3), n16), nand(n16, nand(n11, n7))]
        assert c.simulate(x) == expect, (x, c.simulate(x))

    assert "p cnf" in c.to_dimacs()

    inst = d.obfuscate(c, 2, "xor", seed=3)
    assert inst.n_locations == 2 and len(inst.key) == 2
    assert sum(inst.mask) == 2
    json.loads(inst.to_json("c17.bench"))

    r = d.attack(inst)
    assert r.status == "SOLVED" and r.verified, r
    locked = inst.locked
    for v in range(32):
        x = [bool(v >> (4 - i) & 1) for i in range(5)]
        assert locked.simulate(x, r.key) == c.simulate(x)

    model = d.Model(json.dumps({"hidden_dims": [8, 4], "seed": 1}))
    y, seconds = model.predict(inst)
    assert y > 0 and seconds >= 0
    a_feat, a_gate = model.attention(inst)
    assert abs(sum(a_feat) - 1) < 1e-9 and abs(sum(a_gate) - 1) < 1e-9

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        model.save(path)
        assert d.Model.load(path).predict(inst)[0] == y

    try:
        d.obfuscate(c, 1, "bogus")
    except d.DeobtimeError:
        pass
    else:
        raise AssertionError("expected DeobtimeError")

    print("smoke test passed:", c, inst, r)


if __name__ == "__main__":
    main()
