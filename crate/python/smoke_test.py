"""Smoke test for the sqc extension module. Run after `pip install ./crates/python`."""

from fractions import Fraction
from pathlib import Path

import sqc

FIXTURES = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"


def main():
    model = sqc.load(str(FIXTURES / "inductive.sqc"))
    assert model.coordinates == ["x1", "x2", "x3", "X"]

    analysis = model.analyze()
    assert analysis.dof == {"phase": 2, "config": 1, "fcc": 1, "scc": 4}
    assert len(analysis.first_class) == 1
    assert all(isinstance(v, Fraction) for row in analysis.matrix for v in row)

    unfixed = model.reduce()
    assert unfixed.warnings and unfixed.warnings[0].startswith("1 FCC unfixed")

    red = model.reduce(["2*x1 + 3*x3"])
    assert red.bracket("x1", "P1") == Fraction(3, 5)
    assert red.bracket("x3", "P1") == Fraction(-2, 5)

    generic = sqc.load(str(FIXTURES / "generic.sqc"))
    red = generic.reduce()
    assert red.commutator("x1", "x2") == Fraction(4, 5)
    assert len(red.chart) == 4

    traj = red.simulate(dt=1e-2, t_end=1.0)
    assert len(traj["t"]) == 101
    drift = max(abs(e - traj["energy"][0]) for e in traj["energy"])
    assert drift < 1e-8

    shifted = generic.with_params({"lam2": Fraction(3, 4), "lam3": 1})
    assert shifted.params["lam2"] == Fraction(3, 4)

    try:
        sqc.parse("var x\nL = x\n").analyze()
    except sqc.SqcError as e:
        assert e.args[1] == 3
    else:
        raise AssertionError("expected an inconsistent model")

    code, out, _ = sqc.run(["analyze", str(FIXTURES / "noncommutative.sqc")])
    assert code == 0 and out.startswith("# Circuit analysis")
    print("smoke test ok")


if __name__ == "__main__":
    main()
