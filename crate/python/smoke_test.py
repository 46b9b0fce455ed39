"""Smoke test of the Python bindings. Run after `maturin develop` in crates/python."""

import math

import delaystab


def main():
    e = delaystab.Expr("0.6*cos(t)")
    assert abs(e(0.0) - 0.6) < 1e-15 and not e.is_constant

    decay = delaystab.Equation([0.5], ["1", "0"], ["0"])
    verdicts = decay.check()
    assert len(verdicts) == 4
    assert all(v["verdict"]["in_probability"]["epsilon"] is not None for v in verdicts)

    fig4 = delaystab.Equation.preset("fig4")
    certified = [v["decomposition"] for v in fig4.check() if v["verdict"]["in_probability"]["epsilon"] is not None]
    assert certified == [{"n1": 1, "n2": 1}], certified

    assert delaystab.region("combined", -2.0, 9.0, 0.5, 0.55)
    assert not delaystab.region("discrete", -2.0, 9.0, 0.5, 0.55)
    assert abs(delaystab.combined_p_max(-2.0, 9.0, 0.5) - 1.0763888888888888) < 1e-12

    a, b = delaystab.boundary_point(1e-4, 0.5)
    assert abs(a - 4.0) < 1e-3 and abs(b + 8.0) < 1e-3
    for beta, a, b in delaystab.boundary_curve(0.5, 0.1, delaystab.X_STAR / 0.5, 50):
        assert abs(delaystab.characteristic_residual(a, b, 0.5, complex(0.0, beta))) < 1e-9

    sim = fig4.simulate(paths=4, t_end=5.0)
    assert len(sim["values"]) == 4 and len(sim["values"][0]) == 5001
    assert math.isclose(sim["values"][0][0], 0.6)
    again = fig4.simulate(paths=4, t_end=5.0)
    assert sim["values"] == again["values"]

    try:
        delaystab.Equation([0.5], ["1"], ["0"])
    except ValueError:
        pass
    else:
        raise AssertionError("mismatched coefficient count accepted")

    print("smoke test ok:", sorted(delaystab.PRESETS), sim["counts"])


if __name__ == "__main__":
    main()
