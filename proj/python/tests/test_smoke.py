import math

import numpy as np
import pytest

import qslin


def test_expression_ops():
    e = qslin.parse("sin(q1)*v2")
    assert str(e) == "(sin(q1) * v2)"
    d = e.diff("q1")
    assert d.eval({"q1": 0.3, "v2": 2.0}) == pytest.approx(2.0 * math.cos(0.3))
    assert qslin.parse("y1*y2").total_derivative().eval(
        {"y1": 2.0, "y1_d1": 3.0, "y2": 5.0, "y2_d1": 7.0}
    ) == pytest.approx(3 * 5 + 2 * 7)
    assert e.free_variables() == {"q1", "v2"}
    assert str(qslin.parse("a + 0").simplify()) == "a"
    assert qslin.jet_name(2, 4) == "y3_d4"


def test_errors_map_to_categories():
    with pytest.raises(qslin.ValidationError, match="position"):
        qslin.parse("a + * b")
    with pytest.raises(qslin.NumericError):
        qslin.parse("x").eval({})
    with pytest.raises(qslin.ValidationError, match="valid selectors"):
        qslin.Model("builtin:manipulator").simulate(kappa="7")
    with pytest.raises(qslin.ValidationError):
        qslin.Model("builtin:manipulator", dt=-1.0)
    with pytest.raises(qslin.ValidationError, match="unknown override"):
        qslin.Model("builtin:manipulator", speed=2)
    assert issubclass(qslin.MathConditionError, qslin.Error)


def test_configs():
    assert {"manipulator", "toy"} <= set(qslin.builtin_names())
    text = qslin.effective_config("builtin:toy")
    assert qslin.check_config(text) == text


def test_manipulator_reports():
    m = qslin.Model("builtin:manipulator")
    assert m.R == [4, 4, 4] and m.S == [4, 4, 4]
    assert m.generalized_inputs == ["phi", "F1", "F2"]
    a = m.analyze()
    assert a["structure"]["pass"]
    assert a["certificate"]["max_residual"] <= 1e-8
    k = m.kappa()
    kappas = [c["kappa"] for c in k["candidates"]]
    assert kappas == [[2, 2, 2], [0, 2, 4]]
    assert k["candidates"][1]["column"] == "y3_d2"


def test_simulate(tmp_path):
    m = qslin.Model("builtin:manipulator", T=2.0)
    res = m.simulate(kappa="0,2,4", out=tmp_path)
    rep = res["report"]
    assert rep["linearization"]["pass"]
    assert rep["closed_loop"]["final_state_error"] <= 1e-5
    cl = res["closed_loop"]
    assert cl["x"].shape == (len(cl["t"]), 6)
    assert np.all(np.diff(cl["t"]) > 0)
    assert (tmp_path / "manifest.json").exists()
    assert sorted(res["files"]) == sorted(
        ["closed_loop.csv", "closed_loop.gp", "reference.csv", "reference.gp", "effective.cfg", "report.json"]
    )


def test_plan_without_output():
    res = qslin.Model("builtin:toy").plan("start", "end")
    assert res["files"] == []
    y = res["reference"]["y"]
    assert y[0] == pytest.approx([0.0, 0.0])
    assert y[-1] == pytest.approx([0.5, -0.3])
