import math

import numpy as np
import pytest

from fbmg.core import (
    BudgetedCount,
    EveryNth,
    FirstKIterations,
    GridShape,
    Never,
    SolverConfig,
    SolveTrace,
    TraceRecord,
    dual_objective,
    is_feasible,
    project_ball,
    project_ball_field,
    relative_error,
)
from fbmg.dataterm import DataTerm


def test_grid_shape():
    g = GridShape(5, 4)
    assert g.n == 20 and g.shape == (5, 4) and g.dual_shape == (2, 5, 4)
    assert g.coarse() == GridShape(3, 2)
    with pytest.raises(ValueError):
        GridShape(1, 4)
    with pytest.raises(ValueError):
        GridShape(2, 5).coarse()
    assert GridShape.of(np.zeros((2, 6, 3))) == GridShape(6, 3)


def test_triggers():
    assert [FirstKIterations(3).fires(k, 0) for k in range(5)] == [True] * 3 + [False] * 2
    assert [EveryNth(3).fires(k, 0) for k in range(7)] == [True, False, False, True, False, False, True]
    b = BudgetedCount(2)
    assert b.fires(10, 1) and not b.fires(0, 2)
    assert not Never().fires(0, 0)


def test_config_validation():
    cfg = SolverConfig(alpha=1.0, tau=0.95 / 8, tau_H=1.95 / 8)
    cfg.validate(8.0, 8.0)
    with pytest.raises(ValueError):
        SolverConfig(alpha=1.0, tau=1.0 / 8, tau_H=0.1).validate(8.0)
    with pytest.raises(ValueError):
        SolverConfig(alpha=1.0, tau=0.1, tau_H=2.0 / 8).validate(8.0, 8.0)
    with pytest.raises(ValueError):
        SolverConfig(alpha=-1.0, tau=0.1, tau_H=0.1)
    with pytest.raises(ValueError):
        SolverConfig(alpha=1.0, tau=0.1, tau_H=0.1, kappa=1.5)
    with pytest.raises(ValueError):
        SolverConfig(alpha=1.0, tau=0.1, tau_H=0.1, line_search="armijo")


def test_project_ball():
    assert np.allclose(project_ball([3.0, 4.0], 1.0), [0.6, 0.8])
    assert np.array_equal(project_ball([0.3, 0.4], 1.0), [0.3, 0.4])
    x = np.array([[[3.0, 0.1]], [[4.0, 0.0]]])
    p = project_ball_field(x, 2.0)
    assert np.allclose(p[:, 0, 0], [1.2, 1.6]) and np.allclose(p[:, 0, 1], [0.1, 0.0])


def test_dual_objective_feasibility(rng):
    b = rng.random((4, 4))
    dt = DataTerm.denoising(b)
    x = np.zeros((2, 4, 4))
    assert dual_objective(x, dt, 1.0) == pytest.approx(0.5 * np.sum(b**2))
    x[0, 1, 1] = 1.5
    assert dual_objective(x, dt, 1.0) == math.inf
    assert not is_feasible(x, 1.0)
    x[0, 1, 1] = 1.0 + 1e-14
    assert is_feasible(x, 1.0)


def test_relative_error():
    assert relative_error(3.0, 5.0, 1.0) == 0.5
    with pytest.raises(ZeroDivisionError):
        relative_error(1.0, 2.0, 2.0)


def test_trace_helpers():
    tr = SolveTrace()
    for k, v in enumerate([10.0, 6.0, 3.0, 2.0]):
        tr.append(TraceRecord(k, float(k), 0.0, v))
    tr.with_reference(2.0)
    assert np.allclose(tr.column("relative"), [1.0, 0.5, 0.125, 0.0])
    assert tr.first_reaching(0.2).iter == 2
    assert tr.first_reaching(-1) is None
    assert len(tr) == 4 and np.array_equal(tr.icn, [0, 1, 2, 3])
