import math

import numpy as np
import pytest

from bethe_lab.errors import ConfigurationError
from bethe_lab.phase import (
    CellClass,
    EstimatorConfig,
    edge_window,
    export,
    load_grid,
    scan,
)
from bethe_lab.tree import free_lyapunov


def test_closed_form_scan():
    grid = scan(2, [0.0], [-3.5, 0.0, 2.9], EstimatorConfig(method="closed-form"), 0)
    assert [CellClass(c) for c in grid.class_codes[0]] == [
        CellClass.OUTSIDE, CellClass.HOLDS, CellClass.OUTSIDE]
    assert grid.L_values[0, 0] == pytest.approx(free_lyapunov(2, -3.5))
    assert list(grid.criterion_mask()[0]) == [False, True, True]


def test_closed_form_requires_zero_disorder():
    grid = scan(2, [0.1], [0.0], EstimatorConfig(method="closed-form"), 0)
    assert (0, 0) in grid.failures
    assert CellClass(grid.class_codes[0, 0]) is CellClass.UNDECIDED


def test_estimator_config_validation():
    with pytest.raises(ConfigurationError):
        EstimatorConfig(method="exact")
    with pytest.raises(ConfigurationError):
        EstimatorConfig(eta=-1)
    cfg = EstimatorConfig(R=9)
    assert EstimatorConfig.from_dict(cfg.to_dict()) == cfg


def test_export_round_trip(tmp_path):
    cfg = EstimatorConfig(R=6, n=10, eta=1e-3)
    grid = scan(2, [0.0, 0.2], [-1.0, 0.5, 5.0], cfg, 3)
    export(grid, "json", tmp_path / "g.json")
    back = load_grid(tmp_path / "g.json")
    assert np.allclose(back.L_values, grid.L_values, equal_nan=True)
    assert (back.class_codes == grid.class_codes).all()
    export(grid, "csv", tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "lambda,E,L_mean,L_stderr,class"
    assert len(lines) == 7
    with pytest.raises(ConfigurationError):
        export(grid, "xml", tmp_path / "g.xml")


def test_edge_window_rejects_strong_disorder():
    with pytest.raises(ConfigurationError):
        edge_window(2, 0.2, EstimatorConfig(), 0)


def test_edge_window_zero_disorder():
    w = edge_window(2, 0.0, EstimatorConfig(method="closed-form"), 0, side="lower",
                    delta_max=1.0, probes=4)
    assert w.delta == 1.0
    assert w.edge == pytest.approx(2 * math.sqrt(2))
