import math

import numpy as np
import pytest

from hotent.config import SystemConfig
from hotent.errors import ConfigError, DomainError
from hotent.scan import (
    Axis,
    ScanSpec,
    analytic_boundary,
    bisect_boundary,
    equilibrium_boundary,
    equilibrium_diagram,
    exponent_map,
    steady_entanglement,
)
from reference import mathieu_growth_fit


def test_analytic_boundary_scales_as_inverse_damping():
    cfg = SystemConfig(kappa1=0.3, delta=1.996, g=0.005)
    assert analytic_boundary(cfg.replace(g=0.0025)) == pytest.approx(2 * analytic_boundary(cfg), rel=1e-12)


def test_analytic_boundary_from_growth_fit():
    fit, _ = mathieu_growth_fit(0.5, 1.996, periods=120)
    assert analytic_boundary(SystemConfig(kappa1=0.5, g=0.005)) == pytest.approx(fit / 0.005, rel=0.02)


def test_analytic_boundary_needs_damping():
    with pytest.raises(DomainError):
        analytic_boundary(SystemConfig(g=0.0))


def test_below_tongue_has_no_boundary():
    cfg = SystemConfig(kappa1=0.001, delta=1.996, g=0.05, horizon=20)
    assert analytic_boundary(cfg) == 0.0
    pt = bisect_boundary(cfg, depth=4)
    assert pt.theta_sim < 1.0
    assert math.isnan(pt.relative_error)


def test_steady_entanglement_in_tongue():
    res = steady_entanglement(SystemConfig(theta=1.0, g=0.05, kappa1=0.5, delta=1.996))
    assert res.converged and res.status == "converged"
    assert res.log_negativity > 0


def test_axis_parsing():
    ax = Axis.parse("kappa1=0.1:0.5:5")
    np.testing.assert_allclose(ax.values(), [0.1, 0.2, 0.3, 0.4, 0.5])
    for bad in ("kappa1=0.1:0.5", "speed=0:1:3", "theta=1:0:3", "theta=0:1:1", "theta"):
        with pytest.raises(ConfigError):
            Axis.parse(bad)


def test_scan_spec_grid():
    spec = ScanSpec((Axis("theta", 1, 2, 2), Axis("kappa1", 0.1, 0.3, 3)), SystemConfig())
    grid = list(spec.grid())
    assert len(grid) == 6
    idx, cfg = grid[-1]
    assert idx == (1, 2) and cfg.theta == 2.0 and cfg.kappa1 == pytest.approx(0.3)
    with pytest.raises(ConfigError):
        ScanSpec((Axis("theta", 1, 2, 2), Axis("theta", 0, 1, 2)), SystemConfig())


def test_equilibrium_diagram():
    pts = equilibrium_diagram([0.1, 5.0], [0.0, 0.5, -0.5])
    by = {(p.theta, p.kappa0): p for p in pts}
    assert by[(0.1, 0.0)].log_negativity == 0.0
    assert by[(0.1, 0.5)].log_negativity > 0
    assert by[(0.1, 0.5)].log_negativity == pytest.approx(by[(0.1, -0.5)].log_negativity, rel=1e-9)
    assert by[(5.0, 0.5)].log_negativity == 0.0
    # coupling beyond the stability limit has no Gibbs state
    assert not equilibrium_diagram([1.0], [1.2])[0].valid


def test_equilibrium_boundary_below_one_quantum():
    assert equilibrium_boundary(0.0) == 0.0
    tb = equilibrium_boundary(0.5)
    assert 0 < tb < 1


def test_exponent_map():
    pts = exponent_map(SystemConfig(), [0.0, 0.3], [1.9, 2.0, 2.1])
    assert len(pts) == 6
    zero = [p for p in pts if p.kappa1 == 0.0]
    assert all(p.growth_plus == 0.0 and p.growth_minus == 0.0 and p.stable for p in zero)
    grow = {p.delta: p.growth_plus for p in pts if p.kappa1 == 0.3}
    assert grow[2.0] > 0
    assert grow[1.9] == pytest.approx(grow[2.1], rel=0.3)
