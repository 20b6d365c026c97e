import numpy as np
import pytest

from switchips.errors import ValidationError
from switchips.feynman_kac import feynman_kac_stationary
from switchips.macro import MacroParams, macro_profile
from switchips.model import ReservoirDensities, make_stream


def test_equal_payoffs_are_exact():
    mp = MacroParams(0.5, 1.0, ReservoirDensities(3, 3, 3, 3))
    est = feynman_kac_stationary(mp, 0.4, 1, 2000, 1e-4, make_stream(0))
    assert est.mean == 3.0 and est.se == 0.0


def test_one_sided_payoff_gives_exit_probability():
    # payoff 1 at the right end on both layers: exit probability is y
    mp = MacroParams(0.3, 2.0, ReservoirDensities(0, 0, 1, 1))
    est = feynman_kac_stationary(mp, 0.3, 0, 20_000, 1e-4, make_stream(1))
    assert est.within(0.3, 4.5)


@pytest.mark.parametrize("y, layer", [(0.2, 0), (0.5, 1)])
def test_matches_stationary_profile(y, layer):
    mp = MacroParams(0.5, 1.0, ReservoirDensities(2, 4, 4, 2))
    est = feynman_kac_stationary(mp, y, layer, 20_000, 1e-4, make_stream(2, layer))
    exact = float(macro_profile(mp, y)[layer])
    assert est.within(exact, 4.5)


def test_reproducible():
    mp = MacroParams(0.5, 1.0, ReservoirDensities(2, 4, 4, 2))
    a = feynman_kac_stationary(mp, 0.5, 0, 1000, 1e-4, make_stream(3))
    b = feynman_kac_stationary(mp, 0.5, 0, 1000, 1e-4, make_stream(3))
    assert a == b


@pytest.mark.parametrize("kw", [dict(y=0.0), dict(y=1.0), dict(layer=2), dict(replicas=10), dict(dt=1e-3)])
def test_validation(kw):
    args = dict(y=0.5, layer=0, replicas=1000, dt=1e-4)
    args.update(kw)
    with pytest.raises(ValidationError):
        feynman_kac_stationary(MacroParams(0.5, 1.0), rng=make_stream(0), **args)
