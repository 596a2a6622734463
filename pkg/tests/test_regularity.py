import math

import numpy as np
import pytest

from heisenmix.core.errors import DomainError
from heisenmix.core.fields import FieldWithExterior, Grid
from heisenmix.core.functions import parse_function
from heisenmix.core.hgroup import GaugeBall, GroupPoint
from heisenmix.core.regularity import (
    DyadicProfile,
    HolderFit,
    ProfileEntry,
    contraction_rate,
    dyadic_profile,
    fit_holder,
    oscillation,
)


@pytest.fixture(scope="module")
def fine_grid():
    ball = GaugeBall(GroupPoint.origin(), 0.5)
    return Grid((-0.5, -0.5, -0.25), (0.5, 0.5, 0.25), (33, 33, 513), ball)


def power_field(grid, p):
    fn = parse_function(f"gauge_pow:{p}")
    return FieldWithExterior.from_functions(grid, fn, parse_function("const:0"))


@pytest.mark.parametrize("p", [0.5, 0.75])
def test_power_profile_recovers_the_exponent(fine_grid, p):
    u = power_field(fine_grid, p)
    profile = dyadic_profile(u, 3, radius=0.5)
    assert [e.k for e in profile.entries] == [0, 1, 2, 3]
    assert not profile.truncated
    fit = fit_holder(profile)
    assert fit.gamma == pytest.approx(p, abs=0.05)
    assert all(e.osc <= fit.C_fit * e.radius ** fit.gamma * (1 + 1e-12) for e in profile.entries)
    rate = contraction_rate(profile)
    assert rate.worst_ratio < 1.0
    assert rate.worst_ratio == pytest.approx(2.0 ** (-p), abs=0.05)


def test_oscillation_over_a_ball(fine_grid):
    u = power_field(fine_grid, 1.0)
    osc = oscillation(u, GaugeBall(GroupPoint.origin(), 0.25))
    assert 0.2 < osc < 0.25
    with pytest.raises(DomainError):
        oscillation(u, GaugeBall(GroupPoint.origin(), 1e-4))


def test_constant_field_is_reported_constant(unit_ball):
    grid = Grid.covering(unit_ball, 0.25)
    u = FieldWithExterior.from_functions(grid, parse_function("const:3"), parse_function("const:3"))
    profile = dyadic_profile(u, 2)
    fit = fit_holder(profile)
    assert fit.constant
    assert fit.C_fit == 0.0 and fit.gamma == 1.0
    with pytest.raises(DomainError):
        contraction_rate(profile)


def test_profile_truncates_on_coarse_grids(unit_ball):
    grid = Grid.covering(unit_ball, 0.5)
    u = power_field(grid, 0.5)
    profile = dyadic_profile(u, 10)
    assert profile.truncated
    assert profile.warnings
    assert len(profile.entries) < 11
    assert profile.to_dict()['truncated'] is True
    with pytest.raises(DomainError):
        dyadic_profile(u, -1)


def test_fit_needs_three_resolved_entries():
    entries = [ProfileEntry(0, 1.0, 1.0, 50), ProfileEntry(1, 0.5, 0.5, 20), ProfileEntry(2, 0.25, 0.25, 3)]
    with pytest.raises(DomainError):
        fit_holder(DyadicProfile(entries, [0.0, 0.0, 0.0]), min_nodes=8)
    fit = fit_holder(DyadicProfile(entries, [0.0, 0.0, 0.0]), min_nodes=2)
    assert fit.gamma == pytest.approx(1.0)
    assert fit.ks == [0, 1, 2]


def test_fit_clamps_growing_profiles():
    entries = [ProfileEntry(k, 2.0 ** -k, 4.0 ** -k, 100) for k in range(4)]
    assert fit_holder(DyadicProfile(entries, [0.0] * 3)).gamma == 1.0
    growing = [ProfileEntry(k, 2.0 ** -k, 2.0 ** k, 100) for k in range(4)]
    assert fit_holder(DyadicProfile(growing, [0.0] * 3)).gamma == pytest.approx(1e-6)


def test_holder_delta():
    assert HolderFit(1.0, 0.5).delta == pytest.approx(1.0 - 1.0 / math.sqrt(2.0))
    rate = contraction_rate(DyadicProfile([ProfileEntry(0, 1.0, 1.0, 9), ProfileEntry(1, 0.5, 0.6, 9),
                                           ProfileEntry(2, 0.25, 0.3, 9)], [0.0] * 3))
    assert rate.worst_ratio == pytest.approx(0.6)
    assert rate.delta == pytest.approx(0.4)
    np.testing.assert_allclose(rate.ratios, [0.6, 0.5])
