from fractions import Fraction

import pytest
from hypothesis import given
import hypothesis.strategies as st

from contasep import (
    ConfigurationError,
    Line,
    ParticleConfig,
    Ring,
    density,
    run_scenario,
    scale_config,
)
from contasep.core import INFINITY
from contasep.scenarios import (
    SCENARIOS,
    adversarial_velocities,
    equispaced_obstacles,
    half_integer_counterexample,
    irregular_example,
    make_obstacles,
    poisson_obstacles,
    run_adversarial,
    run_half_integer,
    run_irregular_density,
)

F = Fraction
HALF_LINE = Line(0, INFINITY)


def test_scale_by_two_duplicates_in_place():
    x = ParticleConfig.from_iterable((0, 3), HALF_LINE)
    assert scale_config(x, 2).positions == (0, 0, 3, 3)


def test_scale_three_halves_adds_to_first_of_each_block():
    x = ParticleConfig.from_iterable((0, 1, 2, 3), HALF_LINE)
    assert scale_config(x, F(3, 2)).positions == (0, 0, 1, 2, 2, 3)


def test_scale_identity():
    x = ParticleConfig.from_iterable((0, 1, 5), HALF_LINE)
    assert scale_config(x, 1).positions == x.positions


def test_scale_rejects_nonpositive_factor():
    x = ParticleConfig.from_iterable((0,), HALF_LINE)
    with pytest.raises(ConfigurationError):
        scale_config(x, 0)


@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=4),
)
def test_scale_multiplies_ring_density_exactly(num, den, blocks):
    count = den * blocks        # ring blocks must tile the particle count
    ring = Ring(2 * count)
    x = ParticleConfig.equispaced(ring, count)
    alpha = F(num, den)
    scaled = scale_config(x, alpha)
    assert density(scaled) == alpha * density(x)


def test_equispaced_count_on_window():
    z = equispaced_obstacles(Line(0, 25), F(5, 2))
    assert z.count == 10
    with pytest.raises(ConfigurationError):
        equispaced_obstacles(Line(0, 25), 0)


def test_poisson_seeded_golden_count():
    z = poisson_obstacles(Ring(100), 0.3, seed=7, quantize=1000)
    assert z.count == 42
    assert z.positions[0] == F(163, 125)


def test_poisson_reproducible():
    a = poisson_obstacles(Ring(100), 0.3, seed=7, quantize=1000)
    b = poisson_obstacles(Ring(100), 0.3, seed=7, quantize=1000)
    assert a.positions == b.positions
    c = poisson_obstacles(Ring(100), 0.3, seed=8, quantize=1000)
    assert a.positions != c.positions


def test_poisson_rejects_bad_rate():
    with pytest.raises(ConfigurationError):
        poisson_obstacles(Ring(100), 0, seed=1)


def test_make_obstacles_dispatch():
    ring = Ring(20)
    assert make_obstacles("equispaced", ring, spacing=4).count == 5
    assert make_obstacles("poisson", ring, rate=0.5, seed=2).count > 0
    with pytest.raises(ConfigurationError):
        make_obstacles("lattice", ring)


def test_irregular_field_alternates_gap_kinds():
    z = irregular_example()
    gaps = {z.positions[k + 1] - z.positions[k] for k in range(z.count - 1)}
    assert gaps == {F(1), F(1, 2)}


def test_irregular_density_keeps_oscillating():
    result = run_irregular_density()
    assert result.passed
    assert result.details["oscillation"] == F(9, 16)
    assert result.columns == ("window", "density")


def test_half_integer_construction_support():
    x, z = half_integer_counterexample()
    assert all(p.denominator == 2 for p in x.positions)
    assert all(isinstance(p, int) for p in z.positions)


def test_half_integer_run_stays_on_lattice():
    result = run_half_integer(steps=100)
    assert result.passed
    assert result.details["max_denominator"] == 2
    assert all(denom <= 2 for _, denom in result.rows)


def test_adversarial_schedule_grows_separation():
    result = run_adversarial(steps=200)
    assert result.passed
    assert result.details["final_separation"] == 106
    assert result.details["min_ratio"] >= F(1, 10)
    # the same mechanism on the unit lattice stays bounded
    assert result.details["flat_lattice_max_separation"] <= 6


def test_adversarial_equal_starts_zero_separation():
    lattice = tuple(F(k) for k in range(30))
    _, seps = adversarial_velocities(F(3), F(3), lattice, 20)
    assert set(seps) == {0}


def test_adversarial_needs_obstacles_ahead():
    with pytest.raises(ConfigurationError):
        adversarial_velocities(F(0), F(1), (F(2),), 5)


def test_scenario_registry():
    assert set(SCENARIOS) == {"half_integer", "adversarial", "irregular_density"}
    result = run_scenario("half_integer", steps=10)
    assert result.passed
    with pytest.raises(ConfigurationError):
        run_scenario("warp_drive")
