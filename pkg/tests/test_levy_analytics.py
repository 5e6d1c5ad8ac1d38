import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martcomp.char_model import DiffChar, JumpKernel, brownian, levy_model, point_jumps
from martcomp.errors import DensityUnavailableError, IntegrabilityError
from martcomp.laws import Normal
from martcomp.levy_analytics import (SpatialGrid, char_exponent, char_function, density_fft, find_truncation,
                                     is_special, is_type_C, second_moment_from_exponent, small_jump_activity,
                                     smoothness_order)


def gauss(x, var):
    return np.exp(-x * x / (2 * var)) / np.sqrt(2 * np.pi * var)


def test_exponent_gaussian():
    assert char_exponent(DiffChar.constant(0.0, 1.0), 1.0) == pytest.approx(-0.5)


def test_exponent_compensated_point_jump():
    chars = DiffChar.constant(0.0, 0.0, point_jumps(1.0, 1.0))
    assert complex(char_exponent(chars, np.pi)) == pytest.approx(-2 - 1j * np.pi, abs=1e-12)


@given(st.floats(-2, 2), st.floats(0, 2), st.floats(0, 3))
@settings(max_examples=30, deadline=None)
def test_exponent_at_zero_and_conjugate(b, c, lam):
    chars = DiffChar.constant(b, c, JumpKernel.compound_poisson(lam, Normal(0.3, 0.7)))
    assert abs(complex(char_exponent(chars, 0.0))) == 0.0
    z = 1.7
    assert complex(char_exponent(chars, -z)) == pytest.approx(np.conj(complex(char_exponent(chars, z))))


def test_exponent_not_special():
    k = JumpKernel.levy_density(lambda x: np.where(np.abs(x) > 1, np.abs(x) ** -2.0, 0.0), 0.0, (1.0, np.inf))
    with pytest.raises(IntegrabilityError):
        char_exponent(DiffChar.constant(0.0, 0.0, k), 1.0)


@pytest.mark.parametrize("c", [1.0, 0.04])
def test_density_gaussian(c):
    cf = char_function(brownian(c))
    grid = SpatialGrid.from_extent(8.0, 1 / 64)
    d = density_fft(cf, 1.0, grid)
    assert np.max(np.abs(np.atleast_2d(d.values)[0] - gauss(d.states, c))) <= 1e-6
    assert d.mass()[0] == pytest.approx(1.0, abs=1e-4)


def test_density_small_time_refused():
    with pytest.raises(DensityUnavailableError):
        density_fft(char_function(brownian()), 1e-5)


def test_density_cp_refused():
    with pytest.raises(DensityUnavailableError):
        density_fft(char_function(levy_model(kernel=point_jumps(1.0, 1.0))), 1.0)


def test_smoothness():
    assert all(smoothness_order(char_function(brownian()), 1.0, n) for n in range(5))
    assert not smoothness_order(char_function(levy_model(kernel=point_jumps(1.0, 1.0))), 1.0, 0)
    mix = levy_model(c=0.04, kernel=JumpKernel.compound_poisson(0.5, Normal(0, 0.2)))
    assert smoothness_order(char_function(mix), 1.0, 2)


def test_type_C():
    assert is_type_C(DiffChar.constant(0.0, 1.0))
    assert not is_type_C(DiffChar.constant(0.0, 0.0, JumpKernel.compound_poisson(1.0, Normal(0, 1))))
    assert is_type_C(DiffChar.constant(0.0, 0.0, JumpKernel.power_law(1.5)))


def test_special():
    assert is_special(JumpKernel.none())
    assert is_special(JumpKernel.compound_poisson(2.0, Normal(0, 1)))
    heavy = JumpKernel.levy_density(lambda x: np.where(np.abs(x) > 1, np.abs(x) ** -2.0, 0.0), 0.0,
                                    (1.0, np.inf))
    assert not is_special(heavy)


def test_small_jump_activity():
    assert small_jump_activity(JumpKernel.power_law(1.5), 0.5)
    assert not small_jump_activity(JumpKernel.compound_poisson(1.0, Normal(0, 1)), 0.5)
    assert not small_jump_activity(JumpKernel.none(), 0.5)


@pytest.mark.parametrize("factor", [1.0, 3.0])
def test_classifiers_monotone_in_scaling(factor):
    k = JumpKernel.power_law(1.5).scaled(factor)
    assert is_type_C(DiffChar.constant(0.0, 0.0, k))
    assert small_jump_activity(k, 0.5)


def test_plancherel_second_moment():
    m = levy_model(c=0.04, kernel=JumpKernel.compound_poisson(0.5, Normal(0, 0.2)))
    cf = char_function(m)
    d = density_fft(cf, 1.0)
    x, p = d.states, np.atleast_2d(d.values)[0]
    m2 = float(np.sum(x * x * p) * d.spacing)
    assert m2 == pytest.approx(second_moment_from_exponent(cf, 1.0), rel=1e-4)
    assert m2 == pytest.approx(0.06, rel=1e-4)


def test_truncation_variance_rule():
    k = JumpKernel.power_law(1.5)
    eps = find_truncation(k, 1e-4)
    small = 4.0 * np.sqrt(eps)
    assert small == pytest.approx(1e-4 * k.second_moment(), rel=1e-3)


def test_density_csv(tmp_path):
    d = density_fft(char_function(brownian()), 1.0, SpatialGrid.from_extent(4.0, 1 / 8))
    path = d.to_csv(tmp_path / "p.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,p"
    assert len(lines) == 1 + d.states.size
