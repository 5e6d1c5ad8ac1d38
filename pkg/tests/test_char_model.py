import numpy as np
import pytest

from martcomp.char_model import (DiffChar, IntegratorSpec, JumpKernel, ProcessModel, brownian,
                                 characteristic_integrals, levy_model, merge_integrators, rebase_characteristics)
from martcomp.errors import ConfigurationError, DataError, IntegrabilityError
from martcomp.laws import Normal, PointMass


def test_merge_identical_lebesgue():
    a = IntegratorSpec.lebesgue(1.0)
    m = merge_integrators(a, a)
    assert m.kind == "lebesgue" and m.atoms == ()


def test_merge_union_of_atoms():
    m = merge_integrators(IntegratorSpec.with_atoms(1.0, [0.5]), IntegratorSpec.with_atoms(1.0, [0.25, 0.5]))
    assert m.atoms == (0.25, 0.5)
    assert m.kind == "lebesgue_plus_atoms"


def test_merge_lebesgue_with_atoms_assigns_zero_mass():
    a = IntegratorSpec.lebesgue(1.0)
    b = IntegratorSpec.with_atoms(1.0, [0.3])
    m = merge_integrators(a, b)
    assert m.atoms == (0.3,)
    chars = DiffChar.constant(0.0, 1.0, JumpKernel.compound_poisson(1.0, Normal(0, 1)))
    rebased = rebase_characteristics(chars, m)
    assert rebased.atom_measure(0.3).is_zero
    ts = [0.2, 0.3, 0.7, 1.0]
    fns = [lambda y: y * y, lambda y: np.abs(y)]
    i0 = characteristic_integrals(chars, ts, fns)
    i1 = characteristic_integrals(rebased, ts, fns)
    for key in ("B", "C", "nu"):
        assert np.array_equal(i0[key], i1[key])


def test_merge_horizon_mismatch():
    with pytest.raises(ConfigurationError):
        merge_integrators(IntegratorSpec.lebesgue(1.0), IntegratorSpec.lebesgue(2.0))


def test_merge_commutative_idempotent():
    a = IntegratorSpec.with_atoms(1.0, [0.1, 0.6])
    b = IntegratorSpec.with_atoms(1.0, [0.6, 0.9])
    assert merge_integrators(a, b) == merge_integrators(b, a)
    assert merge_integrators(a, a).atoms == a.atoms


def test_rebase_grigelionis_extra_atom():
    ak = JumpKernel.atom_kernel({0.5: (1.0, Normal(0, 0.1))})
    chars = DiffChar.constant(0.0, 0.04, atom_kernel=ak)
    merged = IntegratorSpec.with_atoms(1.0, [0.25, 0.5])
    r = rebase_characteristics(chars, merged)
    assert r.atom_measure(0.25).is_zero
    assert r.atom_drift(0.25)[0] == 0.0
    assert r.atom_measure(0.5).intensity == 1.0


def test_rebase_cp_validation_integral():
    chars = DiffChar.constant(0.0, 0.0, JumpKernel.compound_poisson(1.0, Normal(0, 1)))
    r = rebase_characteristics(chars, IntegratorSpec.with_atoms(1.0, [0.5]))
    a = characteristic_integrals(chars, [1.0], [lambda y: y * y])["nu"]
    b = characteristic_integrals(r, [1.0], [lambda y: y * y])["nu"]
    assert abs(a[0, 0] - b[0, 0]) <= 1e-12


def test_rebase_requires_atom_subset():
    ak = JumpKernel.atom_kernel({0.5: (1.0, Normal(0, 0.1))})
    chars = DiffChar.constant(0.0, 0.04, atom_kernel=ak)
    with pytest.raises(ConfigurationError):
        rebase_characteristics(chars, IntegratorSpec.with_atoms(1.0, [0.25]))


def test_integrator_invariants():
    with pytest.raises(ConfigurationError):
        IntegratorSpec(1.0, (0.5,), "lebesgue")
    with pytest.raises(ConfigurationError):
        IntegratorSpec(1.0, (0.5, 0.2), "lebesgue_plus_atoms")
    with pytest.raises(ConfigurationError):
        IntegratorSpec.with_atoms(1.0, [1.5])


def test_levy_density_integrability_checked():
    with pytest.raises(IntegrabilityError):
        JumpKernel.power_law(2.5)


def test_diffusion_must_be_psd():
    with pytest.raises(DataError):
        DiffChar.constant([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DataError):
        DiffChar.constant([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])


def test_levy_family_constant():
    m = levy_model(0.1, 0.2, JumpKernel.compound_poisson(1.0, PointMass(1.0)))
    xs = np.random.default_rng(0).normal(size=(1000, 1))
    assert np.all(m.chars.drift_at(0.3, xs) == 0.1)
    state_dep = DiffChar(lambda t, x: x, lambda t, x: np.ones((len(x), 1, 1)), JumpKernel.none(),
                         IntegratorSpec.lebesgue(1.0))
    with pytest.raises(ConfigurationError):
        ProcessModel("levy", state_dep, [0.0])


def test_grigelionis_needs_atoms():
    with pytest.raises(ConfigurationError):
        ProcessModel("grigelionis", brownian().chars, [0.0])
