import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martcomp import payoffs as P
from martcomp.char_model import DiffChar, JumpKernel, brownian, levy_model
from martcomp.errors import DataError, DomainError
from martcomp.laws import Normal, PointMass
from martcomp.mc_engine import simulate_paths
from martcomp.ordering import (OrderVerdict, TestFunctionFamily, compare_diffusion, compare_drift, compare_kernels,
                               family_check, h_field_test, key_inequality, linking_drift_scan, make_family,
                               tolerance_scale)
from martcomp.propagation import compute_G_convolution, field_from_functions

SQ = field_from_functions(lambda t, x: x * x + 1 - t, lambda t, x: 2 * x, lambda t, x: 2 + 0 * x,
                          lambda t, x: -1 + 0 * x, 1.0, 1 / 32, 1 / 64, 6.0)
Y2 = TestFunctionFamily("cx", (("y^2", lambda y: np.asarray(y, dtype=float).reshape(-1) ** 2),))


def test_verdict_invariants():
    with pytest.raises(ValueError):
        OrderVerdict("violated")
    with pytest.raises(ValueError):
        OrderVerdict("maybe")


def test_drift_examples():
    v = compare_drift([0.2], [0.2])
    assert v.status == "ordered" and v.margin_min == 0 and v.equal
    v = compare_drift([0.05], [0.1])
    assert v.status == "ordered" and v.margin_min == pytest.approx(0.05)
    v = compare_drift([[0.0, 0.2]], [[0.1, 0.1]])
    assert v.status == "violated" and v.witnesses[0]["component"] == 2


def test_diffusion_examples():
    c = np.array([[2.0, 0.3], [0.3, 1.0]])
    for mode in ("psd", "componentwise"):
        assert compare_diffusion(c, c, mode).status == "ordered"
        v = compare_diffusion(0.01, 0.04, mode)
        assert v.status == "ordered" and v.margin_min == pytest.approx(0.03)
    v = compare_diffusion(np.diag([1.0, 3.0]), np.diag([2.0, 2.0]), "psd")
    assert v.status == "violated"
    assert v.witnesses[0]["min_eigenvalue"] == pytest.approx(-1.0)
    assert v.witnesses[0]["max_eigenvalue"] == pytest.approx(1.0)
    v = compare_diffusion(np.diag([1.0, 3.0]), np.diag([2.0, 2.0]), "componentwise")
    assert v.status == "violated" and v.witnesses[0]["entry"] == [2, 2]


def test_diffusion_asymmetric():
    with pytest.raises(DataError):
        compare_diffusion(np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2))


def test_psd_ordered_implies_quadratic_form(rng):
    for _ in range(20):
        a = rng.normal(size=(3, 3))
        cY = a @ a.T
        b = rng.normal(size=(3, 3))
        cX = cY + b @ b.T
        assert compare_diffusion(cY, cX, "psd").status == "ordered"
        x = rng.normal(size=(1000, 3))
        q = np.einsum("ni,ij,nj->n", x, cX - cY, x)
        assert np.all(q >= -1e-9 * np.abs(cX).max() * np.sum(x * x, axis=1))


def test_kernel_examples():
    k1 = JumpKernel.compound_poisson(1.0, Normal(0, 1))
    k2 = JumpKernel.compound_poisson(2.0, Normal(0, 1))
    assert compare_kernels(k1, k1, make_family("cx")).status == "ordered"
    assert compare_kernels(k1, k2, Y2).status == "ordered"
    v = compare_kernels(JumpKernel.compound_poisson(1.0, PointMass(2.0)),
                        JumpKernel.compound_poisson(2.0, PointMass(1.0)), Y2)
    assert v.status == "violated"
    assert v.witnesses[0]["generator"] == "y^2" and v.witnesses[0]["margin"] == pytest.approx(-2.0)


def test_kernel_generator_order_invariance():
    fam = make_family("cx")
    rev = TestFunctionFamily("cx", tuple(reversed(fam.generators)))
    k1 = JumpKernel.compound_poisson(1.0, Normal(0.2, 1))
    k2 = JumpKernel.compound_poisson(1.5, Normal(0, 0.8))
    a, b = compare_kernels(k1, k2, fam), compare_kernels(k1, k2, rev)
    assert a.status == b.status and a.margin_min == b.margin_min
    assert sorted(w["generator"] for w in a.witnesses) == sorted(w["generator"] for w in b.witnesses)


def test_kernel_divergent_generators_skipped():
    fam = TestFunctionFamily("cx", (("abs", lambda y: np.abs(np.asarray(y).reshape(-1))),))
    v = compare_kernels(JumpKernel.power_law(1.5), JumpKernel.power_law(1.5), fam)
    assert v.status == "inconclusive" and v.details["skipped"] == ["abs"]


@pytest.mark.parametrize("tag,d", [("cx", 1), ("cx", 2), ("icx", 2), ("dcx", 2), ("idcx", 2), ("dcx", 3)])
def test_families_satisfy_tags(tag, d):
    assert all(family_check(make_family(tag, d)).values())


def test_h_field_test_cp():
    m = levy_model(c=0.04, kernel=JumpKernel.compound_poisson(2.0, Normal(0, 1)))
    fld = compute_G_convolution(m, P.call(0.0), 1 / 32, 1 / 64, 12.0)
    k1 = JumpKernel.compound_poisson(1.0, Normal(0, 1))
    v = h_field_test(fld, k1, m.chars.kernel, [(0.25, np.linspace(-2, 2, 17)), (0.5, np.array([0.0]))])
    assert v.status == "ordered"


def test_key_inequality_examples():
    y = np.linspace(-1, 1, 5)
    a, b = brownian(0.01).chars, brownian(0.04).chars
    assert np.allclose(key_inequality(SQ, a, a, 0.3, y), 0.0)
    assert np.allclose(key_inequality(SQ, a, b, 0.3, y), -0.03)
    assert np.allclose(key_inequality(SQ, b, a, 0.3, y), 0.03)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.floats(0.0, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=25, deadline=None)
def test_key_inequality_antisymmetric(cy, cx, by, bx, ly, lx):
    y = np.linspace(-1, 1, 5)
    a = levy_model(by, cy, JumpKernel.compound_poisson(ly, Normal(0, 0.5))).chars
    b = levy_model(bx, cx, JumpKernel.compound_poisson(lx, Normal(0.1, 0.3))).chars
    k1 = key_inequality(SQ, a, b, 0.4, y, with_drift=True)
    k2 = key_inequality(SQ, b, a, 0.4, y, with_drift=True)
    assert np.allclose(k1, -k2, atol=1e-10 * SQ.scale)


def test_proof_decomposition_consistency():
    m = levy_model(c=0.09, kernel=JumpKernel.compound_poisson(2.0, Normal(0, 0.5)))
    fld = compute_G_convolution(m, P.call(0.0), 1 / 32, 1 / 64, 10.0)
    Yc = levy_model(c=0.04, kernel=JumpKernel.compound_poisson(1.0, Normal(0, 0.5))).chars
    ys = np.linspace(-2, 2, 21)
    assert compare_diffusion(0.04, 0.09).status == "ordered"
    assert h_field_test(fld, Yc.kernel, m.chars.kernel, [(0.3, ys)]).status == "ordered"
    assert np.all(key_inequality(fld, Yc, m.chars, 0.3, ys) <= 1e-9 * fld.scale)


@pytest.fixture(scope="module")
def bachelier_fields():
    f = P.call(0.0)
    return {"X": compute_G_convolution(brownian(0.2 ** 2), f, 1 / 64, 1 / 128, 4.0),
            "Xr": compute_G_convolution(brownian(0.2 ** 2), f, 1 / 64, 1 / 128, 4.0)}


def test_linking_examples(bachelier_fields):
    fld = bachelier_fields["X"]
    X = brownian(0.2 ** 2)
    same = linking_drift_scan(simulate_paths(X, 200, 32, 1), fld, X.chars, X.chars)
    assert same.violation_fraction == 0.0 and same.max_value == 0.0
    lo = brownian(0.1 ** 2)
    rep = linking_drift_scan(simulate_paths(lo, 500, 32, 2), fld, lo.chars, X.chars)
    assert rep.violation_fraction == 0.0
    hi = brownian(0.3 ** 2)
    rep = linking_drift_scan(simulate_paths(hi, 500, 32, 3), fld, hi.chars, X.chars)
    assert rep.interior_violation_fraction >= 0.99


def test_linking_domain_error(bachelier_fields):
    wide = brownian(25.0)
    with pytest.raises(DomainError):
        linking_drift_scan(simulate_paths(wide, 200, 32, 4), bachelier_fields["X"], wide.chars,
                           brownian(0.04).chars)


def test_tolerance_scale_context():
    with tolerance_scale(1e9):
        assert compare_drift([0.1 + 1e-3], [0.1]).status == "ordered"
    assert compare_drift([0.1 + 1e-3], [0.1]).status == "reversed"
