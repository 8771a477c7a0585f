import numpy as np
import pytest

from plaplab.field import (
    CoefficientField,
    FieldSpec,
    audit_structure,
    continuity_modulus,
    evaluate_field,
    field_from_config,
    field_to_config,
    structural_constants,
)

CHECKER = CoefficientField("checkerboard", {"low": 1.0, "high": 2.0, "cell": 0.125})


def test_evaluate_identity_case():
    spec = FieldSpec(2.0, dim=3)
    np.testing.assert_allclose(evaluate_field(spec, [0.1, 0.2, 0.0], [3.0, 4.0, 0.0]), [3.0, 4.0, 0.0])


def test_evaluate_unit_vector_p3():
    spec = FieldSpec(3.0, dim=4)
    np.testing.assert_allclose(evaluate_field(spec, np.zeros(4), [0.0, 1.0, 0.0, 0.0]), [0, 1, 0, 0])


def test_evaluate_weighted_p3():
    spec = FieldSpec(3.0, dim=4, coefficient=CoefficientField("constant", {"value": 2.0}),
                     lambda_lo=2.0, lambda_hi=2.0)
    np.testing.assert_allclose(evaluate_field(spec, np.zeros(4), [2.0, 0, 0, 0]), [8.0, 0, 0, 0])


@pytest.mark.parametrize("p", [1.2, 1.8])
def test_evaluate_zero_gradient_is_zero(p):
    spec = FieldSpec(p)
    out = evaluate_field(spec, [[0.0, 0.0], [0.3, 0.1]], np.zeros((2, 2)))
    assert np.all(out == 0.0) and np.all(np.isfinite(out))


def test_matrix_coefficient():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    lo, hi = np.linalg.eigvalsh(A)
    spec = FieldSpec(1.5, coefficient=CoefficientField("constant", {"value": A}), lambda_lo=lo, lambda_hi=hi)
    xi = np.array([3.0, 4.0])
    np.testing.assert_allclose(evaluate_field(spec, [0.0, 0.0], xi), 5.0**-0.5 * A @ xi)


@pytest.mark.parametrize("p, dim", [(1.0, 2), (2.0, 2), (2.5, 2), (0.5, 3)])
def test_rejects_out_of_range_exponent(p, dim):
    with pytest.raises(ValueError):
        FieldSpec(p, dim)


def test_formal_mode_lifts_range():
    assert FieldSpec(2.5, 2, formal=True).p == 2.5


def test_rejects_coefficient_outside_bounds():
    with pytest.raises(ValueError, match="not within"):
        FieldSpec(1.5, coefficient=CHECKER, lambda_lo=1.0, lambda_hi=1.5)


def test_unknown_coefficient_kind():
    with pytest.raises(ValueError):
        CoefficientField("fractal")


def test_checkerboard_values():
    w = CHECKER(np.array([[0.01, 0.01], [0.2, 0.01], [-0.01, 0.01]]))
    np.testing.assert_array_equal(w, [1.0, 2.0, 2.0])


def test_tabulated_lookup():
    vals = np.array([[1.0, 2.0], [3.0, 4.0]])
    c = CoefficientField("tabulated", {"values": vals})
    np.testing.assert_array_equal(c(np.array([[-0.9, -0.9], [0.9, 0.9], [0.9, -0.9]])), [1, 4, 3])


def test_structural_constants():
    assert structural_constants(FieldSpec(1.5)) == (0.5, 1.0)
    assert structural_constants(FieldSpec(3.0, 4)) == (1.0, 2.0)


def test_audit_laplacian_ratio_one():
    rep = audit_structure(FieldSpec(2.0, 3), 500)
    assert rep.passed
    assert rep.upper_constant == pytest.approx(1.0, rel=1e-6)
    assert rep.lower_constant == pytest.approx(1.0, rel=1e-6)


def test_audit_p3_bounds():
    spec = FieldSpec(3.0, 4)
    assert audit_structure(spec, 1000, lam=1.0, Lam=3.0).passed
    rep = audit_structure(spec, 1000, lam=1.0, Lam=1.5)
    assert rep.lower_pass and not rep.upper_pass
    assert rep.upper_constant == pytest.approx(2.0, rel=1e-4)


def test_audit_checkerboard():
    spec = FieldSpec(2.0, 3, coefficient=CHECKER, lambda_lo=1.0, lambda_hi=2.0)
    assert audit_structure(spec, 1000, lam=1.0, Lam=2.0).passed


def test_audit_flags_tiny_gradients():
    rep = audit_structure(FieldSpec(1.5), 200, xi_range=(1e-12, 1e-6))
    assert rep.flagged > 0 and rep.samples + rep.flagged == 200


def test_audit_rejects_zero_samples():
    with pytest.raises(ValueError):
        audit_structure(FieldSpec(1.5), 0)


def test_continuity_constant_is_zero():
    out = continuity_modulus(FieldSpec(1.5), [0.1, 0.2], samples_per_radius=500)
    assert all(m == 0.0 for _, m in out)


def test_continuity_lipschitz_weight():
    coeff = CoefficientField("smooth-callable", {"profile": "radial-linear", "base": 1.0, "slope": 1.0})
    spec = FieldSpec(2.0, 3, coefficient=coeff, lambda_lo=1.0, lambda_hi=2.0)
    radii = [0.05, 0.1, 0.2]
    out = continuity_modulus(spec, radii, samples_per_radius=4000)
    for rho, m in out:
        assert 0.9 * rho <= m <= rho * (1 + 1e-9)
    assert [m for _, m in out] == sorted(m for _, m in out)


def test_continuity_checkerboard_does_not_vanish():
    spec = FieldSpec(1.5, coefficient=CHECKER, lambda_lo=1.0, lambda_hi=2.0)
    out = continuity_modulus(spec, [0.001, 0.01], samples_per_radius=20000)
    assert out[0][1] == pytest.approx(1.0)


def test_continuity_rejects_bad_radius():
    with pytest.raises(ValueError):
        continuity_modulus(FieldSpec(1.5), [0.0, 0.5])


@pytest.mark.parametrize("spec", [
    FieldSpec(1.8),
    FieldSpec(1.8, coefficient=CHECKER, lambda_lo=1.0, lambda_hi=2.0),
    FieldSpec(2.5, 3, coefficient=CoefficientField("smooth-callable", {"profile": "radial-quadratic", "amp": 0.5}),
              lambda_lo=1.0, lambda_hi=1.5),
    FieldSpec(3.0, 2, formal=True),
])
def test_config_round_trip(spec):
    back = field_from_config(field_to_config(spec))
    assert back == spec


def test_config_matrix_round_trip():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    spec = FieldSpec(1.5, coefficient=CoefficientField("constant", {"value": A}), lambda_lo=0.5, lambda_hi=2.5)
    back = field_from_config(field_to_config(spec))
    np.testing.assert_array_equal(back.coefficient.params["value"], A)


def test_config_errors():
    with pytest.raises(ValueError):
        field_from_config("dim=2\n")
    with pytest.raises(ValueError):
        field_from_config("p 1.5\n")
    with pytest.raises(ValueError):
        field_to_config(FieldSpec(1.5, coefficient=CoefficientField("smooth-callable", func=lambda X: 1 + 0 * X[..., 0])))
