import numpy as np
import pytest

from plaplab.radial import (
    QuadratureWarning,
    RadialProfile,
    log_constant_for_unit_source,
    p_laplacian_of_log,
    p_laplacian_of_power,
    solve_radial_dirichlet,
)


def radial_p_laplacian_fd(u, p, n, r, h=1e-4):
    """Finite-difference r^(1-n) (r^(n-1) |u'|^(p-2) u')' for an oracle check."""
    def flux(s):
        du = (u(s + h) - u(s - h)) / (2 * h)
        return s ** (n - 1) * np.abs(du) ** (p - 2) * du
    return r ** (1 - n) * (flux(r + h) - flux(r - h)) / (2 * h)


def test_power_laplacian_of_r_squared():
    assert p_laplacian_of_power(2.0, 3, 2.0) == (6.0, 0.0)


@pytest.mark.parametrize("p, theta", [(1.5, 1.25), (1.8, 1.5), (2.5, 2.0), (3.0, 4.0)])
def test_power_exponent_matches_source_exponent(p, theta):
    beta = p / (p - 1) * (theta - 1) / theta
    _, e = p_laplacian_of_power(p, 4, beta)
    assert e == pytest.approx(-p / theta)


def test_power_hand_value():
    assert p_laplacian_of_power(3.0, 4, 1.0) == (3.0, -1.0)


@pytest.mark.parametrize("p, n, beta", [(3.0, 4, 1.0), (1.5, 3, 0.6), (2.5, 4, 1.7)])
def test_power_formula_against_finite_differences(p, n, beta):
    c, e = p_laplacian_of_power(p, n, beta)
    r = np.array([0.3, 0.5, 0.8])
    np.testing.assert_allclose(radial_p_laplacian_fd(lambda s: s**beta, p, n, r), c * r**e, rtol=1e-5)


def test_power_rejects_zero_beta():
    with pytest.raises(ValueError):
        p_laplacian_of_power(2.0, 3, 0.0)


def test_log_formula():
    assert p_laplacian_of_log(2.0, 3, 1.0) == (1.0, -2.0)
    assert p_laplacian_of_log(2.0, 4, 1.0) == (2.0, -2.0)
    with pytest.raises(ValueError):
        p_laplacian_of_log(2.0, 3, 0.0)


def test_log_formula_against_finite_differences():
    coeff, e = p_laplacian_of_log(2.5, 4, 0.7)
    r = np.array([0.3, 0.6])
    np.testing.assert_allclose(radial_p_laplacian_fd(lambda s: 0.7 * np.log(s), 2.5, 4, r), coeff * r**e,
                               rtol=1e-5)


def test_log_constant():
    assert log_constant_for_unit_source(2.5, 4) == pytest.approx(0.7631, abs=1e-4)


def test_profile_moments_match_quadrature():
    from scipy.integrate import quad
    for prof in (RadialProfile.power(-0.8, 2.0), RadialProfile.power(-1.5, 1.0, cap=0.1), RadialProfile.log(1.3)):
        ref, _ = quad(lambda s: s**2 * prof(s), 0, 0.7, points=[0.1], limit=200)
        assert prof.moment(0.7, 3) == pytest.approx(ref, rel=1e-7)


def test_tabulated_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile.tabulated([0.1, 0.1, 0.2], [1, 2, 3])
    with pytest.raises(ValueError):
        RadialProfile.tabulated([0.1, 0.2], [1.0, np.inf])


def test_zero_source_constant_solution():
    res = solve_radial_dirichlet(RadialProfile.power(0.0, 0.0), 2.5, 4, boundary=5.0, nodes=1001)
    np.testing.assert_array_equal(res.u, 5.0)


@pytest.mark.parametrize("p, n", [(2.5, 4), (1.5, 3)])
def test_log_source_gives_log(p, n):
    # -Delta_p(-ln r) = (n - p) r^-p, so this source yields u = -ln r
    res = solve_radial_dirichlet(RadialProfile.power(-p, n - p), p, n)
    r = res.r[res.r > 1e-3]
    assert np.max(np.abs(res(r) + np.log(r))) < 1e-6


def test_dirichlet_value_exact():
    res = solve_radial_dirichlet(RadialProfile.power(-1.0, 2.0), 1.8, 3, boundary=0.37, nodes=501, check=False)
    assert res.u[-1] == 0.37


def test_flux_identity():
    f = RadialProfile.power(-1.2, 1.5)
    p, n = 1.8, 3
    res = solve_radial_dirichlet(f, p, n, nodes=20001, check=False)
    du = np.gradient(res.u, res.r)
    phi = np.abs(du) ** (p - 2) * du
    inner = slice(100, -100)
    np.testing.assert_allclose(res.flux[inner], phi[inner], rtol=1e-4)
    moment = np.array([f.moment(r, n) for r in res.r[::2000]])
    np.testing.assert_allclose(res.r[::2000] ** (n - 1) * res.flux[::2000] + moment, 0.0, atol=1e-8)


def test_nonnegative_source_gives_nonincreasing_u():
    res = solve_radial_dirichlet(RadialProfile.power(-0.5, 3.0), 1.6, 3, nodes=2001, check=False)
    assert np.all(np.diff(res.u) <= 0)


def test_error_halves_when_nodes_double():
    p, n, beta = 2.5, 4, 1.2
    c, e = p_laplacian_of_power(p, n, beta)
    f = RadialProfile.power(e, -c)
    errs = []
    for nodes in (251, 501, 1001):
        res = solve_radial_dirichlet(f, p, n, boundary=1.0, nodes=nodes, check=False)
        errs.append(np.max(np.abs(res.u - res.r**beta)))
    assert errs[1] <= 0.5 * errs[0] and errs[2] <= 0.5 * errs[1]


def test_non_integrable_source_rejected():
    with pytest.raises(ValueError, match="integrable"):
        solve_radial_dirichlet(RadialProfile.power(-3.0), 2.0, 3)


def test_quadrature_warning():
    f = RadialProfile.power(-0.5, 1.0)
    with pytest.warns(QuadratureWarning):
        res = solve_radial_dirichlet(f, 1.5, 3, nodes=16, tol=1e-14)
    assert not res.converged


def test_csv_export(tmp_path):
    res = solve_radial_dirichlet(RadialProfile.power(0.0, 1.0), 2.0, 3, nodes=101, check=False)
    res.to_csv(tmp_path / "u.csv")
    data = np.loadtxt(tmp_path / "u.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 0], res.r)
    np.testing.assert_array_equal(data[:, 1], res.u)
