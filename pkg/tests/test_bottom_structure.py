import numpy as np
import pytest

from lentparticle.bottom_structure import (
    BottomStructure,
    check_ellipticity,
    from_expressions,
    gamma_matrix,
    gamma_scalar,
    gradient_flat,
    intro_1d,
    isotropic,
    psi_over_k,
    standard_instances,
)
from lentparticle.errors import InputError, StructureError
from lentparticle.rng import DOMAIN_RHO, stream


def test_intro_weight_values():
    bs = intro_1d()
    # weight is u^2 inside |u| < 1/2 and 0 outside
    assert bs.weight(np.array([0.3]))[0, 0] == pytest.approx(0.09)
    assert bs.weight(np.array([0.7]))[0, 0] == 0.0
    assert bs.weight(np.array([-0.2]))[0, 0] == pytest.approx(0.04)


def test_zero_over_zero_convention():
    bs = intro_1d()
    # outside the carrier both psi and k vanish; the ratio is defined as 0
    w = bs.weight(np.array([2.0]))
    assert np.all(w == 0.0)
    assert np.all(bs.factor(np.array([2.0])) == 0.0)


def test_isotropic_weight_capped():
    bs = isotropic(2, cap=1.0)
    w = bs.weight(np.array([0.3, 0.4]))
    assert np.allclose(w, 0.25 * np.eye(2))
    w_big = bs.weight(np.array([3.0, 4.0]))
    assert np.allclose(w_big, np.eye(2))


def test_factor_is_square_root_of_weight():
    for bs, u in [
        (intro_1d(), np.array([0.3])),
        (isotropic(2), np.array([0.2, -0.1])),
        (psi_over_k(), np.array([0.7])),
    ]:
        L = bs.factor(u)
        assert np.allclose(L @ L.T, bs.weight(u), atol=1e-14)


def test_gamma_scalar_matches_weight_quadratic_form():
    bs = intro_1d()
    u = np.array([0.25])
    grad = np.array([3.0])
    assert gamma_scalar(grad, u, bs) == pytest.approx(9.0 * 0.0625)


def test_gamma_matrix_psd_and_symmetric():
    bs = isotropic(2)
    jac = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    u = np.array([0.1, 0.2])
    g = gamma_matrix(jac, u, bs)
    assert np.allclose(g, g.T)
    assert np.min(np.linalg.eigvalsh(g)) >= -1e-14
    assert np.allclose(g, jac @ bs.weight(u) @ jac.T)


def test_gradient_flat_chain_rule_per_draw():
    # the product and composition rules must hold for each draw exactly,
    # not only in distribution
    bs = isotropic(2)
    u = np.array([0.3, -0.2])
    rho = stream(5, DOMAIN_RHO).standard_normal(2)
    grad_f = np.array([1.0, 2.0])
    grad_g = np.array([-0.5, 0.25])
    f_val, g_val = 1.3, -0.7
    flat_f = gradient_flat(grad_f, u, rho, bs)
    flat_g = gradient_flat(grad_g, u, rho, bs)
    flat_fg = gradient_flat(g_val * grad_f + f_val * grad_g, u, rho, bs)
    assert flat_fg == pytest.approx(g_val * flat_f + f_val * flat_g, rel=1e-13)
    # composition with phi(y) = y^3: gradient scales by phi'(f)
    flat_phi = gradient_flat(3.0 * f_val ** 2 * grad_f, u, rho, bs)
    assert flat_phi == pytest.approx(3.0 * f_val ** 2 * flat_f, rel=1e-13)


def test_gradient_flat_constant_is_zero():
    bs = intro_1d()
    rho = stream(6, DOMAIN_RHO).standard_normal(1)
    assert gradient_flat(np.array([0.0]), np.array([0.3]), rho, bs) == 0.0


def test_second_moment_reproduces_gamma():
    # E[(grad . L rho)^2] = gamma[f]; checked by seeded Monte Carlo
    bs = isotropic(2)
    u = np.array([0.25, 0.15])
    grad = np.array([2.0, -1.0])
    target = gamma_scalar(grad, u, bs)
    g = stream(11, DOMAIN_RHO)
    draws = g.standard_normal((200_000, 2))
    flats = np.array([gradient_flat(grad, u, rho, bs) for rho in draws[:2000]])
    # vectorised equivalent for the full sample
    L = bs.factor(u)
    all_flats = draws @ (grad @ L)
    assert np.allclose(flats, all_flats[:2000])
    est = float(np.mean(all_flats ** 2))
    se = float(np.std(all_flats ** 2) / np.sqrt(draws.shape[0]))
    assert abs(est - target) < 4 * se


def test_gamma_independent_of_factor_choice():
    # two different square roots of the same weight give the same gamma
    w = np.array([[2.0, 0.6], [0.6, 1.0]])
    chol = np.linalg.cholesky(w)
    vals, vecs = np.linalg.eigh(w)
    sym_root = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
    assert not np.allclose(chol, sym_root)
    jac = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert np.allclose(jac @ chol @ chol.T @ jac.T, jac @ sym_root @ sym_root.T @ jac.T)


def test_structure_psi_exceeding_k_rejected():
    bs = BottomStructure(
        mark_dimension=1,
        support=lambda u: bool(abs(u[0]) > 0),
        density=lambda u: 1.0,
        psi=lambda u: 2.0,
        xi=lambda u: np.eye(1),
        name="bad",
    )
    with pytest.raises(StructureError):
        bs.weight(np.array([0.5]))


def test_asymmetric_xi_rejected():
    bs = BottomStructure(
        mark_dimension=2,
        support=lambda u: True,
        density=lambda u: 1.0,
        psi=lambda u: 1.0,
        xi=lambda u: np.array([[1.0, 0.5], [0.0, 1.0]]),
        name="bad",
    )
    with pytest.raises(StructureError):
        bs.weight(np.array([0.1, 0.1]))


def test_standard_catalog():
    cat = standard_instances()
    assert set(cat) == {"INTRO_1D", "ISOTROPIC_RD", "PSI_OVER_K"}
    assert cat["INTRO_1D"].mark_dimension == 1
    assert cat["ISOTROPIC_RD"].mark_dimension == 2


def test_check_ellipticity():
    bs = isotropic(2)
    pts = np.array([[0.1, 0.0], [0.0, 0.2], [0.5, 0.5]])
    lo, hi = check_ellipticity(bs, pts)
    assert 0 < lo <= hi
    with pytest.raises(InputError):
        check_ellipticity(bs, np.array([[0.0, 0.0]]))  # origin outside support


def test_from_expressions_structure():
    bs = from_expressions("1", "1", ["u1^2 * ind(0.5)"], 1)
    assert bs.weight(np.array([0.2]))[0, 0] == pytest.approx(0.04)
    assert bs.weight(np.array([0.8]))[0, 0] == 0.0
    with pytest.raises(InputError):
        from_expressions("1", "1", ["u1", "u2"], 1)
