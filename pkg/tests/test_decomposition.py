import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdtomo.decomposition import (
    NonUnitaryTargetError,
    ReflectionError,
    axis_angle,
    coherent_error,
    decompose,
    infidelity_from_error,
    markovian_error,
    nonmarkovian_error,
    polar_decompose,
    relative_transform,
)
from tsdtomo.reps import entanglement_fidelity, ptm_of_unitary, rotation_matrix, rx

from conftest import random_axis, random_cptp_ptm

RX_PI = ptm_of_unitary(rx(np.pi))
C05 = np.exp(-((0.05 * np.pi) ** 2) / 2)  # 0.98774


def embed(block, t=(0, 0, 0)):
    T = np.eye(4)
    T[1:, 1:] = block
    T[1:, 0] = t
    return T


def rodrigues_batch(vecs):
    """Rotation matrices for an (n, 3) array of rotation vectors."""
    theta = np.linalg.norm(vecs, axis=1)
    safe = np.where(theta > 0, theta, 1.0)
    k = vecs / safe[:, None]
    K = np.zeros((len(vecs), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -k[:, 2], k[:, 1]
    K[:, 1, 0], K[:, 1, 2] = k[:, 2], -k[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -k[:, 1], k[:, 0]
    s, c = np.sin(theta)[:, None, None], np.cos(theta)[:, None, None]
    return np.eye(3) + s * K + (1 - c) * K @ K


def mc_gaussian_block(theta, s, n=10**6, seed=0):
    """Average Bloch rotation about x over theta + N(0, s^2), by direct sampling."""
    phi = theta + s * np.random.default_rng(seed).standard_normal(n)
    c, si = np.cos(phi).mean(), np.sin(phi).mean()
    return np.array([[1, 0, 0], [0, c, -si], [0, si, c]])


# -- markovian_error --------------------------------------------------------------------

def test_markovian_zero_for_equal(rng):
    T = random_cptp_ptm(rng)
    assert markovian_error(T, T) == 0.0


def test_markovian_single_entry():
    T = np.eye(4)
    T[1, 0] = 0.1
    assert np.isclose(markovian_error(np.eye(4), T), 0.01)


def test_markovian_amplitude_damping_like():
    gamma = 0.05
    T = embed(np.diag([np.sqrt(1 - gamma), np.sqrt(1 - gamma), 1 - gamma]), t=(0, 0, gamma))
    assert np.isclose(markovian_error(np.eye(4), T), gamma**2)


def test_markovian_ignores_bloch_blocks(rng):
    Ti, Te = random_cptp_ptm(rng), random_cptp_ptm(rng)
    base = markovian_error(Ti, Te)
    for _ in range(20):
        Ti[1:, 1:] = rng.normal(size=(3, 3))
        Te[1:, 1:] = rng.normal(size=(3, 3))
        assert markovian_error(Ti, Te) == base


# -- relative_transform -----------------------------------------------------------------

def test_relative_transform_identity():
    T = ptm_of_unitary(rx(0.7))
    assert np.allclose(relative_transform(T, T), np.eye(3), atol=1e-15)


def test_relative_transform_over_rotation():
    M = relative_transform(RX_PI, ptm_of_unitary(rx(1.1 * np.pi)))
    assert np.allclose(M, rotation_matrix([1, 0, 0], 0.1 * np.pi), atol=1e-14)


def test_relative_transform_gaussian_average():
    s = 0.05 * np.pi
    T_avg = embed(mc_gaussian_block(np.pi, s))
    M = relative_transform(RX_PI, T_avg)
    c = np.exp(-s**2 / 2)
    assert np.allclose(M, np.diag([1, c, c]), atol=3e-3)


def test_relative_transform_preserves_distance(rng):
    for _ in range(20):
        Ti = ptm_of_unitary(rx(rng.uniform(0, 2 * np.pi)))
        Te = random_cptp_ptm(rng)
        M = relative_transform(Ti, Te)
        assert np.isclose(np.sum((Ti[1:, 1:] - Te[1:, 1:]) ** 2), np.sum((np.eye(3) - M) ** 2), atol=1e-10)


def test_relative_transform_rejects_non_unitary_target():
    with pytest.raises(NonUnitaryTargetError):
        relative_transform(np.diag([1, 0.9, 1, 1]), np.eye(4))


# -- polar_decompose --------------------------------------------------------------------

def test_polar_of_orthogonal():
    R0 = rotation_matrix(random_axis(np.random.default_rng(1)), 0.4)
    f = polar_decompose(R0)
    assert np.allclose(f.P, np.eye(3), atol=1e-12) and np.allclose(f.R, R0, atol=1e-12)
    assert f.det_flag == 1


def test_polar_of_symmetric_psd(rng):
    A = rng.normal(size=(3, 3))
    S = A @ A.T + 0.1 * np.eye(3)
    f = polar_decompose(S)
    assert np.allclose(f.P, S, atol=1e-12) and np.allclose(f.R, np.eye(3), atol=1e-12)


def test_polar_squeeze_times_rotation():
    P0 = np.diag([C05, C05, 1.0])
    R0 = rotation_matrix([0, 0, 1], 0.05)
    f = polar_decompose(P0 @ R0)
    assert np.allclose(f.P, P0, atol=1e-9) and np.allclose(f.R, R0, atol=1e-9)


def test_polar_invariants(rng):
    for _ in range(200):
        M = rng.normal(size=(3, 3))
        f = polar_decompose(M)
        assert np.linalg.norm(f.P - f.P.T) < 1e-10
        assert np.linalg.eigvalsh(f.P).min() >= -1e-10
        assert np.linalg.norm(f.R @ f.R.T - np.eye(3)) < 1e-10
        assert np.linalg.norm(f.P @ f.R - M) < 1e-9
        assert f.det_flag == (1 if np.linalg.det(M) > 0 else -1)


def test_polar_flags_rank_deficiency():
    assert polar_decompose(np.diag([1.0, 1.0, 0.0])).rank_deficient


def test_polar_is_nearest_rotation(rng):
    # grid of rotation vectors around the identity, step 0.01
    g = np.arange(-0.3, 0.3 + 1e-9, 0.01)
    grid = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    Rs = rodrigues_batch(grid)
    for _ in range(10):
        R_true = rotation_matrix(random_axis(rng), rng.uniform(0, 0.2))
        M = (np.eye(3) + 0.05 * rng.normal(size=(3, 3))) @ R_true
        f = polar_decompose(M)
        brute = np.min(np.sum((Rs - M) ** 2, axis=(1, 2)))
        assert np.sum((f.R - M) ** 2) <= brute + 1e-12
        # and the grid optimum sits next to the SVD answer
        best = Rs[np.argmin(np.sum((Rs - M) ** 2, axis=(1, 2)))]
        assert np.linalg.norm(best - f.R) < 0.03


# -- coherent / non-Markovian magnitudes ------------------------------------------------

def test_coherent_examples():
    assert coherent_error(np.eye(3)) == 0.0
    assert np.isclose(coherent_error(rotation_matrix([1, 0, 0], 0.1 * np.pi)), 0.19577, atol=1e-5)
    assert np.isclose(coherent_error(rotation_matrix([0, 1, 0], np.pi)), 8.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-np.pi, np.pi, allow_nan=False),
    st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).filter(
        lambda v: np.linalg.norm(v) > 1e-3
    ),
)
def test_coherent_cosine_law(angle, axis):
    R = rotation_matrix(np.array(axis) / np.linalg.norm(axis), angle)
    assert np.isclose(coherent_error(R), 4 * (1 - np.cos(angle)), atol=1e-12)


def test_coherent_quadratic_coefficient():
    x = np.linspace(0, 0.1, 51)
    y = np.array([coherent_error(rotation_matrix([1, 0, 0], t)) for t in x])
    a = np.linalg.lstsq(x[:, None] ** 2, y, rcond=None)[0][0]
    assert abs(a - 2) <= 0.02


def test_nonmarkovian_examples():
    assert nonmarkovian_error(np.eye(3)) == 0.0
    assert np.isclose(nonmarkovian_error(np.diag([C05, C05, 1])), 3.007e-4, rtol=1e-3)
    assert np.isclose(nonmarkovian_error(np.diag([0.9, 1, 1])), 0.01)


# -- axis_angle -------------------------------------------------------------------------

def test_axis_angle_identity():
    a = axis_angle(np.eye(3))
    assert a.delta_theta == 0.0 and np.array_equal(a.axis, np.zeros(3))


def test_axis_angle_x():
    a = axis_angle(rotation_matrix([1, 0, 0], 0.1 * np.pi))
    assert np.allclose(a.components, [0.1 * np.pi, 0, 0], atol=1e-12)
    assert np.allclose(rotation_matrix(a.axis, a.delta_theta), rotation_matrix([1, 0, 0], 0.1 * np.pi))


def test_axis_angle_diagonal_axis():
    n = np.ones(3) / np.sqrt(3)
    a = axis_angle(rotation_matrix(n, 0.2))
    assert np.allclose(a.components, [0.1155] * 3, atol=1e-4)
    assert np.isclose(np.linalg.norm(a.components), 0.2)


def test_axis_angle_round_trip(rng):
    for _ in range(500):
        n = random_axis(rng)
        t = rng.uniform(1e-6, np.pi - 1e-3)
        a = axis_angle(rotation_matrix(n, t))
        assert abs(a.delta_theta - t) < 1e-9
        assert np.linalg.norm(a.axis - n) < 1e-9


def test_axis_angle_near_pi():
    n = np.array([0.0, 0.6, 0.8])
    a = axis_angle(rotation_matrix(n, np.pi))
    assert np.isclose(a.delta_theta, np.pi) and np.allclose(a.axis, n, atol=1e-9)


def test_axis_angle_refuses_reflection():
    with pytest.raises(ReflectionError):
        axis_angle(np.diag([1.0, 1.0, -1.0]))


# -- decompose --------------------------------------------------------------------------

def test_decompose_perfect_gate():
    d = decompose(RX_PI, RX_PI)
    b = d.budget
    assert (b.total, b.markovian, b.coherent, b.nonmarkovian, b.additivity_residual) == (0, 0, 0, 0, 0)
    assert d.entanglement_fidelity == pytest.approx(1.0)


def test_decompose_under_rotation():
    d = decompose(RX_PI, ptm_of_unitary(rx(0.9 * np.pi)))
    b = d.budget
    assert np.isclose(b.coherent, 0.19577, atol=1e-5)
    assert b.markovian == 0 and b.nonmarkovian < 1e-20
    assert np.allclose(d.rotation.components, [-0.1 * np.pi, 0, 0], atol=1e-12)
    assert d.to_dict()["delta_theta_xyz"][0] == pytest.approx(-0.1 * np.pi)


def test_decompose_gaussian_average():
    d = decompose(RX_PI, embed(np.diag([1, -C05, -C05])))
    assert np.isclose(d.budget.nonmarkovian, 3.0e-4, rtol=0.01)
    assert d.budget.coherent < 1e-20
    d_mc = decompose(RX_PI, embed(mc_gaussian_block(np.pi, 0.05 * np.pi)))
    assert np.isclose(d_mc.budget.nonmarkovian, 3.0e-4, rtol=0.1)
    assert d_mc.budget.coherent < 1e-5


def test_decompose_to_dict_keys():
    keys = set(decompose(RX_PI, RX_PI).to_dict())
    assert keys == {"total", "markovian", "coherent", "nonmarkovian", "additivity_residual",
                    "infidelity_r", "delta_theta_xyz", "det_flag"}


def test_decompose_components_non_negative(rng):
    for _ in range(100):
        b = decompose(ptm_of_unitary(rx(rng.uniform(0, 6))), random_cptp_ptm(rng)).budget
        assert min(b.total, b.markovian, b.coherent, b.nonmarkovian, b.additivity_residual) >= 0
        assert b.additivity_residual == pytest.approx(abs(b.total - b.markovian - b.coherent - b.nonmarkovian))


def test_decompose_reflection_has_no_rotation():
    d = decompose(np.eye(4), np.diag([1.0, 1.0, 1.0, -1.0]))
    assert d.polar.det_flag == -1 and d.rotation is None
    assert d.to_dict()["det_flag"] == -1


# -- infidelity -------------------------------------------------------------------------

def test_infidelity_examples():
    assert infidelity_from_error(0.0) == 0.0
    assert np.isclose(infidelity_from_error(0.12), 0.01)
    with pytest.raises(ValueError):
        infidelity_from_error(-1.0)


def test_infidelity_small_rotation():
    eps = 0.02 * np.pi
    d = decompose(RX_PI, ptm_of_unitary(rx(0.98 * np.pi)))
    exact = (2 / 3) * np.sin(0.01 * np.pi) ** 2
    assert abs(d.budget.infidelity_r - exact) <= eps**4
    assert abs((1 - d.average_gate_fidelity) - exact) < 1e-14


# -- structural properties --------------------------------------------------------------

def test_additivity_residual_is_cubic(rng):
    eps_ladder = [0.01, 0.02, 0.05, 0.1]
    dirs = [(random_axis(rng), rng.uniform(0.2, 1.0), rng.normal(size=(3, 3))) for _ in range(20)]
    norm = []
    for eps in eps_ladder:
        res = 0.0
        for n, frac, A in dirs:
            S = (A + A.T) / np.linalg.norm(A + A.T)
            block = (np.eye(3) + eps * S) @ rotation_matrix(n, frac * eps)
            res += decompose(np.eye(4), embed(block)).budget.additivity_residual
        norm.append(res / eps**3)
    ratios = np.array(norm[1:]) / np.array(norm[:-1])
    assert np.all((ratios > 0.3) & (ratios < 3.0)), norm


def test_frobenius_fidelity_relation_unitary(rng):
    for _ in range(100):
        n, t = random_axis(rng), rng.uniform(0, 0.1)
        T = embed(rotation_matrix(n, t))
        d = decompose(np.eye(4), T)
        assert abs(d.budget.total - 8 * (1 - entanglement_fidelity(np.eye(4), T))) <= 0.05 * d.budget.total + 1e-15


def test_frobenius_fidelity_relation_fails_for_depolarizing():
    # the 8(1 - F_e) relation is a small-unitary-error statement: for depolarizing
    # noise eps2_total = 3(1 - lam)^2 while 8(1 - F_e) = 6(1 - lam)
    lam = 0.99
    T = np.diag([1, lam, lam, lam])
    total = decompose(np.eye(4), T).budget.total
    assert np.isclose(total, 3 * (1 - lam) ** 2)
    assert np.isclose(8 * (1 - entanglement_fidelity(np.eye(4), T)), 6 * (1 - lam))
