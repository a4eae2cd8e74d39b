import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activecloak.geometry import Geometry, sample_antenna, sample_control, sample_far_circle
from activecloak.operator import (
    SingularityError,
    adjoint_apply,
    apply,
    assemble_dft,
    assemble_direct,
    density_samples,
    kernel,
    kernel_dk,
    kernel_matrix,
    positive_dft,
    weighted_norm,
    xi_inner,
)


def phi_mp(x, y, k):
    r = float(np.hypot(*(np.asarray(x) - np.asarray(y))))
    return complex(0.25j * mpmath.hankel1(0, k * r))


@pytest.fixture(scope="module")
def small():
    g = Geometry()
    return g, sample_antenna(g, 64), sample_control(g, 32), sample_far_circle(g, 32)


@pytest.mark.parametrize("k", [0.5, 10.0, 80.0])
def test_kernel_is_normal_derivative_of_fundamental_solution(k):
    x = np.array([0.013, -0.004])
    y = np.array([0.006, 0.008])
    nu = np.array([0.6, 0.8])
    h = 1e-7
    fd = (phi_mp(x, y + h * nu, k) - phi_mp(x, y - h * nu, k)) / (2 * h)
    assert abs(kernel(x, y, nu, k) - fd) < 1e-6 * abs(fd)


def test_kernel_vanishes_for_tangential_normal():
    x = np.array([0.02, 0.0])
    y = np.array([0.01, 0.0])
    assert kernel(x, y, np.array([0.0, 1.0]), 10.0) == 0


def test_kernel_decay():
    # |dPhi/dnu| ~ sqrt(k / r) for kr >> 1 along the normal direction
    y = np.array([0.0, 0.0])
    nu = np.array([1.0, 0.0])
    k = 10.0
    near = abs(kernel(np.array([100.0, 0.0]), y, nu, k))
    far = abs(kernel(np.array([400.0, 0.0]), y, nu, k))
    assert far / near == pytest.approx(0.5, rel=1e-3)


def test_kernel_singularity():
    with pytest.raises(SingularityError):
        kernel(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]), 1.0)


@pytest.mark.parametrize("k", [1.0, 30.0])
def test_kernel_dk_finite_difference(k):
    x = np.array([0.013, -0.004])
    y = np.array([0.006, 0.008])
    nu = np.array([0.6, 0.8])
    dk = 1e-4 * k
    fd = (kernel(x, y, nu, k + dk) - kernel(x, y, nu, k - dk)) / (2 * dk)
    # the k-derivative is small next to the kernel itself at low k
    scale = abs(fd) + abs(kernel(x, y, nu, k)) / k
    assert abs(kernel_dk(x, y, nu, k) - fd) < 1e-7 * scale


def test_positive_dft_against_naive_sum(rng):
    w = rng.normal(size=(3, 16)) + 1j * rng.normal(size=(3, 16))
    n = w.shape[-1]
    naive = np.array([[sum(row[j] * np.exp(2j * np.pi * j * l / n) for j in range(n)) / n
                       for l in range(n)] for row in w])
    np.testing.assert_allclose(positive_dft(w), naive, atol=1e-14)


@pytest.mark.parametrize("k", [0.1, 10.0, 100.0])
def test_dft_matches_direct(small, k):
    _, ant, near, far = small
    A = assemble_dft(ant, near, far, k)
    B = assemble_direct(ant, near, far, k)
    assert np.max(np.abs(A.entries - B.entries)) <= 1e-10 * max(1.0, np.max(np.abs(B.entries)))


@pytest.mark.parametrize("mode", [0, 1, 2, 5])
def test_columns_match_addition_theorem(mode):
    """Double layer of exp(i l tau) on a circle of radius a, evaluated outside:

        (i pi k a / 2) J_l'(ka) H_l(k|x|) exp(i l theta_x).
    """
    g = Geometry()
    k = 10.0
    ant = sample_antenna(g, 256)
    near, far = sample_control(g, 32), sample_far_circle(g, 16)
    A = assemble_dft(ant, near, far, k)
    pts = np.concatenate([near.points, far.points])
    r = np.hypot(*pts.T)
    th = np.arctan2(pts[:, 1], pts[:, 0])
    jp = float(mpmath.besselj(mode, k * g.a, derivative=1))
    hl = np.array([complex(mpmath.hankel1(mode, k * v)) for v in r])
    exact = 0.5j * np.pi * k * g.a * jp * hl * np.exp(1j * mode * th)
    np.testing.assert_allclose(A.entries[:, mode], exact, rtol=1e-8)


def test_threads_do_not_change_entries():
    g = Geometry()
    ant, near, far = sample_antenna(g, 64), sample_control(g, 128), sample_far_circle(g, 64)
    a = assemble_dft(ant, near, far, 7.0, threads=1).entries
    b = assemble_dft(ant, near, far, 7.0, threads=4).entries
    np.testing.assert_array_equal(a, b)


def test_kernel_matrix_shape(small):
    _, ant, near, _ = small
    assert kernel_matrix(near.points, ant, 3.0).shape == (len(near), len(ant))
    assert kernel_matrix(np.zeros((0, 2)), ant, 3.0).shape == (0, len(ant))


def test_apply_shapes(small):
    _, ant, near, far = small
    A = assemble_dft(ant, near, far, 5.0)
    un, uf = apply(A, np.ones(A.cols))
    assert un.shape == (len(near),) and uf.shape == (len(far),)
    with pytest.raises(ValueError):
        apply(A, np.ones(A.cols + 1))
    with pytest.raises(ValueError):
        adjoint_apply(A, np.ones(3), np.ones(len(far)))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adjoint_identity(seed):
    g = Geometry()
    A = assemble_dft(sample_antenna(g, 32), sample_control(g, 16), sample_far_circle(g, 16), 10.0)
    rng = np.random.default_rng(seed)
    h = rng.normal(size=A.cols) + 1j * rng.normal(size=A.cols)
    psi = rng.normal(size=A.entries.shape[0]) + 1j * rng.normal(size=A.entries.shape[0])
    lhs = xi_inner(A, A.entries @ h, psi)
    rhs = np.vdot(adjoint_apply(A, *A.split(psi)), h)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_density_samples_of_a_single_mode():
    n = 32
    tau = 2 * np.pi * np.arange(n) / n
    h = np.zeros(n, dtype=complex)
    h[3] = 1
    np.testing.assert_allclose(density_samples(h), np.exp(3j * tau), atol=1e-14)


def test_parseval(rng):
    g = Geometry()
    ant = sample_antenna(g, 64)
    h = rng.normal(size=64) + 1j * rng.normal(size=64)
    phi = density_samples(h)
    assert weighted_norm(phi, ant.weights) == pytest.approx(np.sqrt(2 * np.pi * g.a) * np.linalg.norm(h))
