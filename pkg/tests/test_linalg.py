import math

import numpy as np
import pytest

from src.errors import DimensionMismatch, IndexOutOfRange, InvalidState, NonHermitian
from src.utils.linalg import (
    DensityMatrix,
    PureState,
    fidelity,
    herm_eig,
    jacobi_eigh,
    kron,
    partial_transpose,
    pauli_group,
    pauli_label,
    pauli_string,
    psd_sqrt,
    purified_distance,
    random_density_matrix,
    random_hermitian,
    random_unitary,
    to_real_coordinates,
    from_real_coordinates,
    trace_distance,
    traceless_basis,
    weyl_operator,
)


# ========== DENSITY MATRIX ==========

class TestDensityMatrix:

    def test_valid_state(self):
        """Корректная матрица принимается, dims по умолчанию (d,)"""
        rho = DensityMatrix(np.eye(2) / 2)
        assert rho.dims == (2,)
        assert rho.dim == 2

    def test_matrix_is_read_only(self):
        """Матрица состояния неизменяема"""
        rho = DensityMatrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    @pytest.mark.parametrize("matrix", [
        np.eye(2),                                  # след 2
        np.diag([1.5, -0.5]),                       # отрицательное собственное значение
        np.ones((2, 3)) / 2,                        # не квадратная
        np.array([[0.5, np.nan], [np.nan, 0.5]]),   # NaN
    ])
    def test_invalid_state(self, matrix):
        """Нарушение следа, положительности или формы даёт InvalidState"""
        with pytest.raises(InvalidState):
            DensityMatrix(matrix)

    def test_non_hermitian(self):
        """Неэрмитова матрица отвергается"""
        with pytest.raises(NonHermitian):
            DensityMatrix(np.array([[0.5, 0.3], [0.0, 0.5]]))

    def test_dims_mismatch(self):
        """Произведение dims должно совпадать с размером"""
        with pytest.raises(DimensionMismatch):
            DensityMatrix(np.eye(4) / 4, (2, 3))

    def test_pure_state_normalization(self):
        """PureState требует единичной нормы"""
        with pytest.raises(InvalidState):
            PureState(np.array([1.0, 1.0]))
        psi = PureState.normalized([1.0, 1.0])
        assert math.isclose(np.linalg.norm(psi.amplitudes), 1.0)
        assert np.allclose(psi.density().matrix, np.full((2, 2), 0.5))

    def test_tensor(self):
        """Тензорное произведение склеивает dims"""
        a = DensityMatrix.maximally_mixed((2,))
        b = DensityMatrix.maximally_mixed((3,))
        ab = a.tensor(b)
        assert ab.dims == (2, 3)
        assert np.allclose(ab.matrix, np.eye(6) / 6)


# ========== СПЕКТР ==========

class TestHermEig:

    def test_jacobi_matches_lapack(self, rng):
        """Якоби на вещественном вложении совпадает с LAPACK"""
        for d in (2, 3, 5):
            a = random_hermitian(d, rng)
            w_lapack, _ = herm_eig(a, method="lapack")
            w_jacobi, v_jacobi = herm_eig(a, method="jacobi")
            assert np.allclose(w_lapack, w_jacobi, atol=1e-10)
            assert np.allclose(v_jacobi.conj().T @ v_jacobi, np.eye(d), atol=1e-10)
            assert np.allclose((v_jacobi * w_jacobi) @ v_jacobi.conj().T, a, atol=1e-9)

    def test_descending_order(self):
        """Собственные значения по убыванию"""
        w, _ = herm_eig(np.diag([0.1, 0.7, 0.2]))
        assert np.allclose(w, [0.7, 0.2, 0.1])

    def test_degenerate_spectrum(self):
        """Вырожденный спектр: Якоби возвращает полный унитарный базис"""
        w, v = herm_eig(np.eye(3), method="jacobi")
        assert np.allclose(w, 1.0)
        assert np.allclose(v.conj().T @ v, np.eye(3), atol=1e-10)

    def test_real_symmetric_jacobi(self):
        """jacobi_eigh на симметричной матрице 2x2"""
        w, v = jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert sorted(np.round(w, 12)) == [1.0, 3.0]
        assert np.allclose(v.T @ v, np.eye(2))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            herm_eig(np.eye(2), method="qr")

    def test_psd_sqrt(self, rng):
        """Квадратный корень положительной матрицы"""
        rho = random_density_matrix(4, rng)
        root = psd_sqrt(rho)
        assert np.allclose(root @ root, rho, atol=1e-10)

    def test_reconstruction_up_to_dim_16(self):
        """V diag(w) V^+ = A на 1000 случайных матрицах размера 1..16"""
        rng = np.random.default_rng(16)
        for i in range(1000):
            d = 1 + i % 16
            a = random_hermitian(d, rng)
            w, v = herm_eig(a)
            assert np.max(np.abs((v * w) @ v.conj().T - a)) <= 1e-9 * d


# ========== ВЕРНОСТЬ И РАССТОЯНИЯ ==========

class TestFidelity:

    def test_symmetry_and_range(self, rng):
        """F симметрична и лежит в [0, 1]"""
        for _ in range(10):
            rho = random_density_matrix(3, rng)
            sigma = random_density_matrix(3, rng, rank=1)
            f1, f2 = fidelity(rho, sigma), fidelity(sigma, rho)
            assert 0.0 <= f1 <= 1.0
            assert math.isclose(f1, f2, abs_tol=1e-9)

    def test_pure_states(self):
        """Для чистых состояний F = |<psi|phi>|^2"""
        zero = PureState(np.array([1.0, 0.0]))
        plus = PureState.normalized([1.0, 1.0])
        assert math.isclose(fidelity(zero, plus), 0.5, abs_tol=1e-12)
        assert math.isclose(purified_distance(zero, plus), math.sqrt(0.5), abs_tol=1e-12)

    def test_trace_distance(self):
        """Ортогональные состояния на расстоянии 1"""
        assert math.isclose(trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fidelity(np.eye(2) / 2, np.eye(3) / 3)

    def test_unitary_invariance(self, rng):
        """F(U rho U^+, U sigma U^+) = F(rho, sigma)"""
        for d in (2, 3, 4, 6):
            for _ in range(5):
                rho, sigma = random_density_matrix(d, rng), random_density_matrix(d, rng)
                u = random_unitary(d, rng)
                rotated = fidelity(u @ rho @ u.conj().T, u @ sigma @ u.conj().T)
                assert math.isclose(rotated, fidelity(rho, sigma), abs_tol=1e-9)

    def test_improved_triangle_inequality(self, rng):
        """P(rho, tau) <= P(rho, sigma) sqrt F(sigma, tau) + P(sigma, tau) sqrt F(rho, sigma)"""
        admissible = 0
        for i in range(300):
            d = 2 + i % 3
            sigma = random_density_matrix(d, rng)
            mix = rng.uniform(0.0, 0.6, size=2)
            rho = (1.0 - mix[0]) * sigma + mix[0] * random_density_matrix(d, rng)
            tau = (1.0 - mix[1]) * sigma + mix[1] * random_density_matrix(d, rng)
            p_rs, p_st = purified_distance(rho, sigma), purified_distance(sigma, tau)
            if p_rs ** 2 + p_st ** 2 > 1.0:
                continue
            admissible += 1
            bound = p_rs * math.sqrt(fidelity(sigma, tau)) + p_st * math.sqrt(fidelity(rho, sigma))
            assert purified_distance(rho, tau) <= bound + 1e-9
        assert admissible >= 200


# ========== ТЕНЗОРЫ, ПАУЛИ, ВЕЙЛЬ ==========

def test_partial_transpose_involution(rng):
    """Двойное частичное транспонирование возвращает матрицу"""
    rho = random_density_matrix(6, rng)
    once = partial_transpose(rho, (2, 3), 1)
    assert np.allclose(partial_transpose(once, (2, 3), 1), rho)
    assert math.isclose(np.trace(once).real, 1.0)


def test_partial_transpose_bell_negative():
    """Состояние Белла имеет отрицательное частичное транспонирование"""
    bell = np.zeros(4)
    bell[[0, 3]] = 1 / math.sqrt(2)
    pt = partial_transpose(np.outer(bell, bell), (2, 2))
    assert math.isclose(np.linalg.eigvalsh(pt)[0], -0.5, abs_tol=1e-12)


def test_partial_transpose_bad_subsystem():
    with pytest.raises(IndexOutOfRange):
        partial_transpose(np.eye(4) / 4, (2, 2), 2)


@pytest.mark.parametrize("index,label", [(0, "II"), (1, "IX"), (4, "XI"), (15, "ZZ")])
def test_pauli_label(index, label):
    """Старший разряд по основанию 4 - первый кубит"""
    assert pauli_label(2, index) == label


def test_pauli_group_orthogonal():
    """Tr[P_a P_b] = 2^n delta_ab"""
    group = pauli_group(2)
    gram = np.einsum("aij,bji->ab", group, group)
    assert np.allclose(gram, 4 * np.eye(16))
    assert np.allclose(pauli_string(2, "XZ"), kron(pauli_string(1, "X"), pauli_string(1, "Z")))


def test_pauli_bad_index():
    with pytest.raises(IndexOutOfRange):
        pauli_string(1, 4)


def test_weyl_operators_orthogonal():
    """Операторы Вейля унитарны и ортогональны по Гильберту-Шмидту"""
    ops = [weyl_operator(3, a, b) for a in range(3) for b in range(3)]
    for u in ops:
        assert np.allclose(u @ u.conj().T, np.eye(3))
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.allclose(gram, 3 * np.eye(9))


def test_real_coordinates_round_trip(rng):
    """Координаты в эрмитовом базисе и обратно"""
    a = random_hermitian(3, rng)
    assert np.allclose(from_real_coordinates(to_real_coordinates(a), 3), a)


def test_traceless_basis():
    """d^2 - 1 бесследовых ортонормированных матриц"""
    basis = traceless_basis(3)
    assert basis.shape == (8, 3, 3)
    assert np.allclose(np.trace(basis, axis1=1, axis2=2), 0.0)
    gram = np.einsum("aij,bji->ab", basis, basis).real
    assert np.allclose(gram, np.eye(8))
