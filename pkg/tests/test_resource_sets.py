import math

import numpy as np
import pytest

from src.errors import DimensionMismatch, InvalidState, NotOrthogonal, OutOfRange, UnknownLabel
from src.managers.resource_sets import (
    FreeSetRegistry,
    SetKind,
    affine_hull_basis,
    clifford_preparation,
    coherence_cone,
    coherence_set,
    isotropic,
    isotropic_family,
    membership,
    named_pure_state,
    named_state,
    stabilizer_states,
    stabilizer_states_qutrit,
    vertex_cone,
    vertex_hull,
    vertex_robustness,
)
from src.utils.linalg import DensityMatrix, kron, random_density_matrix


# ========== СТАБИЛИЗАТОРНЫЕ СОСТОЯНИЯ ==========

class TestStabilizerEnumeration:

    @pytest.mark.parametrize("builder,n,expected", [
        (stabilizer_states, 1, 6),
        (stabilizer_states, 2, 60),
        (stabilizer_states_qutrit, 1, 12),
    ])
    def test_vertex_counts(self, builder, n, expected):
        """Число стабилизаторных состояний d^n prod (d^k + 1)"""
        free = builder(n)
        assert free.vertex_count == expected
        assert free.kind is SetKind.VERTEX_HULL
        assert free.full_dimensional

    @pytest.mark.slow
    @pytest.mark.parametrize("builder,n,expected", [
        (stabilizer_states, 3, 1080),
        (stabilizer_states_qutrit, 2, 360),
    ])
    def test_large_vertex_counts(self, builder, n, expected):
        assert builder(n).vertex_count == expected

    def test_vertices_are_distinct_projectors(self, stab1):
        """Вершины - попарно различные чистые состояния"""
        vectors = stab1.vectors
        overlaps = np.abs(vectors.conj() @ vectors.T) ** 2
        assert np.allclose(np.diag(overlaps), 1.0)
        off = overlaps[~np.eye(6, dtype=bool)]
        assert off.max() < 1.0 - 1e-6

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            stabilizer_states(4)
        with pytest.raises(OutOfRange):
            stabilizer_states_qutrit(3)

    def test_clifford_preparation(self):
        """U|0> совпадает с заданным стабилизаторным состоянием до фазы"""
        plus = named_pure_state("plus").amplitudes
        u = clifford_preparation(plus, 2, 1)
        assert math.isclose(abs(np.vdot(plus, u[:, 0])) ** 2, 1.0, abs_tol=1e-10)

    def test_clifford_preparation_rejects_magic(self):
        with pytest.raises(InvalidState):
            clifford_preparation(named_pure_state("t_qubit"), 2, 1)


# ========== ОБОЛОЧКИ И КОНУСЫ ==========

class TestSets:

    def test_coherence_set(self):
        """Диагональные состояния - оболочка d базисных проекторов"""
        free = coherence_set(3)
        assert free.vertex_count == 3
        assert free.affine_basis.shape[0] == 2
        assert not free.full_dimensional

    def test_coherence_cone(self):
        free = coherence_cone(3)
        assert free.kind is SetKind.SDP_CONE
        assert free.rule.diagonal

    def test_ppt_set(self, ppt22):
        assert ppt22.kind is SetKind.SDP_CONE
        assert ppt22.rule.ppt_dims == (2, 2)
        assert ppt22.full_dimensional

    def test_vertex_cone(self, stab1):
        """Оболочка вершин как конус с образующими"""
        cone = vertex_cone(stab1)
        assert cone.rule.generators.shape == (6, 2, 2)
        with pytest.raises(ValueError):
            vertex_cone(coherence_cone(2))

    def test_affine_hull_of_segment(self):
        """Две вершины дают одномерную аффинную оболочку"""
        vertices = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]).astype(complex)
        assert affine_hull_basis(vertices).shape[0] == 1

    def test_vertex_hull_rejects_invalid_vertex(self):
        with pytest.raises(InvalidState):
            vertex_hull("bad", np.stack([np.eye(2)]), (2,))


# ========== ПРИНАДЛЕЖНОСТЬ ==========

class TestMembership:

    def test_mixed_state_in_stab(self, stab1):
        assert membership(np.eye(2) / 2, stab1).member

    def test_magic_state_outside_with_witness(self, stab1):
        """Магическое состояние вне оболочки, свидетель разделяет"""
        rho = named_state("t_qubit").matrix
        result = membership(rho, stab1)
        assert not result
        witness = result.witness
        assert np.real(np.trace(witness @ rho)) > result.witness_bound
        for v in stab1.vertices:
            assert np.real(np.trace(witness @ v)) <= result.witness_bound + 1e-6

    def test_ppt_membership(self, ppt22):
        """Состояние Белла не PPT; I/4 - PPT"""
        assert membership(np.eye(4) / 4, ppt22).member
        bell = named_state("bell(2)").matrix
        result = membership(bell, ppt22)
        assert not result.member
        assert np.real(np.trace(result.witness @ bell)) > 0.0

    def test_coherence_cone_membership(self):
        free = coherence_cone(2)
        assert membership(np.eye(2) / 2, free).member
        assert not membership(named_state("plus").matrix, free).member

    def test_dimension_mismatch(self, stab1):
        with pytest.raises(DimensionMismatch):
            membership(np.eye(3) / 3, stab1)

    def test_vertex_robustness_on_vertex(self, stab2):
        """На вершине робастность 1, веса дают sigma~ >= rho"""
        rho = stab2.vertices[5]
        result = vertex_robustness(rho, stab2.vertices, "vertex")
        assert result.value == pytest.approx(1.0, abs=1e-7)
        assert np.all(result.weights >= 0.0)
        sigma_t = result.sigma(stab2.vertices)
        assert np.linalg.eigvalsh(sigma_t - rho)[0] >= -1e-7

    def test_vertex_robustness_full_rank_two_qubits(self, stab2, rng):
        """Полный ранг на 60 вершинах: Tr[W rho] = sum a_i, W разделяет"""
        rho = DensityMatrix(random_density_matrix(4, rng), (2, 2)).matrix
        result = vertex_robustness(rho, stab2.vertices, "full_rank")
        assert result.witness is not None
        assert math.isfinite(result.value)
        assert float(np.sum(result.weights)) == pytest.approx(result.value, abs=1e-6)
        overlaps = np.real(np.einsum("ij,kji->k", result.witness, stab2.vertices))
        assert np.max(overlaps) <= 1.0 + 1e-7
        assert np.linalg.eigvalsh(result.sigma(stab2.vertices) - rho)[0] >= -1e-6


# ========== КАТАЛОГ ==========

class TestCatalog:

    @pytest.mark.parametrize("label,dims", [
        ("face", (2,)),
        ("hoggar", (2, 2, 2)),
        ("strange", (3,)),
        ("norrell", (3,)),
        ("t_qutrit", (3,)),
        ("t_qubit", (2,)),
        ("toffoli", (2, 2, 2)),
        ("bell(3)", (3, 3)),
        ("max_coherent(4)", (4,)),
    ])
    def test_labels(self, label, dims):
        """Метки каталога дают нормированные состояния нужной размерности"""
        psi = named_pure_state(label)
        assert psi.dims == dims
        assert math.isclose(np.linalg.norm(psi.amplitudes), 1.0, abs_tol=1e-12)

    def test_two_copies(self):
        """Метка x^2 - две копии"""
        psi = named_pure_state("strange^2")
        single = named_pure_state("strange").amplitudes
        assert psi.dims == (3, 3)
        assert np.allclose(psi.amplitudes, kron(single, single))

    def test_perp_state(self):
        """strange_perp = (I - S)/2 ортогонально S"""
        perp = named_state("strange_perp")
        s = named_state("strange")
        assert math.isclose(np.trace(perp.matrix @ s.matrix).real, 0.0, abs_tol=1e-12)

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            named_state("nonexistent")

    def test_isotropic(self):
        """Phi_kappa - смесь Phi и sigma*"""
        phi, sigma = isotropic_family("norrell")
        state = isotropic(phi, sigma, 0.3)
        assert math.isclose(np.trace(state.matrix @ phi.matrix).real, 0.3, abs_tol=1e-12)
        with pytest.raises(OutOfRange):
            isotropic(phi, sigma, 1.5)

    def test_isotropic_requires_orthogonal(self):
        phi = named_state("strange")
        with pytest.raises(NotOrthogonal):
            isotropic(phi, DensityMatrix.maximally_mixed((3,)), 0.5)


# ========== РЕЕСТР ==========

class TestRegistry:

    def test_cache_hit(self):
        """Повторный запрос возвращает тот же объект"""
        registry = FreeSetRegistry(maxsize=4)
        first = registry.get("stab", (2,))
        assert registry.get("stab", [2]) is first
        assert len(registry) == 1
        registry.clear()
        assert len(registry) == 0

    def test_stab_on_qutrits(self):
        registry = FreeSetRegistry()
        assert registry.get("stab", (3,)).label == "stab3"

    @pytest.mark.parametrize("kind,dims,error", [
        ("stab", (2, 3), DimensionMismatch),
        ("stab3", (2,), DimensionMismatch),
        ("ppt", (4,), DimensionMismatch),
        ("magic", (2,), UnknownLabel),
    ])
    def test_invalid_requests(self, kind, dims, error):
        with pytest.raises(error):
            FreeSetRegistry().get(kind, dims)
