import math

import numpy as np
import pytest

from src.errors import DimensionMismatch, EmptyLadder, NoComplement, OutOfRange
from src.managers import measures
from src.managers.measures import MeasureStatus, ReferenceLadder
from src.managers.resource_sets import named_state, vertex_cone, vertex_hull
from src.utils.linalg import DensityMatrix, random_density_matrix

LOG_3_2 = math.log2(1.5)


# ========== КОЛЛАПС МЕР ==========

class TestCollapse:

    @pytest.mark.parametrize("label,expected", [("strange", 1.0), ("norrell", LOG_3_2)])
    def test_qutrit_states(self, stab3_1, label, expected):
        """Для Strange и Norrell d_min = d_max = d_s"""
        state = named_state(label)
        assert measures.d_min(state, stab3_1).bits == pytest.approx(expected, abs=1e-6)
        assert measures.d_max(state, stab3_1).bits == pytest.approx(expected, abs=1e-6)
        assert measures.d_s(state, stab3_1).bits == pytest.approx(expected, abs=1e-6)

    def test_bell_on_ppt(self, ppt22):
        """Состояние Белла: 1 бит на PPT-конусе"""
        bell = named_state("bell(2)")
        assert measures.d_min(bell, ppt22).bits == pytest.approx(1.0, abs=1e-6)
        assert measures.d_max(bell, ppt22).bits == pytest.approx(1.0, abs=1e-6)
        assert measures.d_s(bell, ppt22).bits == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("m", [2, 3])
    def test_max_coherent(self, registry, m):
        """Максимально когерентное состояние: log2 m для всех мер"""
        state, free = named_state(f"max_coherent({m})"), registry.get("coh", (m,))
        assert measures.d_min(state, free).bits == pytest.approx(math.log2(m), abs=1e-6)
        assert measures.d_max(state, free).bits == pytest.approx(math.log2(m), abs=1e-6)
        assert measures.d_min_aff(state, free).bits == pytest.approx(math.log2(m), abs=1e-6)

    def test_face_closed_form(self, stab1):
        """Face: d_min = -log2((1 + 1/sqrt 3)/2) = d_max"""
        face = named_state("face")
        expected = -math.log2((1.0 + 1.0 / math.sqrt(3.0)) / 2.0)
        assert measures.d_min(face, stab1).bits == pytest.approx(expected, abs=1e-9)
        assert measures.d_max(face, stab1).bits == pytest.approx(expected, abs=1e-6)

    @pytest.mark.slow
    def test_hoggar(self, registry):
        free = registry.get("stab", (2, 2, 2))
        hog = named_state("hoggar")
        expected = math.log2(12.0 / 5.0)
        assert measures.d_min(hog, free).bits == pytest.approx(expected, abs=1e-5)
        assert measures.d_max(hog, free).bits == pytest.approx(expected, abs=1e-5)


# ========== ОБЩИЕ СВОЙСТВА ==========

class TestProperties:

    def test_free_states_have_zero_measures(self, stab1):
        """Вершины множества: все меры равны нулю"""
        for k in range(stab1.vertex_count):
            vertex = stab1.vertex(k)
            assert measures.d_min(vertex, stab1).bits == pytest.approx(0.0, abs=1e-9)
            assert measures.d_max(vertex, stab1).bits == pytest.approx(0.0, abs=1e-6)
            assert measures.d_s(vertex, stab1).bits == pytest.approx(0.0, abs=1e-6)

    def test_ordering_chain(self, stab1, rng):
        """d_min_aff <= d_min <= d_max <= d_s"""
        for i in range(10):
            rho = DensityMatrix(random_density_matrix(2, rng, rank=1 if i % 2 else None))
            chain = [measures.d_min_aff(rho, stab1).bits, measures.d_min(rho, stab1).bits,
                     measures.d_max(rho, stab1).bits, measures.d_s(rho, stab1).bits]
            for low, high in zip(chain, chain[1:]):
                assert low <= high + 1e-6

    @pytest.mark.parametrize("kind,dims", [("stab", (2, 2)), ("stab3", (3,))])
    def test_d_max_full_rank_states(self, registry, kind, dims):
        """Случайные состояния полного ранга: d_max конечна и sigma~ >= rho"""
        free = registry.get(kind, dims)
        rng = np.random.default_rng(2024)
        for _ in range(50):
            rho = DensityMatrix(random_density_matrix(free.dim, rng), free.dims)
            value = measures.d_max(rho, free)
            assert value.is_finite
            assert math.isfinite(value.bits)
            assert value.bits >= measures.d_min(rho, free).bits - 1e-6
            sigma_t = (2.0 ** value.bits) * value.witness_state.matrix
            assert np.linalg.eigvalsh(sigma_t - rho.matrix)[0] >= -1e-6
            # W разделяет: Tr[W v] <= 1 на вершинах, Tr[W rho] = t
            w = value.witness_operator
            assert np.max(np.real(np.einsum("ij,kji->k", w, free.vertices))) <= 1.0 + 1e-6
            assert np.real(np.trace(w @ rho.matrix)) == pytest.approx(2.0 ** value.bits, abs=1e-6)

    def test_d_max_hull_matches_cone_description(self, stab2, rng):
        """Оболочка 60 вершин и её запись конусом с образующими дают одно d_max"""
        cone = vertex_cone(stab2)
        states = [named_state("face^2"), named_state("t_qubit^2")]
        states += [DensityMatrix(random_density_matrix(4, rng), (2, 2)) for _ in range(5)]
        for rho in states:
            assert measures.d_max(rho, stab2).bits == pytest.approx(measures.d_max(rho, cone).bits, abs=1e-5)

    def test_d_h_zero_eps_equals_d_min(self, stab3_1):
        strange = named_state("strange")
        assert measures.d_h(strange, stab3_1, 0.0).bits == pytest.approx(
            measures.d_min(strange, stab3_1).bits, abs=1e-12)

    def test_eps_monotonicity(self, stab1):
        """d_h не убывает, d_max^eps не возрастает по eps"""
        rho = named_state("t_qubit")
        hyp = [measures.d_h(rho, stab1, e).bits for e in (0.0, 0.1, 0.2)]
        smooth = [measures.d_max_smooth(rho, stab1, e).bits for e in (0.0, 0.1, 0.2)]
        for low, high in zip(hyp, hyp[1:]):
            assert low <= high + 1e-6
        for high, low in zip(smooth, smooth[1:]):
            assert low <= high + 1e-6

    def test_smoothing_reaches_free_state(self, stab1):
        """Большой eps: шар содержит свободное состояние"""
        value = measures.d_max_smooth(named_state("t_qubit"), stab1, 0.5)
        assert value.status is MeasureStatus.CONTAINED
        assert value.bits == 0.0

    def test_d_min_infinite_on_orthogonal_support(self):
        """Носитель ортогонален множеству: d_min = inf"""
        zero_only = vertex_hull("zero_only", np.diag([1.0, 0.0])[None], (2,), vectors=np.eye(2)[:1])
        value = measures.d_min(np.diag([0.0, 1.0]), zero_only)
        assert value.status is MeasureStatus.INFINITE
        assert math.isinf(value.bits)

    def test_eps_out_of_range(self, stab1):
        with pytest.raises(OutOfRange):
            measures.d_h(named_state("plus"), stab1, 1.0)

    def test_dimension_mismatch(self, stab1):
        with pytest.raises(DimensionMismatch):
            measures.d_min(named_state("strange"), stab1)


# ========== АФФИННЫЕ МЕРЫ ==========

def test_affine_zero_on_full_dimensional(stab1):
    """Для множества полной размерности d_min_aff = 0"""
    assert measures.d_min_aff(named_state("t_qubit"), stab1).bits == 0.0


def test_affine_positive_on_coherence(coh3):
    """На неполном множестве аффинная мера положительна"""
    value = measures.d_h_aff(named_state("max_coherent(3)"), coh3, 0.1)
    assert value.bits > 0.0


# ========== ВЕС, r_tr, STAB NORM ==========

def test_weight(stab3_1):
    """(I - S)/2 свободно, (I - T)/2 не содержит свободной компоненты"""
    assert measures.weight(named_state("strange_perp"), stab3_1) == pytest.approx(1.0, abs=1e-6)
    assert measures.weight(named_state("t_qutrit_perp"), stab3_1) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("label,expected", [("strange", 0.5), ("norrell", 1.0 / 3.0)])
def test_trace_distance_to_set(stab3_1, label, expected):
    assert measures.r_tr(named_state(label), stab3_1) == pytest.approx(expected, abs=1e-6)


def test_stab_norm():
    """||I/2||_st = 1, для |Hog><Hog| норма 2.75"""
    assert measures.stab_norm(np.eye(2) / 2, 1) == pytest.approx(1.0)
    assert measures.stab_norm(named_state("hoggar").matrix, 3) == pytest.approx(2.75, abs=1e-10)
    with pytest.raises(DimensionMismatch):
        measures.stab_norm(np.eye(3) / 3, 1)


# ========== ВЕРНОСТЬ ДИСТИЛЛЯЦИИ ==========

class TestGFidelity:

    def test_free_state(self, stab1):
        """Для свободного состояния G = 1/K"""
        pair = measures.g_fidelity(named_state("zero"), stab1, 4.0)
        assert pair.primal == pytest.approx(0.25, abs=1e-8)
        assert pair.gap < 1e-6

    def test_primal_equals_dual(self, stab3_1):
        pair = measures.g_fidelity(named_state("strange"), stab3_1, 2.0)
        assert pair.primal == pytest.approx(pair.dual, abs=1e-6)
        assert pair.primal == pytest.approx(1.0, abs=1e-6)

    def test_k_below_one(self, stab1):
        with pytest.raises(OutOfRange):
            measures.g_fidelity(named_state("zero"), stab1, 0.5)


# ========== ДОПОЛНЕНИЕ И ЛЕСТНИЦА ==========

def test_robustness_complement(stab3_1):
    """Дополнение робастности Strange ортогонально Strange"""
    strange = named_state("strange")
    sigma = measures.robustness_complement(measures.d_s(strange, stab3_1))
    assert np.real(np.trace(sigma.matrix @ strange.matrix)) == pytest.approx(0.0, abs=1e-5)


def test_no_complement_for_free_state(stab1):
    with pytest.raises(NoComplement):
        measures.robustness_complement(measures.d_max(stab1.vertex(0), stab1))


class TestReferenceLadder:

    def test_floor_and_ceil(self):
        ladder = ReferenceLadder.multiples(0.5, 4)
        assert ladder.rates == (0.5, 1.0, 1.5, 2.0)
        assert ladder.floor(1.2) == 1.0
        assert ladder.floor(0.1) == 0.0
        assert ladder.ceil(1.2) == 1.5
        assert ladder.ceil(1.0 - 1e-9) == 1.0
        assert math.isinf(ladder.ceil(3.0))

    def test_validation(self):
        with pytest.raises(EmptyLadder):
            ReferenceLadder(())
        with pytest.raises(OutOfRange):
            ReferenceLadder((1.0, 0.5))

    def test_yield_not_above_cost(self, stab3_1):
        """Выход при нулевой ошибке не больше стоимости"""
        ladder = ReferenceLadder.multiples(0.01, 300)
        strange = named_state("strange")
        d = measures.one_shot_yield(strange, stab3_1, ladder, 0.0)
        c = measures.one_shot_cost(strange, stab3_1, ladder, 0.0)
        assert d == pytest.approx(1.0, abs=1e-9)
        assert d <= c + 1e-9
