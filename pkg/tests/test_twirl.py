import json
import math

import numpy as np
import pytest

from src.errors import CatalogMiss, InvalidState, NotEigenvector, OutOfRange
from src.managers import twirl
from src.managers.resource_sets import named_pure_state, named_state
from src.utils.linalg import DensityMatrix, PureState, random_density_matrix, trace_distance


# ========== КАНАЛ ИЗМЕРИТЬ-И-ПРИГОТОВИТЬ ==========

class TestReferenceMap:

    def test_idempotent(self):
        """Lambda(Lambda(rho)) = Lambda(rho)"""
        channel = twirl.measure_prepare_map("strange")
        rng = np.random.default_rng(7)
        for _ in range(5):
            rho = random_density_matrix(3, rng)
            once = channel(rho)
            assert np.allclose(channel(once), once, atol=1e-12)

    def test_stabilizes_phi(self):
        channel = twirl.measure_prepare_map("norrell")
        phi = named_state("norrell")
        assert np.allclose(channel(phi.matrix), phi.matrix, atol=1e-12)

    def test_apply_channel_returns_state(self):
        channel = twirl.measure_prepare_map("strange")
        out = twirl.apply_channel(channel, np.eye(3) / 3)
        assert isinstance(out, DensityMatrix)
        assert out.dims == (3,)

    def test_built_channel_matches_reference(self, stab3_1):
        """Канал из решения мер совпадает с явным без твирла"""
        built = twirl.build_lemma3_channel(named_state("strange"), stab3_1)
        assert np.allclose(built.p_star, named_state("strange").matrix, atol=1e-12)
        assert np.allclose(built.sigma_star.matrix, named_state("strange_perp").matrix, atol=1e-12)
        reference = twirl.measure_prepare_map("strange")
        composed = twirl.channel_compose(built, twirl.sl2z3_ensemble())
        rng = np.random.default_rng(11)
        for _ in range(50):
            rho = random_density_matrix(3, rng)
            assert trace_distance(built(rho), reference(rho)) <= 1e-9
            assert trace_distance(composed(rho), reference(rho)) <= 1e-9

    def test_snap_projector(self):
        """Почти проектор округляется, смешанный тест остаётся"""
        s = named_state("strange").matrix
        noisy = s + 1e-8 * np.diag([1.0, -1.0, 0.5])
        snapped = twirl._snap_projector(noisy)
        assert np.allclose(snapped @ snapped, snapped, atol=1e-12)
        assert np.allclose(snapped, s, atol=1e-7)
        mixed = 0.5 * s
        assert np.allclose(twirl._snap_projector(mixed), mixed)

    def test_reference_channel_free(self, stab3_1):
        report = twirl.verify_free(twirl.measure_prepare_map("strange"), stab3_1)
        assert report.free
        assert report.confidence == "Exact"


# ========== ГРУППЫ ==========

class TestGroups:

    def test_sl2z3_order(self):
        """Группа стабилизатора Strange имеет порядок 24 по модулю фазы"""
        ensemble = twirl.sl2z3_ensemble()
        assert len(ensemble) == 24
        strange = named_pure_state("strange")
        assert twirl.eigenvector_uniqueness(ensemble, strange)

    def test_sl2z3_twirl_of_sic_states(self):
        """Твирл psi_k (k != 0) даёт (I - S)/2 с примесью S"""
        ensemble = twirl.sl2z3_ensemble()
        psis = twirl.strange_sic_projectors()
        s = named_state("strange").matrix
        assert np.allclose(psis[0], s)
        for psi in psis[1:]:
            out = ensemble(psi)
            alpha = np.real(np.trace(s @ out))
            expected = alpha * s + (1.0 - alpha) * (np.eye(3) - s) / 2.0
            assert np.allclose(out, expected, atol=1e-10)

    def test_phase_key_ignores_global_phase(self):
        u = twirl.sl2z3_generators()["F"]
        assert twirl.phase_key(u) == twirl.phase_key(np.exp(0.7j) * u)
        assert twirl.phase_key(u) != twirl.phase_key(twirl.sl2z3_generators()["P"])

    def test_group_closure_cap(self):
        """Предел на размер замыкания"""
        closure = twirl.group_closure(list(twirl.sl2z3_generators().values()), cap=5)
        assert closure.capped

    def test_not_eigenvector(self):
        with pytest.raises(NotEigenvector):
            twirl.eigenvector_uniqueness([np.array([[0, 1], [1, 0]], dtype=complex)], np.array([1.0, 0.0]))

    @pytest.mark.slow
    def test_hoggar_group(self):
        closure = twirl.hoggar_closure()
        assert not closure.capped
        assert twirl.eigenvector_uniqueness(closure, named_pure_state("hoggar"))


# ========== АНСАМБЛИ ==========

class TestEnsembles:

    def test_face_ensemble_free(self, stab1):
        """{I, K, K^2} переставляет стабилизаторные состояния"""
        report = twirl.verify_free(twirl.face_ensemble(), stab1)
        assert report.free
        assert report.confidence == "Exact"

    def test_face_twirl_preserves_face(self):
        face = named_state("face")
        out = twirl.twirl_average(twirl.face_ensemble(), face)
        assert np.allclose(out.matrix, face.matrix, atol=1e-10)

    def test_weights_validation(self):
        with pytest.raises(OutOfRange):
            twirl.UnitaryEnsemble((np.eye(2),), (0.5,))
        with pytest.raises(OutOfRange):
            twirl.UnitaryEnsemble((np.ones((2, 2)),), (1.0,))

    def test_ensemble_tensor(self):
        pair = twirl.ensemble_tensor(twirl.face_ensemble(), twirl.face_ensemble())
        assert len(pair) == 9
        assert pair.dims == (2, 2)

    def test_json_round_trip(self, tmp_path):
        """Экспорт и загрузка ансамбля"""
        ensemble = twirl.face_ensemble()
        path = tmp_path / "face.json"
        twirl.export_ensemble(ensemble, path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert set(payload) == {"dims", "unitaries", "weights"}
        loaded = twirl.load_ensemble(path)
        assert len(loaded) == 3
        for a, b in zip(loaded.unitaries, ensemble.unitaries):
            assert np.allclose(a, b)

    def test_broken_json(self):
        """Неунитарная матрица в файле - InvalidState"""
        text = json.dumps({"dims": [2], "unitaries": [[[[1, 0], [1, 0]], [[0, 0], [1, 0]]]], "weights": [1.0]})
        with pytest.raises(InvalidState):
            twirl.UnitaryEnsemble.from_json(text)


# ========== ПРОВЕРКА СВОБОДНОСТИ ==========

class TestVerifyFree:

    def test_non_free_channel(self, stab1):
        """Поворот на T выводит вершины из оболочки"""
        t = np.diag([1.0, np.exp(1j * math.pi / 4)])
        report = twirl.verify_free(twirl.UnitaryEnsemble((t,), (1.0,)), stab1)
        assert not report.free
        assert report.violations
        assert report.worst_violation > 0.0

    def test_sampled_on_cone(self, ppt22):
        """На SDP-конусе проверка по выборке"""
        swap = np.eye(4)[[0, 2, 1, 3]].astype(complex)
        report = twirl.verify_free(twirl.UnitaryEnsemble((swap,), (1.0,), (2, 2)), ppt22, sample_size=4)
        assert report.free
        assert report.confidence == "Sampled"

    def test_composed_channel(self, stab3_1):
        """Композиция свободного канала со свободным ансамблем свободна"""
        composed = twirl.channel_compose(twirl.measure_prepare_map("strange"), twirl.sl2z3_ensemble())
        assert twirl.verify_free(composed, stab3_1).free

    def test_measure_prepare_violations_are_vertex_indices(self, stab1):
        """Нарушения канала измерить-и-приготовить - номера вершин с плохим alpha"""
        phase = math.atan2(0.6, 0.8)
        phi = PureState.normalized([1.0, np.exp(1j * phase)]).density()
        perp = PureState.normalized([1.0, -np.exp(1j * phase)]).density()
        channel = twirl.TwirlChannel(p_star=phi.matrix.copy(), phi=phi, sigma_star=perp)
        report = twirl.verify_free(channel, stab1)
        assert not report.free
        assert report.checked == stab1.vertex_count
        # Блох (0.8, 0.6, 0): из оболочки выходят образы вершин +-X
        pauli_x = np.array([[0.0, 1.0], [1.0, 0.0]])
        expected = [k for k, v in enumerate(stab1.vertices) if abs(np.real(np.trace(pauli_x @ v))) > 0.5]
        assert report.violations == expected


# ========== МАГИЯ КЛИФФОРДА ==========

class TestCliffordMagic:

    @pytest.mark.parametrize("label,size", [("t_qubit", 2), ("t_qutrit", 3)])
    def test_stabilizes_magic_state(self, label, size):
        """Дефазировка сохраняет V|+>"""
        ensemble = twirl.clifford_magic_dephasing(label)
        assert len(ensemble) == size
        magic = named_state(label).matrix
        assert np.allclose(ensemble(magic), magic, atol=1e-10)

    def test_toffoli(self):
        ensemble = twirl.clifford_magic_dephasing("toffoli")
        assert len(ensemble) == 8
        magic = named_state("toffoli").matrix
        assert np.allclose(ensemble(magic), magic, atol=1e-10)

    def test_unknown_label(self):
        with pytest.raises(CatalogMiss):
            twirl.clifford_magic_dephasing("ccz")
