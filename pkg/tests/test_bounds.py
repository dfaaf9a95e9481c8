import math

import pytest

from src.errors import BoundOrderingError, OutOfRange, OutOfRegion
from src.managers import bounds
from src.managers.bounds import ClosedFormMode, ErrorPair, Region
from src.managers.measures import ReferenceLadder
from src.managers.resource_sets import named_state


# ========== ПАРА ОШИБОК И f ==========

class TestFBound:

    def test_zero_errors(self):
        """f(0, 0) = 1"""
        assert bounds.f_bound(ErrorPair(0.0, 0.0)) == pytest.approx(1.0)

    @pytest.mark.parametrize("eps1,eps2", [(0.1, 0.1), (0.05, 0.2), (0.3, 0.01)])
    def test_min_of_branches(self, eps1, eps2):
        """В SqrtRegion f - минимум двух ветвей"""
        first = 1.0 / (1.0 - eps1 - math.sqrt(eps2))
        second = (math.sqrt(1.0 - eps2) - math.sqrt(eps1)) ** -2
        e = ErrorPair(eps1, eps2)
        assert bounds.region(e) is Region.SQRT
        assert bounds.f_bound(e) == pytest.approx(min(first, second))

    def test_fallback_region(self):
        """eps1 + sqrt(eps2) >= 1: только вторая ветвь"""
        e = ErrorPair(0.5, 0.3)
        assert bounds.region(e) is Region.FALLBACK
        assert bounds.f_branch(e) == "second"
        assert bounds.f_bound(e) == pytest.approx((math.sqrt(0.7) - math.sqrt(0.5)) ** -2)

    def test_outside_region(self):
        with pytest.raises(OutOfRegion):
            bounds.f_bound(ErrorPair(0.6, 0.5))

    @pytest.mark.parametrize("eps1,eps2", [(-0.1, 0.0), (1.0, 0.0), (0.0, 1.5)])
    def test_invalid_pair(self, eps1, eps2):
        with pytest.raises(OutOfRange):
            ErrorPair(eps1, eps2)

    def test_crossing_interval(self):
        """Внутри отрезка пересечения первая ветвь не хуже второй"""
        lo, hi = bounds.crossing_interval(0.04)
        mid = 0.5 * (lo + hi)
        assert bounds.first_branch_preferred(ErrorPair(mid, 0.04))


# ========== eps' ==========

class TestEpsPrime:

    def test_eps_prime_zero(self):
        assert bounds.eps_prime(ErrorPair(0.0, 0.0)) == 0.0

    def test_eps_prime_boundary(self):
        with pytest.raises(OutOfRegion):
            bounds.eps_prime(ErrorPair(0.5, 0.5))

    @pytest.mark.parametrize("eps1,eps2", [(0.1, 0.1), (0.2, 0.3), (0.01, 0.5)])
    def test_slacks_nonnegative(self, eps1, eps2):
        e = ErrorPair(eps1, eps2)
        assert bounds.sqrt_branch_slack(e) >= -1e-12
        if e.sqrt_region:
            assert bounds.linear_branch_slack(e) >= -1e-12

    def test_compare_bounds(self):
        """Граница через eps' не хуже границы через f"""
        report = bounds.compare_bounds(ErrorPair(0.1, 0.1))
        assert report.log_inv_1m_eps_prime <= report.log_f + 1e-12
        row = report.to_row()
        assert row["region"] == "SqrtRegion"
        assert "crossing_lo" in row and "crossing_hi" in row

    def test_ordering_violation_raises(self, monkeypatch):
        """Нарушение порядка границ - ошибка реализации"""
        monkeypatch.setattr(bounds, "f_bound", lambda e: 1.0)
        with pytest.raises(BoundOrderingError):
            bounds.compare_bounds(ErrorPair(0.1, 0.1))


# ========== СЕТКА ==========

class TestGrid:

    def test_default_grid_size(self):
        """Шаг 0.01: 5050 узлов с eps1 + eps2 < 1"""
        grid = list(bounds.bound_grid(0.01))
        assert len(grid) == 5050
        assert grid[0] == ErrorPair(0.0, 0.0)
        assert all(e.eps1 + e.eps2 < 1.0 for e in grid)

    def test_coarse_grid(self):
        grid = list(bounds.bound_grid(0.5))
        assert [(e.eps1, e.eps2) for e in grid] == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.0)]

    @pytest.mark.parametrize("step", [0.0, -0.1, 0.6])
    def test_invalid_step(self, step):
        with pytest.raises(OutOfRange):
            list(bounds.bound_grid(step))

    def test_whole_grid_ordered(self):
        """На всей сетке log 1/(1 - eps') <= log f"""
        for e in bounds.bound_grid(0.05):
            bounds.compare_bounds(e)


# ========== КЛАССИЧЕСКАЯ ВЕРНОСТЬ ==========

class TestEtaBounds:

    def test_classical_fidelity(self):
        assert bounds.classical_fidelity([0.5, 0.5], [0.5, 0.5]) == pytest.approx(1.0)
        assert bounds.classical_fidelity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_zero_eps(self):
        assert bounds.eta_bounds(0.3, 0.0) == (0.3, 0.3)

    @pytest.mark.parametrize("kappa,eps", [(0.3, 0.1), (0.5, 0.05), (0.9, 0.2)])
    def test_fidelity_at_ends(self, kappa, eps):
        """На концах отрезка верность равна 1 - eps (или конец равен 0/1)"""
        lo, hi = bounds.eta_bounds(kappa, eps)
        assert lo <= kappa <= hi
        for eta in (lo, hi):
            fid = bounds.classical_fidelity([eta, 1 - eta], [kappa, 1 - kappa])
            assert fid >= 1.0 - eps - 1e-9
            if 0.0 < eta < 1.0:
                assert fid == pytest.approx(1.0 - eps, abs=1e-9)

    def test_edge_kappa(self):
        assert bounds.eta_bounds(1.0, 0.1) == (0.9, 1.0)
        assert bounds.eta_bounds(0.0, 0.1) == (0.0, 0.1)


# ========== ЗАМКНУТЫЕ ФОРМЫ ==========

class TestClosedForms:

    def test_exact_full_dim(self):
        """FullDim: d_min = r при kappa = 1, иначе 0; d_max = max(r + log kappa, 0)"""
        pure = bounds.isotropic_exact(1.0, 1.0)
        assert pure.d_min == 1.0
        assert pure.d_max == pytest.approx(1.0)
        half = bounds.isotropic_exact(1.0, 0.5)
        assert half.d_min == 0.0
        assert half.d_max == pytest.approx(0.0)
        assert half.d_s == half.d_max
        assert bounds.isotropic_exact(1.0, 0.0).d_max == 0.0

    def test_exact_reduced_dim(self):
        """ReducedDim при kappa = 0: d_min,aff = log 1/(1 - 2^-r), d_max = log (1/(1 - 2^-r))"""
        values = bounds.isotropic_exact(1.0, 0.0, ClosedFormMode.REDUCED_DIM)
        assert values.d_min_aff == pytest.approx(1.0)
        assert values.d_max == pytest.approx(1.0)

    def test_smoothed_pure(self):
        """kappa = 1: D_H^eps = r + log 1/(1 - eps)"""
        forms = bounds.closed_form_smoothed(1.0, 1.0, 0.1)
        assert forms.d_h == pytest.approx(1.0 - math.log2(0.9))
        assert forms.d_max_smooth == pytest.approx(1.0 + math.log2(0.9), abs=1e-9)
        assert forms.d_s_smooth == forms.d_max_smooth

    def test_smoothed_zero_eps(self):
        forms = bounds.closed_form_smoothed(1.0, 0.5, 0.0)
        assert forms.d_h == 0.0
        assert forms.d_max_smooth == pytest.approx(0.0)

    def test_invalid_arguments(self):
        with pytest.raises(OutOfRange):
            bounds.closed_form_smoothed(-1.0, 0.5, 0.1)
        with pytest.raises(OutOfRange):
            bounds.isotropic_exact(1.0, 1.5)


# ========== ВЫХОД И СТОИМОСТЬ ==========

def test_yield_cost_check(stab3_1):
    """Граница выход-стоимость выполняется для Strange"""
    ladder = ReferenceLadder.multiples(0.01, 300)
    check = bounds.yield_cost_check(named_state("strange"), stab3_1, ladder, ErrorPair(0.1, 0.1))
    assert check.passed
    assert check.yield_bits <= check.cost_bits + check.report.log_f + 1e-6
