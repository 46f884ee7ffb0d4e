# tests/test_spectra.py

import math
import os
import sys
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.charclass import hrr_dimension
from src.spectra import (
    GrassmannIndex,
    PolarizationData,
    Space,
    abelian_spectrum,
    dual_ladder_factor,
    grassmann_curvature,
    grassmann_eigenvalues,
    grassmann_spectrum,
    grassmann_structure_check,
    intermediate_eigenvalue,
    is_rectangle_tuple,
    ladder_constant,
    pn_dual_ladder,
    pn_eigenvalue,
    pn_spectrum,
    spectral_bundle_curvature,
    zero_mode_levels,
)
from src.utils import VerificationError, setup_logging

logger = setup_logging()

# --------------------------------------------------------------------------------------------------
# Polarização
# --------------------------------------------------------------------------------------------------


def test_polarization_accepts_divisor_chain():
    logger.info("Executando test_polarization_accepts_divisor_chain...")
    data = PolarizationData((1, 2, 6))
    assert data.n == 3
    assert data.product == 12


@pytest.mark.parametrize("delta", [(), (0,), (2, 3), (-1, 2)])
def test_polarization_rejects_invalid_chain(delta):
    with pytest.raises(ValueError):
        PolarizationData(delta)


# --------------------------------------------------------------------------------------------------
# Variedades abelianas
# --------------------------------------------------------------------------------------------------


def test_abelian_spectrum_curve():
    """n=1, B=3, delta=(2): níveis 0, 3, 6 com multiplicidade 2."""
    logger.info("Executando test_abelian_spectrum_curve...")
    table = abelian_spectrum(1, 3, (2,), 2)
    assert table.space is Space.ABELIAN
    assert [(r.q, r.eigenvalue, r.multiplicity) for r in table.rows] == [(0, 0, 2), (1, 3, 2), (2, 6, 2)]
    assert table.row(0).flags == ("holomorphic",)


def test_abelian_spectrum_surface_multiplicity():
    """n=2, B=1, delta=(1,2): nível 2 com autovalor 2 e multiplicidade C(3,2)*2 = 6."""
    logger.info("Executando test_abelian_spectrum_surface_multiplicity...")
    row = abelian_spectrum(2, 1, (1, 2), 2).row(2)
    assert row.eigenvalue == 2
    assert row.multiplicity == 6


def test_abelian_dual_ladder_rows():
    """Delta^k com k=2 em n=1, B=3: nível 0 tem autovalor 9 e multiplicidade desconhecida."""
    logger.info("Executando test_abelian_dual_ladder_rows...")
    table = abelian_spectrum(1, 3, (2,), 1, dual_k=2)
    assert table.row(0).eigenvalue == 9
    assert table.row(0).multiplicity is None
    assert table.row(1).eigenvalue == 12


def test_abelian_accepts_rational_curvature():
    table = abelian_spectrum(1, "3/2", (1,), 2)
    assert table.row(2).eigenvalue == Fraction(3)


def test_abelian_rejects_inconsistent_input():
    logger.info("Executando test_abelian_rejects_inconsistent_input...")
    with pytest.raises(ValueError):
        abelian_spectrum(2, 1, (1,), 2)
    with pytest.raises(ValueError):
        abelian_spectrum(1, 0, (1,), 2)
    with pytest.raises(ValueError):
        abelian_spectrum(1, 1, (1,), -1)


def test_abelian_zero_modes_never_appear():
    assert zero_mode_levels(Space.ABELIAN, 2, 3, 10) == []


# --------------------------------------------------------------------------------------------------
# Espaço projetivo
# --------------------------------------------------------------------------------------------------


def test_pn_spectrum_values():
    logger.info("Executando test_pn_spectrum_values...")
    row = pn_spectrum(1, 3, 2).row(1)
    assert (row.eigenvalue, row.multiplicity) == (5, 6)
    row = pn_spectrum(2, 1, 2).row(2)
    assert (row.eigenvalue, row.multiplicity) == (10, 42)


def test_pn_curve_multiplicity_formula():
    """Em P^1 a multiplicidade do nível q é B + 2q + 1."""
    logger.info("Executando test_pn_curve_multiplicity_formula...")
    for B in range(1, 6):
        for row in pn_spectrum(1, B, 6).rows:
            assert row.multiplicity == B + 2 * row.q + 1


def test_pn_rejects_non_integer_degree():
    with pytest.raises(ValueError):
        pn_spectrum(1, Fraction(1, 2), 2)
    with pytest.raises(ValueError):
        pn_spectrum(1, 0, 2)


def test_intermediate_eigenvalues():
    logger.info("Executando test_intermediate_eigenvalues...")
    assert intermediate_eigenvalue(1, 2, 2, 0) == 10
    assert intermediate_eigenvalue(1, 2, 2, 1) == 6
    assert intermediate_eigenvalue(3, 5, 4, 4) == 0
    with pytest.raises(ValueError):
        intermediate_eigenvalue(1, 2, 1, 2)


def test_intermediate_eigenvalues_telescope():
    """N_{q,k} - N_{q,k+1} = B + (c/2)(2k+1+n) e a soma reconstrói N_{q,0}."""
    logger.info("Executando test_intermediate_eigenvalues_telescope...")
    for n in (1, 2, 3):
        for B in (1, 4):
            for q in range(13):
                steps = [
                    intermediate_eigenvalue(n, B, q, k) - intermediate_eigenvalue(n, B, q, k + 1)
                    for k in range(q)
                ]
                assert steps == [B + 2 * k + 1 + n for k in range(q)]
                assert sum(steps) == pn_eigenvalue(n, B, q)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 6),
    st.fractions(min_value=Fraction(1, 8), max_value=20),
    st.integers(0, 15),
    st.integers(1, 6),
)
def test_telescoping_for_any_curvature_constant(n, B, q, c):
    steps = [intermediate_eigenvalue(n, B, q, k, c) - intermediate_eigenvalue(n, B, q, k + 1, c) for k in range(q)]
    assert steps == [B + Fraction(c, 2) * (2 * k + 1 + n) for k in range(q)]
    assert sum(steps, Fraction(0)) == pn_eigenvalue(n, B, q, c)


def test_custom_curvature_constant():
    assert pn_eigenvalue(1, 2, 1, c=4) == 2 + 2 * 2
    with pytest.raises(ValueError):
        pn_eigenvalue(1, 2, 1, c=0)


def test_pn_dual_ladder_stops_at_anti_holomorphic_section():
    """n=1, B=2, q=0: k=1 dá 2, k=2 dá 0 (anti-holomorfa) e k=3 não existe."""
    logger.info("Executando test_pn_dual_ladder_stops_at_anti_holomorphic_section...")
    table = pn_dual_ladder(1, 2, 0, 5)
    assert [row.q for row in table.rows] == [0, 1, 2]
    assert table.row(1).eigenvalue == 2
    assert table.row(2).eigenvalue == 0
    assert table.row(2).flags == ("anti_holomorphic",)
    with pytest.raises(KeyError):
        table.row(3)


def test_dual_ladder_factor_vanishes_past_threshold():
    logger.info("Executando test_dual_ladder_factor_vanishes_past_threshold...")
    n, B, q = 2, 3, 1
    assert all(dual_ladder_factor(n, B, q, k) > 0 for k in range(1, B + q + 1))
    assert dual_ladder_factor(n, B, q, B + q + 1) == 0
    with pytest.raises(ValueError):
        dual_ladder_factor(n, B, q, 0)


def test_pn_zero_mode_levels():
    assert zero_mode_levels(Space.PROJECTIVE, 1, 2, 4) == [2, 3, 4]
    with pytest.raises(ValueError):
        zero_mode_levels(Space.PROJECTIVE, 1, 2, 4, c=3)
    with pytest.raises(ValueError):
        zero_mode_levels(Space.GRASSMANNIAN, 1, 2, 4)


def test_ladder_constants():
    logger.info("Executando test_ladder_constants...")
    assert ladder_constant(Space.ABELIAN, 1, 2, 3) == 48
    assert ladder_constant(Space.PROJECTIVE, 1, 2, 2) == 60
    assert ladder_constant(Space.ABELIAN, 1, 2, 0) == 1
    assert ladder_constant(Space.PROJECTIVE, 3, 5, 0) == 1
    with pytest.raises(ValueError):
        ladder_constant(Space.GRASSMANNIAN, 1, 2, 1)


def test_hrr_dimension_is_used_for_multiplicities():
    for row in pn_spectrum(3, 2, 3).rows:
        assert row.multiplicity == hrr_dimension(3, 2, row.q)


# --------------------------------------------------------------------------------------------------
# Grassmanniana
# --------------------------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "mu,nu,B,expected",
    [(2, 2, -1, (0, 5)), (3, 1, -2, (0, 6)), (1, 1, -1, (0, 3))],
)
def test_grassmann_eigenvalues(mu, nu, B, expected):
    assert grassmann_eigenvalues(mu, nu, B) == expected


def test_grassmann_rejects_non_negative_degree():
    logger.info("Executando test_grassmann_rejects_non_negative_degree...")
    with pytest.raises(ValueError):
        grassmann_eigenvalues(2, 2, 0)
    with pytest.raises(ValueError):
        grassmann_eigenvalues(2, 2, 3)
    with pytest.raises(ValueError):
        grassmann_eigenvalues(0, 2, -1)


def test_grassmann_spectrum_rows():
    table = grassmann_spectrum(2, 3, -1)
    assert table.eigenvalues() == [0, 6]
    assert all(row.multiplicity is None for row in table.rows)


def test_grassmann_curvature_values():
    logger.info("Executando test_grassmann_curvature_values...")
    a, b, c = GrassmannIndex(1, 1), GrassmannIndex(2, 2), GrassmannIndex(1, 2)
    assert grassmann_curvature(2, 2, a, a, a, a) == 2
    assert grassmann_curvature(2, 2, a, a, b, b) == 0
    assert grassmann_curvature(2, 2, a, a, c, c) == 1
    with pytest.raises(ValueError):
        grassmann_curvature(2, 2, a, a, GrassmannIndex(3, 1), a)


def test_rectangle_tuples_have_unit_curvature():
    """Nos dois sentidos do retângulo (I, K opostos) a curvatura vale 1."""
    logger.info("Executando test_rectangle_tuples_have_unit_curvature...")
    I, K = GrassmannIndex(1, 1), GrassmannIndex(2, 3)
    row_first = (I, GrassmannIndex(1, 3), K, GrassmannIndex(2, 1))
    column_first = (I, GrassmannIndex(2, 1), K, GrassmannIndex(1, 3))
    for tup in (row_first, column_first):
        assert is_rectangle_tuple(*tup)
        assert grassmann_curvature(2, 3, *tup) == 1
    assert not is_rectangle_tuple(I, I, I, I)


@pytest.mark.parametrize("mu,nu", [(1, 1), (1, 3), (2, 2), (3, 2), (2, 4)])
def test_grassmann_structure(mu, nu):
    report = grassmann_structure_check(mu, nu)
    assert report.passed
    assert all(v == 0 for v in report.violations.values())
    assert report.rectangle_exceptions == 2 * mu * (mu - 1) * nu * (nu - 1)
    assert set(report.nullities.values()) == {(mu - 1) * (nu - 1)}


def test_grassmann_structure_parallel_matches_serial():
    logger.info("Executando test_grassmann_structure_parallel_matches_serial...")
    assert grassmann_structure_check(3, 3, threads=4).as_dict() == grassmann_structure_check(3, 3).as_dict()


def test_grassmann_structure_report_keys():
    data = grassmann_structure_check(2, 2).as_dict()
    assert data["nullities"] == {"1,1": 1, "1,2": 1, "2,1": 1, "2,2": 1}
    assert data["pass"] is True


def test_grassmann_structure_detects_broken_curvature(mocker):
    """Uma curvatura alterada faz a verificação falhar com os detalhes."""
    logger.info("Executando test_grassmann_structure_detects_broken_curvature...")
    mocker.patch("src.spectra.grassmann_curvature", return_value=1)
    with pytest.raises(VerificationError) as info:
        grassmann_structure_check(2, 2)
    assert info.value.details["pass"] is False


def test_grassmann_structure_range():
    with pytest.raises(ValueError):
        grassmann_structure_check(6, 1)
    with pytest.raises(ValueError):
        grassmann_structure_check(1, 0)


@pytest.mark.slow
def test_grassmann_structure_largest_grid():
    logger.info("Executando test_grassmann_structure_largest_grid...")
    for mu in range(1, 5):
        for nu in range(1, 5):
            assert grassmann_structure_check(mu, nu).passed


# --------------------------------------------------------------------------------------------------
# Curvatura do fibrado espectral
# --------------------------------------------------------------------------------------------------


def test_bundle_curvature_curve():
    logger.info("Executando test_bundle_curvature_curve...")
    report = spectral_bundle_curvature([["3/2"]], (4,), 1, 0)
    assert report.coefficient_over_pi == sympy.ImmutableMatrix([[sympy.Rational(-3, 2)]])
    assert report.rank == 4
    assert report.coefficient[0, 0] == -sympy.Rational(3, 2) * sympy.pi


def test_bundle_curvature_surface():
    """n=2, W=Id, delta=(1,2), q=1: diag(-pi/4, -pi) com posto 4."""
    logger.info("Executando test_bundle_curvature_surface...")
    report = spectral_bundle_curvature([[1, 0], [0, 1]], (1, 2), 2, 1)
    assert report.coefficient == sympy.ImmutableMatrix([[-sympy.pi / 4, 0], [0, -sympy.pi]])
    assert report.rank == 4
    assert report.is_hermitian()
    assert report.is_negative_semidefinite()
    assert report.as_dict()["coefficient_over_pi"] == [["-1/4", "0"], ["0", "-1"]]


def test_bundle_curvature_rank_formula():
    report = spectral_bundle_curvature([[2, 0, 0], [0, 1, 0], [0, 0, 1]], (1, 1, 3), 3, 2)
    assert report.rank == math.comb(4, 2) * 3


def test_bundle_curvature_rejects_bad_matrix():
    logger.info("Executando test_bundle_curvature_rejects_bad_matrix...")
    with pytest.raises(ValueError):
        spectral_bundle_curvature([[1, 1], [0, 1]], (1, 1), 2, 0)
    with pytest.raises(ValueError):
        spectral_bundle_curvature([[1]], (1, 1), 2, 0)
    with pytest.raises(ValueError):
        spectral_bundle_curvature([[1]], (1,), 2, 0)
