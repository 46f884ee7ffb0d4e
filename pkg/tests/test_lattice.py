# tests/test_lattice.py

import math
import os
import sys

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.lattice import (
    KAPPA,
    LatticeOperator,
    TorusLatticeConfig,
    build_dbar,
    build_laplacian,
    build_links,
    convergence_study,
    gauge_invariance_check,
    gauge_transform,
    landau_report,
    low_spectrum,
    origin_translation_check,
    plaquettes,
    product_torus_report,
)
from src.utils import Tolerances, VerificationError, setup_logging

logger = setup_logging()

TWO_PI = 2 * math.pi


@pytest.fixture
def small_config():
    return TorusLatticeConfig(16, TWO_PI, 1)


@pytest.fixture
def landau_config():
    return TorusLatticeConfig(32, TWO_PI, 1)


# --------------------------------------------------------------------------------------------------
# Configuração e ligações
# --------------------------------------------------------------------------------------------------


def test_config_geometry():
    """B = 2*pi e delta = 1 dão lado 1 e área 2*pi*delta/B."""
    logger.info("Executando test_config_geometry...")
    config = TorusLatticeConfig(64, TWO_PI, 1)
    assert config.ell == pytest.approx(1.0)
    assert config.h == pytest.approx(1 / 64)
    assert config.dimension == 64 * 64
    assert config.as_dict() == {"N": 64, "B": TWO_PI, "delta": 1, "origin": 0}


@pytest.mark.parametrize("N,B,delta", [(4, 1.0, 1), (16, 0.0, 1), (16, -1.0, 1), (16, 1.0, 0), (16.0, 1.0, 1)])
def test_config_validation(N, B, delta):
    with pytest.raises(ValueError):
        TorusLatticeConfig(N, B, delta)


@pytest.mark.parametrize("origin", [0, 1, 5, 15])
@pytest.mark.parametrize("delta", [1, 2, 3])
def test_plaquette_phase_is_uniform(origin, delta):
    """Todas as plaquetas, inclusive na costura, têm fase 2*pi*delta/N^2."""
    config = TorusLatticeConfig(16, 1.0, delta, origin)
    links = build_links(config)
    expected = np.exp(2j * np.pi * delta / 256)
    assert np.allclose(plaquettes(links), expected, atol=1e-12)
    assert np.allclose(np.abs(links.ux), 1.0)
    assert np.allclose(np.abs(links.uy), 1.0)


def test_zero_flux_links_are_trivial(small_config):
    links = build_links(small_config, flux=0)
    assert np.allclose(links.ux, 1.0)
    assert np.allclose(links.uy, 1.0)


def test_plaquettes_are_gauge_invariant(small_config):
    logger.info("Executando test_plaquettes_are_gauge_invariant...")
    links = build_links(small_config)
    phases = np.random.default_rng(3).uniform(0, TWO_PI, size=(16, 16))
    assert np.allclose(plaquettes(gauge_transform(links, phases)), plaquettes(links), atol=1e-12)


# --------------------------------------------------------------------------------------------------
# Operadores
# --------------------------------------------------------------------------------------------------


@pytest.mark.parametrize("direction", ["forward", "backward"])
def test_dbar_without_flux_annihilates_constants(small_config, direction):
    """Com fluxo zero o vetor constante está no núcleo de D_bar."""
    logger.info(f"Executando test_dbar_without_flux_annihilates_constants ({direction})...")
    op = build_dbar(small_config, direction=direction, flux=0)
    assert not op.hermitian
    ones = np.ones(small_config.dimension, dtype=complex)
    assert np.abs(op.matrix @ ones).max() < 1e-12


def test_dbar_rejects_unknown_direction(small_config):
    with pytest.raises(ValueError):
        build_dbar(small_config, direction="central")


def test_laplacian_is_exactly_hermitian(small_config):
    logger.info("Executando test_laplacian_is_exactly_hermitian...")
    op = build_laplacian(small_config)
    assert op.hermitian
    assert (op.matrix - op.matrix.conj().T).nnz == 0
    assert op.dimension == 256
    assert op.max_row_nonzeros() <= 7


def test_laplacian_without_flux_has_constant_zero_mode(small_config):
    op = build_laplacian(small_config, flux=0)
    ones = np.ones(small_config.dimension, dtype=complex)
    assert np.abs(op.matrix @ ones).max() < 1e-10
    assert low_spectrum(op, 1)[0] == pytest.approx(0.0, abs=1e-9)


# --------------------------------------------------------------------------------------------------
# Solver de autovalores
# --------------------------------------------------------------------------------------------------


def test_low_spectrum_of_zero_matrix():
    logger.info("Executando test_low_spectrum_of_zero_matrix...")
    op = LatticeOperator(sp.csr_matrix((10, 10), dtype=complex), hermitian=True)
    assert np.allclose(low_spectrum(op, 3), 0.0)


def test_low_spectrum_of_diagonal_matrix_dense_path():
    op = LatticeOperator(sp.diags([5.0, 1.0, 3.0, 2.0, 4.0]).tocsr(), hermitian=True)
    assert np.allclose(low_spectrum(op, 3), [1.0, 2.0, 3.0])


def test_low_spectrum_sparse_path_is_sorted():
    """Acima de 48^2 linhas usa Lanczos com shift-invert."""
    logger.info("Executando test_low_spectrum_sparse_path_is_sorted...")
    n = 50 * 50
    values = np.arange(n, 0, -1, dtype=float)
    op = LatticeOperator(sp.diags(values).tocsr(), hermitian=True)
    assert np.allclose(low_spectrum(op, 4, seed=1), [1.0, 2.0, 3.0, 4.0])


def test_low_spectrum_validation(small_config):
    logger.info("Executando test_low_spectrum_validation...")
    with pytest.raises(ValueError):
        low_spectrum(build_dbar(small_config), 2)
    op = build_laplacian(small_config)
    with pytest.raises(ValueError):
        low_spectrum(op, 0)
    with pytest.raises(ValueError):
        low_spectrum(op, op.dimension + 1)


def test_low_spectrum_reports_residual(mocker):
    """Autopares inconsistentes viram VerificationError."""
    op = LatticeOperator(sp.diags([1.0, 2.0, 3.0]).tocsr(), hermitian=True)
    mocker.patch("src.lattice.eigh", return_value=(np.array([7.0]), np.eye(3)[:, :1]))
    with pytest.raises(VerificationError) as info:
        low_spectrum(op, 1)
    assert info.value.details["max_residual"] > 0


def test_low_spectrum_residual_gate_does_not_scale_with_norm(mocker):
    """O limite do resíduo é absoluto, mesmo para operadores de norma grande."""
    logger.info("Executando test_low_spectrum_residual_gate_does_not_scale_with_norm...")
    op = LatticeOperator(sp.diags([1e4, 2e4, 3e4]).tocsr(), hermitian=True)
    assert low_spectrum(op, 1)[0] == pytest.approx(1e4)

    mocker.patch("src.lattice.eigh", return_value=(np.array([1e4 + 1e-6]), np.eye(3)[:, :1]))
    with pytest.raises(VerificationError) as info:
        low_spectrum(op, 1)
    assert info.value.details["tolerance"] == Tolerances().eigen_residual
    assert info.value.details["max_residual"] == pytest.approx(1e-6, rel=1e-3)


# --------------------------------------------------------------------------------------------------
# Níveis de Landau
# --------------------------------------------------------------------------------------------------


def test_landau_levels(landau_config):
    """kappa * Delta_lat reproduz q*B com multiplicidade delta."""
    logger.info("Executando test_landau_levels...")
    report = landau_report(landau_config, 3)
    assert report.passed, report.comparison.feedback
    assert len(report.eigenvalues) == 3
    assert [m.count for m in report.comparison.matches] == [1, 1, 1]
    assert report.as_dict()["kappa"] == KAPPA


def test_landau_levels_scale_with_curvature():
    """Dobrar B dobra todos os autovalores (h^2 escala com 1/B)."""
    logger.info("Executando test_landau_levels_scale_with_curvature...")
    base = landau_report(TorusLatticeConfig(16, 1.0, 1), 2, strict=False)
    doubled = landau_report(TorusLatticeConfig(16, 2.0, 1), 2, strict=False)
    assert np.allclose(doubled.eigenvalues, 2 * np.array(base.eigenvalues), rtol=1e-8, atol=1e-10)


def test_landau_strict_failure_carries_report(mocker, landau_config):
    logger.info("Executando test_landau_strict_failure_carries_report...")
    mocker.patch("src.lattice.low_spectrum", return_value=np.array([0.0, 1.0, 1.1]))
    with pytest.raises(VerificationError) as info:
        landau_report(landau_config, 3)
    assert info.value.details["pass"] is False
    assert "comparison" in info.value.details

    report = landau_report(landau_config, 3, strict=False)
    assert not report.passed


def test_landau_rejects_negative_eigenvalues(mocker, landau_config):
    mocker.patch("src.lattice.low_spectrum", return_value=np.array([-0.5, 3.0, 6.0]))
    with pytest.raises(VerificationError) as info:
        landau_report(landau_config, 3)
    assert info.value.details["min_eigenvalue"] == -0.5


def test_landau_rejects_too_many_levels(small_config):
    with pytest.raises(ValueError):
        landau_report(small_config, 0)
    with pytest.raises(ValueError):
        landau_report(small_config, small_config.dimension + 1)


@pytest.mark.slow
@pytest.mark.parametrize("delta", [1, 2, 3])
def test_landau_levels_default_grid(delta):
    logger.info(f"Executando test_landau_levels_default_grid (delta={delta})...")
    report = landau_report(TorusLatticeConfig(64, TWO_PI, delta), 4)
    assert report.passed, report.comparison.feedback
    matches = report.comparison.matches
    assert [m.q for m in matches] == [0, 1, 2, 3]
    assert [m.count for m in matches] == [delta] * 4
    assert abs(matches[0].center) < 0.02 * TWO_PI
    assert all(m.relative_error < 0.05 for m in matches[1:])


# --------------------------------------------------------------------------------------------------
# Simetrias
# --------------------------------------------------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 7])
def test_gauge_invariance(small_config, seed):
    logger.info(f"Executando test_gauge_invariance (seed={seed})...")
    assert gauge_invariance_check(small_config, seed=seed)


def test_identity_gauge_transform(small_config):
    assert gauge_invariance_check(small_config, identity=True, k=2)


def test_gauge_check_detects_broken_covariance(mocker, small_config):
    """Se a transformação não for aplicada às ligações, a covariância falha."""
    logger.info("Executando test_gauge_check_detects_broken_covariance...")
    mocker.patch("src.lattice.gauge_transform", side_effect=lambda links, phases: links)
    with pytest.raises(VerificationError) as info:
        gauge_invariance_check(small_config, seed=1)
    assert info.value.details["operator_error"] > 0


@pytest.mark.parametrize("shift", [1, 5])
def test_origin_translation(small_config, shift):
    assert origin_translation_check(small_config, shift)


# --------------------------------------------------------------------------------------------------
# Convergência e toro produto
# --------------------------------------------------------------------------------------------------


def test_convergence_study_error_decreases():
    logger.info("Executando test_convergence_study_error_decreases...")
    study = convergence_study(TorusLatticeConfig(16, TWO_PI, 1), [32, 16], q_levels=2)
    assert [row["N"] for row in study.rows] == [16, 32]
    assert len(study.orders) == 1
    assert study.rows[1]["max_error"] < study.rows[0]["max_error"]
    assert study.orders[0] > 0


def test_product_torus_pairwise(landau_config):
    logger.info("Executando test_product_torus_pairwise...")
    report = product_torus_report(landau_config, landau_config, 2)
    assert report.passed, report.comparison.feedback
    assert report.method == "pairwise"
    assert [m.count for m in report.comparison.matches] == [1, 2]


def test_product_torus_kronecker_matches_pairwise():
    """A soma de Kronecker e a soma dos espectros dos fatores dão os mesmos valores."""
    logger.info("Executando test_product_torus_kronecker_matches_pairwise...")
    config = TorusLatticeConfig(8, TWO_PI, 1)
    pairwise = product_torus_report(config, config, 2)
    kron = product_torus_report(config, config, 2, use_kronecker=True)
    assert kron.method == "kronecker"

    def flatten(report):
        return sorted(v for cluster in report.comparison.clusters for v in cluster.values)

    assert np.allclose(flatten(kron), flatten(pairwise), rtol=1e-8, atol=1e-10)


def test_product_torus_requires_same_curvature():
    with pytest.raises(ValueError):
        product_torus_report(TorusLatticeConfig(8, 1.0, 1), TorusLatticeConfig(8, 2.0, 1), 2)
