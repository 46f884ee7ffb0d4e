# tests/test_report_generator.py

import csv
import io
import json
import os
import sys
from fractions import Fraction
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.report_generator import (
    PDF_CREATION_DATE,
    SCHEMA,
    ReportGenerator,
    build_artifact,
    ladder_samples_to_csv,
    render,
    to_csv,
    to_json,
    to_pretty,
    write_output,
)
from src.spectra import SpectrumRow
from src.utils import setup_logging

logger = setup_logging()


@pytest.fixture
def spectrum_artifact():
    """Artefato de uma tabela espectral com autovalor racional e multiplicidade desconhecida."""
    rows = (
        SpectrumRow(0, Fraction(0), 2, ("holomorphic",)),
        SpectrumRow(1, Fraction(3, 2), None),
    )
    return build_artifact("spectrum abelian", {"B": Fraction(3, 2), "seed": 0}, rows)


@pytest.fixture
def verify_artifact():
    checks = [
        {"name": "landau[delta=1]", "pass": True,
         "details": {"comparison": {"feedback": "Espectro confere com os níveis analíticos!"}}},
        {"name": "gauge[delta=1,seed=0]", "pass": False, "details": {"max_difference": float("nan")}},
    ]
    return build_artifact("verify torus", {"seed": 0}, residuals={"checks": checks}, passed=False)


# --------------------------------------------------------------------------------------------------
# Artefato
# --------------------------------------------------------------------------------------------------


def test_artifact_schema(spectrum_artifact):
    logger.info("Executando test_artifact_schema...")
    assert spectrum_artifact["schema"] == SCHEMA
    assert spectrum_artifact["pass"] is True
    assert spectrum_artifact["params"]["B"] == {"num": "3", "den": "2"}
    assert spectrum_artifact["rows"][1] == {
        "q": 1, "eigenvalue": {"num": "3", "den": "2"}, "multiplicity": "unknown", "flags": [],
    }
    assert spectrum_artifact["rows"][0]["multiplicity"] == "2"


def test_artifact_sanitizes_numpy_and_non_finite_values(verify_artifact):
    logger.info("Executando test_artifact_sanitizes_numpy_and_non_finite_values...")
    artifact = build_artifact(
        "x", {"a": np.float64(0.5), "b": np.int64(3), "c": np.bool_(True), "z": complex(1, -2)},
        residuals={"inf": float("inf")},
    )
    assert artifact["params"] == {"a": 0.5, "b": 3, "c": True, "z": [1.0, -2.0]}
    assert artifact["residuals"]["inf"] == "inf"
    assert verify_artifact["residuals"]["checks"][1]["details"]["max_difference"] == "nan"


def test_json_is_deterministic(spectrum_artifact):
    logger.info("Executando test_json_is_deterministic...")
    text = to_json(spectrum_artifact)
    assert text == to_json(json.loads(text))
    assert text.endswith("\n")
    assert list(json.loads(text)) == sorted(json.loads(text))


def test_json_rejects_raw_nan():
    with pytest.raises(ValueError):
        to_json({"x": float("nan")})


def test_csv_rows(spectrum_artifact):
    logger.info("Executando test_csv_rows...")
    rows = list(csv.reader(io.StringIO(to_csv(spectrum_artifact))))
    assert rows[0] == ["q", "eigenvalue_num", "eigenvalue_den", "multiplicity", "flags"]
    assert rows[1] == ["0", "0", "1", "2", "holomorphic"]
    assert rows[2] == ["1", "3", "2", "unknown", ""]


def test_csv_checks(verify_artifact):
    rows = list(csv.reader(io.StringIO(to_csv(verify_artifact))))
    assert rows[0] == ["check", "pass"]
    assert rows[-1] == ["overall", "False"]
    assert len(rows) == 4


def test_pretty_output(spectrum_artifact, verify_artifact):
    logger.info("Executando test_pretty_output...")
    text = to_pretty(spectrum_artifact)
    assert text.startswith("spectrum abelian  [OK]")
    assert "3/2" in text
    assert "[x ] gauge[delta=1,seed=0]" in to_pretty(verify_artifact)


def test_render_dispatch(spectrum_artifact):
    assert render(spectrum_artifact, "json") == to_json(spectrum_artifact)
    assert render(spectrum_artifact, "csv") == to_csv(spectrum_artifact)
    with pytest.raises(ValueError):
        render(spectrum_artifact, "xml")


def test_ladder_samples_csv():
    text = ladder_samples_to_csv([(0.0, 0.5, 1.25, -0.1)])
    assert text == "x,y,re,im\n0.0,0.5,1.25,-0.1\n"


# --------------------------------------------------------------------------------------------------
# Escrita
# --------------------------------------------------------------------------------------------------


def test_write_output_to_file(tmp_path):
    logger.info("Executando test_write_output_to_file...")
    path = tmp_path / "out.json"
    assert write_output("{}\n", str(path)) == (True, None)
    assert path.read_text(encoding="utf-8") == "{}\n"


def test_write_output_to_stdout(capsys):
    assert write_output("abc\n") == (True, None)
    assert capsys.readouterr().out == "abc\n"


def test_write_output_failure(tmp_path):
    ok, error = write_output("x", str(tmp_path / "missing" / "out.json"))
    assert ok is False
    assert error


# --------------------------------------------------------------------------------------------------
# PDF
# --------------------------------------------------------------------------------------------------


@patch("src.report_generator.PDF")
def test_generate_report_success(mock_pdf_class, spectrum_artifact):
    """
    Testa o fluxo de sucesso da geração de um relatório PDF.
    """
    logger.info("Executando test_generate_report_success...")
    mock_pdf_instance = MagicMock()
    mock_pdf_class.return_value = mock_pdf_instance

    generator = ReportGenerator(spectrum_artifact)
    output_path = "test_report.pdf"
    success, error = generator.generate(output_path)

    assert success is True
    assert error is None
    mock_pdf_instance.add_page.assert_called_once()
    assert mock_pdf_instance.cell.call_count > 0
    assert mock_pdf_instance.multi_cell.call_count >= 2 + 2
    mock_pdf_instance.output.assert_called_once_with(output_path)


@patch("src.report_generator.PDF")
def test_generate_report_lists_checks(mock_pdf_class, verify_artifact):
    mock_pdf_instance = MagicMock()
    mock_pdf_class.return_value = mock_pdf_instance

    success, _ = ReportGenerator(verify_artifact).generate("verify.pdf")

    assert success is True
    texts = [c.args[2] for c in mock_pdf_instance.multi_cell.call_args_list]
    assert "[FALHOU] gauge[delta=1,seed=0]" in texts
    assert any("confere" in t for t in texts)


@patch("src.report_generator.PDF")
def test_generate_report_failure(mock_pdf_class, spectrum_artifact):
    """
    Testa o tratamento de erro quando a escrita do PDF falha.
    """
    logger.info("Executando test_generate_report_failure...")
    mock_pdf_instance = MagicMock()
    mock_pdf_instance.output.side_effect = Exception("Disk full")
    mock_pdf_class.return_value = mock_pdf_instance

    generator = ReportGenerator(spectrum_artifact)
    success, error = generator.generate("fail_report.pdf")

    assert success is False
    assert error == "Disk full"


def test_generate_real_pdf(tmp_path, verify_artifact):
    """Gera um PDF de verdade com fpdf2 e confere o cabeçalho do arquivo."""
    logger.info("Executando test_generate_real_pdf...")
    path = tmp_path / "relatorio.pdf"
    success, error = ReportGenerator(verify_artifact).generate(str(path))
    assert (success, error) == (True, None)
    assert path.read_bytes().startswith(b"%PDF")


def test_pdf_is_reproducible(tmp_path, verify_artifact):
    """O mesmo artefato gera sempre os mesmos bytes de PDF."""
    logger.info("Executando test_pdf_is_reproducible...")
    first, second = tmp_path / "a.pdf", tmp_path / "b.pdf"
    assert ReportGenerator(verify_artifact).generate(str(first)) == (True, None)
    assert ReportGenerator(verify_artifact).generate(str(second)) == (True, None)
    assert first.read_bytes() == second.read_bytes()


@patch("src.report_generator.PDF")
def test_pdf_header_identifies_run(mock_pdf_class, spectrum_artifact):
    mock_pdf_instance = MagicMock()
    mock_pdf_class.return_value = mock_pdf_instance

    ReportGenerator(spectrum_artifact)

    assert mock_pdf_instance.subtitle == "spectrum abelian (semente 0)"
    mock_pdf_instance.set_creation_date.assert_called_once_with(PDF_CREATION_DATE)
