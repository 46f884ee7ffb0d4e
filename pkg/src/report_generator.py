# src/report_generator.py

import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np
from fpdf import FPDF
from fpdf.enums import XPos, YPos

from src.utils import fraction_to_json, get_logger

logger = get_logger(__name__)

SCHEMA = "spectral-bundles/v1"
FORMATS = ("json", "csv", "pretty")

# data fixa nos metadados: mesmo artefato, mesmo PDF
PDF_CREATION_DATE = datetime(2000, 1, 1, tzinfo=timezone.utc)


def row_to_json(row) -> dict:
    """SpectrumRow -> linha do artefato; multiplicidade desconhecida vira "unknown"."""
    return {
        "q": int(row.q),
        "eigenvalue": fraction_to_json(row.eigenvalue),
        "multiplicity": "unknown" if row.multiplicity is None else str(row.multiplicity),
        "flags": list(row.flags),
    }


def _sanitize(value):
    """Converte o conteúdo em tipos JSON puros (sem NaN/Infinity)."""
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, Fraction):
        return fraction_to_json(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def build_artifact(command: str, params: dict, rows=(), residuals=None, passed: bool = True) -> dict:
    """
    Monta o artefato no esquema spectral-bundles/v1.

    Args:
        command (str): Subcomando que gerou o artefato.
        params (dict): Parâmetros da execução (incluindo a semente).
        rows: Sequência de SpectrumRow.
        residuals (dict, optional): Resíduos e detalhes das verificações.
        passed (bool): Veredito final.
    """
    return _sanitize(
        {
            "schema": SCHEMA,
            "command": command,
            "params": params,
            "rows": [row_to_json(row) for row in rows],
            "residuals": residuals or {},
            "pass": bool(passed),
        }
    )


def to_json(artifact: dict) -> str:
    """JSON com chaves ordenadas: mesma entrada, mesmos bytes."""
    return json.dumps(artifact, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def to_csv(artifact: dict) -> str:
    """Tabela CSV das linhas do artefato, ou das verificações quando não há linhas."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if artifact["rows"]:
        writer.writerow(["q", "eigenvalue_num", "eigenvalue_den", "multiplicity", "flags"])
        for row in artifact["rows"]:
            writer.writerow(
                [row["q"], row["eigenvalue"]["num"], row["eigenvalue"]["den"], row["multiplicity"],
                 ";".join(row["flags"])]
            )
    else:
        writer.writerow(["check", "pass"])
        for check in artifact["residuals"].get("checks", []):
            writer.writerow([check["name"], check["pass"]])
        writer.writerow(["overall", artifact["pass"]])
    return buffer.getvalue()


def _eigenvalue_text(value: dict) -> str:
    return value["num"] if value["den"] == "1" else f"{value['num']}/{value['den']}"


def to_pretty(artifact: dict) -> str:
    """Tabela de texto legível para o terminal."""
    lines = [f"{artifact['command']}  [{'OK' if artifact['pass'] else 'FALHOU'}]"]
    params = ", ".join(f"{k}={v}" for k, v in sorted(artifact["params"].items()))
    lines.append(f"parâmetros: {params}")
    if artifact["rows"]:
        lines.append(f"{'q':>4}  {'autovalor':>14}  {'mult.':>8}  flags")
        for row in artifact["rows"]:
            lines.append(
                f"{row['q']:>4}  {_eigenvalue_text(row['eigenvalue']):>14}  {row['multiplicity']:>8}  "
                f"{','.join(row['flags'])}"
            )
    for check in artifact["residuals"].get("checks", []):
        lines.append(f"  [{'ok' if check['pass'] else 'x '}] {check['name']}")
    return "\n".join(lines) + "\n"


def render(artifact: dict, output_format: str) -> str:
    if output_format == "json":
        return to_json(artifact)
    if output_format == "csv":
        return to_csv(artifact)
    if output_format == "pretty":
        return to_pretty(artifact)
    raise ValueError(f"Formato desconhecido: '{output_format}'. Use um de {FORMATS}.")


def write_output(text: str, output_path: str | None = None):
    """
    Escreve o texto no arquivo indicado ou na saída padrão.

    Returns:
        tuple: (True, None) em caso de sucesso, (False, mensagem) em caso de erro.
    """
    try:
        if output_path is None:
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(output_path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            logger.info(f"Artefato salvo em: {output_path}")
        return True, None
    except OSError as e:
        logger.error(f"Falha ao escrever a saída em {output_path}: {e}", exc_info=True)
        return False, str(e)


def ladder_samples_to_csv(samples) -> str:
    """Amostras (x, y, re, im) de uma seção para plotagem externa."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["x", "y", "re", "im"])
    for x, y, re, im in samples:
        writer.writerow([repr(x), repr(y), repr(re), repr(im)])
    return buffer.getvalue()


def _latin1(text: str) -> str:
    # fontes padrão do PDF só cobrem latin-1
    return str(text).encode("latin-1", "replace").decode("latin-1")


class PDF(FPDF):
    """
    Classe customizada que herda de FPDF para permitir cabeçalhos e rodapés padronizados.
    O subtítulo identifica a execução (comando e semente) no lugar da hora de geração.
    """

    subtitle = ""

    def header(self):
        self.set_font("Helvetica", "B", 16)
        self.cell(0, 10, _latin1("Relatório de Verificação Espectral"), align="C",
                  new_x=XPos.LMARGIN, new_y=YPos.NEXT)
        self.set_font("Helvetica", "I", 8)
        self.cell(0, 10, _latin1(self.subtitle), align="C",
                  new_x=XPos.LMARGIN, new_y=YPos.NEXT)
        self.ln(10)

    def footer(self):
        self.set_y(-15)
        self.set_font("Helvetica", "I", 8)
        self.cell(0, 10, _latin1(f"Página {self.page_no()}"), align="C")


class ReportGenerator:
    """
    Gera um resumo em PDF de qualquer artefato spectral-bundles/v1.
    """

    def __init__(self, artifact: dict):
        self.artifact = artifact
        self.pdf = PDF()
        self.pdf.subtitle = f"{artifact.get('command')} (semente {artifact.get('params', {}).get('seed')})"
        self.pdf.set_creation_date(PDF_CREATION_DATE)
        logger.info(f"ReportGenerator inicializado para o comando '{artifact.get('command')}'.")

    def _add_section_title(self, title):
        """Adiciona um título de seção padronizado."""
        self.pdf.set_font("Helvetica", "B", 14)
        self.pdf.cell(0, 10, _latin1(title), new_x=XPos.LMARGIN, new_y=YPos.NEXT)
        self.pdf.line(self.pdf.get_x(), self.pdf.get_y(), self.pdf.get_x() + 190, self.pdf.get_y())
        self.pdf.ln(5)

    def _add_line(self, text, style=""):
        self.pdf.set_font("Helvetica", style, 11)
        self.pdf.multi_cell(0, 8, _latin1(text), new_x=XPos.LMARGIN, new_y=YPos.NEXT)

    def _add_summary(self):
        self._add_section_title("Resumo")
        verdict = "APROVADO" if self.artifact["pass"] else "REPROVADO"
        self._add_line(f"Comando: {self.artifact['command']}")
        self._add_line(f"Resultado: {verdict}", "B")
        for key, value in sorted(self.artifact["params"].items()):
            self._add_line(f"{key} = {value}")
        self.pdf.ln(5)

    def _add_rows(self):
        self._add_section_title("Tabela Espectral")
        for row in self.artifact["rows"]:
            flags = f" ({', '.join(row['flags'])})" if row["flags"] else ""
            self._add_line(
                f"q = {row['q']}: autovalor {_eigenvalue_text(row['eigenvalue'])}, "
                f"multiplicidade {row['multiplicity']}{flags}"
            )
        self.pdf.ln(5)

    def _add_checks(self, checks):
        self._add_section_title("Verificações")
        for check in checks:
            self._add_line(f"[{'ok' if check['pass'] else 'FALHOU'}] {check['name']}")
            feedback = check.get("details", {}).get("comparison", {}).get("feedback")
            if feedback:
                self._add_line(f"    {feedback}", "I")

    def generate(self, output_path):
        """
        Gera e salva o arquivo PDF.

        Returns:
            tuple: (True, None) em caso de sucesso, (False, mensagem) em caso de erro.
        """
        try:
            logger.info(f"Iniciando a geração do PDF para: {output_path}")
            self.pdf.add_page()
            self._add_summary()
            if self.artifact["rows"]:
                self._add_rows()
            checks = self.artifact["residuals"].get("checks", [])
            if checks:
                self._add_checks(checks)
            self.pdf.output(output_path)
            logger.info(f"Relatório PDF gerado com sucesso em: {output_path}")
            return True, None
        except Exception as e:
            logger.error(f"Falha ao gerar o relatório PDF: {e}", exc_info=True)
            return False, str(e)
