# src/galerkin.py

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy
from scipy.linalg import LinAlgError, cholesky, eigh

from src.level_comparator import LevelComparator, LevelTarget
from src.spectra import SpectrumRow, SpectrumTable, Space, pn_eigenvalue
from src.utils import Tolerances, VerificationError, get_logger

logger = get_logger(__name__)


@lru_cache(maxsize=None)
def moment(p: int, s: int) -> Fraction:
    """
    (1/pi) int_C |z|^{2p} (1+|z|^2)^{-s} dx dy = p! (s-p-2)! / (s-1)!.

    Raises:
        ValueError: Se p < 0 ou s < p + 2 (integral divergente).
    """
    if p < 0 or s < p + 2:
        raise ValueError(f"Momento divergente ou inválido: p={p}, s={s} (exige s >= p+2).")
    return Fraction(math.factorial(p) * math.factorial(s - p - 2), math.factorial(s - 1))


@dataclass(frozen=True)
class BasisSpec:
    """
    Espaço de teste psi_{j,k} = z^j zbar^k (1+|z|^2)^{-m} para seções de O(B)
    sobre P^1, com j <= min(d, B+m) e k <= min(d, m).

    Esses limites selecionam exatamente as funções que se estendem ao ponto no
    infinito; o espaço resultante é a soma dos níveis 0..m.
    """

    B: int
    m: int
    d: int

    def __post_init__(self):
        if not isinstance(self.B, int) or self.B < 1:
            raise ValueError(f"B deve ser um inteiro >= 1, recebido {self.B!r}.")
        if self.m < 0 or self.d < 0:
            raise ValueError(f"m e d devem ser >= 0, recebido m={self.m}, d={self.d}.")

    def functions(self) -> list:
        return [
            (j, k)
            for j in range(min(self.d, self.B + self.m) + 1)
            for k in range(min(self.d, self.m) + 1)
        ]

    def angular_momenta(self) -> list:
        return sorted({j - k for j, k in self.functions()})


@dataclass(frozen=True)
class GalerkinBlock:
    """
    Formas de Gram e de rigidez (exatas) restritas ao bloco de momento
    angular ell = j - k. pi foi cancelado de todas as entradas.
    """

    ell: int
    indices: tuple
    gram: sympy.ImmutableMatrix
    stiff_dbar: sympy.ImmutableMatrix
    stiff_d: sympy.ImmutableMatrix

    @property
    def size(self) -> int:
        return len(self.indices)


def _dbar_terms(j, k, m):
    # d_zbar psi = [k z^j zbar^{k-1} + (k-m) z^{j+1} zbar^k] (1+|z|^2)^{-m-1}
    terms = []
    if k > 0:
        terms.append((k, j, k - 1))
    if k - m != 0:
        terms.append((k - m, j + 1, k))
    return terms


def _nabla_terms(j, k, m, B):
    # nabla psi = [j z^{j-1} zbar^k + (j-m-B) z^j zbar^{k+1}] (1+|z|^2)^{-m-1}
    terms = []
    if j > 0:
        terms.append((j, j - 1, k))
    if j - m - B != 0:
        terms.append((j - m - B, j, k + 1))
    return terms


def _pair(first, second, s, origin):
    """
    sum c1 c2 (1/pi) int z^{a+d} zbar^{b+c} (1+|z|^2)^{-s}, com first =
    [(c1, a, b)] e second = [(c2, c, d)] (second entra conjugado).
    """
    total = Fraction(0)
    for c1, a, b in first:
        for c2, c, d in second:
            if a + d != b + c:
                continue
            try:
                total += c1 * c2 * moment(a + d, s)
            except ValueError as e:
                raise ValueError(f"Momento divergente para a função de base {origin}: {e}") from e
    return total


def _to_matrix(entries) -> sympy.ImmutableMatrix:
    return sympy.ImmutableMatrix(
        [[sympy.Rational(x.numerator, x.denominator) for x in row] for row in entries]
    )


def _form_entry(spec, kind, f1, f2):
    (j1, k1), (j2, k2) = f1, f2
    B, m = spec.B, spec.m
    if kind == "gram":
        return _pair([(1, j1, k1)], [(1, j2, k2)], 2 * m + B + 2, f1)
    if kind == "dbar":
        return _pair(_dbar_terms(j1, k1, m), _dbar_terms(j2, k2, m), 2 * m + 2 + B, f1)
    return _pair(_nabla_terms(j1, k1, m, B), _nabla_terms(j2, k2, m, B), 2 * m + 2 + B, f1)


def assemble(spec: BasisSpec, check_cross_blocks: bool = True) -> list:
    """
    Monta, em aritmética racional exata, os blocos de Gram (peso
    (1+|z|^2)^{-B-2}) e de rigidez de Delta_0 e Delta^0 (peso (1+|z|^2)^{-B}),
    com c = 2.

    Raises:
        ValueError: Se algum momento necessário divergir (indica a função de
            base responsável).
        VerificationError: Se alguma entrada entre blocos diferentes não for nula.
    """
    functions = spec.functions()
    logger.info(f"Montando Galerkin em P^1: B={spec.B}, m={spec.m}, d={spec.d}, {len(functions)} funções.")

    if check_cross_blocks:
        for f1 in functions:
            for f2 in functions:
                if f1[0] - f1[1] == f2[0] - f2[1]:
                    continue
                for kind in ("gram", "dbar", "d"):
                    if _form_entry(spec, kind, f1, f2) != 0:
                        raise VerificationError(
                            "Entrada não nula entre blocos de momento angular distintos.",
                            {"first": list(f1), "second": list(f2), "form": kind},
                        )

    blocks = []
    for ell in spec.angular_momenta():
        indices = tuple(f for f in functions if f[0] - f[1] == ell)
        forms = {}
        for kind in ("gram", "dbar", "d"):
            forms[kind] = _to_matrix(
                [[_form_entry(spec, kind, f1, f2) for f2 in indices] for f1 in indices]
            )
        blocks.append(GalerkinBlock(ell, indices, forms["gram"], forms["dbar"], forms["d"]))
    return blocks


def kodaira_difference_check(B: int, m: int, d: int) -> bool:
    """
    Confere, bloco a bloco e em racionais exatos, A_d - A_dbar = B * Gram,
    a forma quadrática de Delta^0 - Delta_0 = B Id.

    Raises:
        VerificationError: Se alguma entrada diferir.
    """
    spec = BasisSpec(B, m, d)
    for block in assemble(spec):
        difference = block.stiff_d - block.stiff_dbar - B * block.gram
        if not difference.is_zero_matrix:
            logger.error(f"Kodaira falhou no bloco ell={block.ell}.")
            raise VerificationError(
                "A_d - A_dbar != B * Gram.",
                {"B": B, "m": m, "d": d, "ell": block.ell, "difference": str(difference.tolist())},
            )
    logger.info(f"Identidade A_d - A_dbar = B*Gram verificada (B={B}, m={m}, d={d}).")
    return True


def denominator_bound_holds(spec: BasisSpec) -> bool:
    """Todos os denominadores de Gram e rigidez dividem (B + 2m + 1)!."""
    bound = math.factorial(spec.B + 2 * spec.m + 1)
    for block in assemble(spec, check_cross_blocks=False):
        for matrix in (block.gram, block.stiff_dbar, block.stiff_d):
            if any(bound % sympy.Rational(x).q != 0 for x in matrix):
                return False
    return True


@dataclass(frozen=True)
class BlockSpectrum:
    ell: int
    eigenvalues: tuple
    residuals: tuple


def _as_float(matrix: sympy.ImmutableMatrix) -> np.ndarray:
    return np.array(matrix.tolist(), dtype=float)


def block_spectrum(block: GalerkinBlock, k: int | None = None, operator: str = "dbar",
                   tolerances: Tolerances | None = None) -> BlockSpectrum:
    """
    Menores k autovalores generalizados de A v = lambda M v, com conversão
    para float, escala diagonal e redução de Cholesky.

    Raises:
        VerificationError: Se M não for positiva definida ou se algum resíduo
            ||A v - lambda M v|| exceder a tolerância.
    """
    tol = (tolerances or Tolerances()).galerkin_residual
    A = _as_float(block.stiff_dbar if operator == "dbar" else block.stiff_d)
    M = _as_float(block.gram)
    # escala de Jacobi: mesmos autovalores, melhor condicionamento
    D = np.diag(1.0 / np.sqrt(np.diag(M)))
    A, M = D @ A @ D, D @ M @ D
    try:
        cholesky(M, lower=True)
    except LinAlgError as e:
        logger.error(f"Gram indefinida no bloco ell={block.ell}: {e}", exc_info=True)
        raise VerificationError("Matriz de Gram não é positiva definida.", {"ell": block.ell}) from e

    values, vectors = eigh(A, M)
    count = len(values) if k is None else min(k, len(values))
    values, vectors = values[:count], vectors[:, :count]
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    residuals = tuple(
        float(np.linalg.norm(A @ vectors[:, i] - values[i] * (M @ vectors[:, i])) / scale)
        for i in range(count)
    )
    if any(r > tol for r in residuals):
        raise VerificationError(
            "Resíduo do problema generalizado acima da tolerância.",
            {"ell": block.ell, "residuals": list(residuals)},
        )
    return BlockSpectrum(block.ell, tuple(float(v) for v in values), residuals)


@dataclass
class P1SpectrumReport:
    table: SpectrumTable
    comparison: object
    residuals: dict
    kodaira: bool

    @property
    def passed(self) -> bool:
        return self.kodaira and self.comparison.passed


def p1_spectrum_report(B: int, m: int, d: int, q_max: int, tolerances: Tolerances | None = None,
                       threads: int = 1, operator: str = "dbar") -> P1SpectrumReport:
    """
    Resolve todos os blocos, agrupa os autovalores com lacuna 1 e compara com
    q(B+q+1) (multiplicidade B+2q+1) para q <= q_max. Com operator="d" os
    alvos são deslocados por B (Delta^0 = Delta_0 + B).

    Raises:
        ValueError: Se m < q_max + 1 ou d < B + 2m.
    """
    if m < q_max + 1:
        raise ValueError(f"m={m} precisa ser >= q_max + 1 = {q_max + 1}.")
    if d < B + 2 * m:
        raise ValueError(f"d={d} precisa ser >= B + 2m = {B + 2 * m}.")
    tolerances = tolerances or Tolerances()
    spec = BasisSpec(B, m, d)
    blocks = assemble(spec)
    kodaira = kodaira_difference_check(B, m, d)

    def solve(block):
        return block_spectrum(block, operator=operator, tolerances=tolerances)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(solve, blocks))
    else:
        spectra = [solve(block) for block in blocks]

    merged = sorted((value, s.ell) for s in spectra for value in s.eigenvalues)
    values = [value for value, _ in merged]
    shift = B if operator == "d" else 0
    targets = [
        LevelTarget(q, float(pn_eigenvalue(1, B, q) + shift), B + 2 * q + 1) for q in range(q_max + 1)
    ]
    comparator = LevelComparator(
        relative_tolerance=tolerances.galerkin_relative,
        zero_tolerance=tolerances.galerkin_relative,
    )
    comparison = comparator.compare(values, targets, gap=1.0)

    rows = tuple(
        SpectrumRow(match.q, pn_eigenvalue(1, B, match.q) + shift, match.count, ("measured",))
        for match in comparison.matches
    )
    table = SpectrumTable(Space.PROJECTIVE, {"n": 1, "B": B, "m": m, "d": d, "q_max": q_max}, rows)
    residuals = {
        "max_block_residual": max((max(s.residuals) for s in spectra if s.residuals), default=0.0),
        "levels": [
            {"q": match.q, "center": match.center, "relative_error": match.relative_error}
            for match in comparison.matches
        ],
    }
    report = P1SpectrumReport(table, comparison, residuals, kodaira)
    logger.info(f"Relatório P^1 (B={B}, m={m}, d={d}): {'ok' if report.passed else 'FALHOU'}.")
    return report
