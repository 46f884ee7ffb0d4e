# src/exppoly.py

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
import sympy

from src.utils import Tolerances, VerificationError, get_logger

logger = get_logger(__name__)

THETA_TAIL = 1e-16
AUTOMORPHY_POINTS = 32
PERIODICITY_POINTS = 8
NUMERIC_DIGITS = 30


class OperatorKind(str, Enum):
    DZ = "dz"
    DZBAR = "dzbar"
    COV_DZ = "cov_dz"
    DELTA0 = "delta0"
    DELTA_UP0 = "delta_up0"


def _canon(value) -> sympy.Expr:
    return sympy.expand(sympy.sympify(value))


def _sort_key(key):
    p, r, g, a, b = key
    return (p, r, sympy.default_sort_key(g), sympy.default_sort_key(a), sympy.default_sort_key(b))


@dataclass(frozen=True)
class ExpPolyTerm:
    """
    Termo coeff * z^p * zbar^r * exp(g z^2 + a z + b zbar).

    A taxa gaussiana holomorfa g é zero em quase todo lugar; ela só aparece
    no fator e^{B z^2 / 2} das funções theta.
    """

    coeff: sympy.Expr
    p: int
    r: int
    a: sympy.Expr = sympy.Integer(0)
    b: sympy.Expr = sympy.Integer(0)
    g: sympy.Expr = sympy.Integer(0)

    def __post_init__(self):
        if self.p < 0 or self.r < 0:
            raise ValueError(f"Expoentes negativos não são permitidos: p={self.p}, r={self.r}.")
        object.__setattr__(self, "coeff", _canon(self.coeff))
        object.__setattr__(self, "a", _canon(self.a))
        object.__setattr__(self, "b", _canon(self.b))
        object.__setattr__(self, "g", _canon(self.g))

    @property
    def key(self) -> tuple:
        return (self.p, self.r, self.g, self.a, self.b)

    def with_coeff(self, coeff, dp: int = 0, dr: int = 0) -> "ExpPolyTerm":
        return ExpPolyTerm(coeff, self.p + dp, self.r + dr, self.a, self.b, self.g)


def _canonical_terms(terms) -> tuple:
    merged = {}
    for term in terms:
        merged[term.key] = merged.get(term.key, 0) + term.coeff
    result = []
    for key in sorted(merged, key=_sort_key):
        coeff = sympy.expand(merged[key])
        if coeff == 0:
            continue
        p, r, g, a, b = key
        result.append(ExpPolyTerm(coeff, p, r, a, b, g))
    return tuple(result)


@dataclass(frozen=True)
class ExpPolySection:
    """
    Seção sobre o recobrimento universal do toro plano: soma finita de
    ExpPolyTerm em forma canônica (termos com a mesma chave somados, termos
    nulos descartados).

    tensor_level é só contabilidade (T é trivial no toro); valores negativos
    indicam potências de T*.
    """

    B: sympy.Rational
    terms: tuple = ()
    tensor_level: int = 0
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        B = sympy.Rational(self.B)
        if B <= 0:
            raise ValueError(f"A constante de curvatura B deve ser positiva, recebido {B}.")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "terms", _canonical_terms(self.terms))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def _compatible(self, other: "ExpPolySection"):
        if self.B != other.B:
            raise ValueError(f"Seções com B diferentes: {self.B} e {other.B}.")

    def __add__(self, other: "ExpPolySection") -> "ExpPolySection":
        self._compatible(other)
        return ExpPolySection(self.B, self.terms + other.terms, self.tensor_level)

    def __sub__(self, other: "ExpPolySection") -> "ExpPolySection":
        return self + other.scale(-1)

    def __neg__(self) -> "ExpPolySection":
        return self.scale(-1)

    def __mul__(self, other: "ExpPolySection") -> "ExpPolySection":
        """Produto ponto a ponto de duas seções (usado na regra de Leibniz)."""
        self._compatible(other)
        terms = [
            ExpPolyTerm(s.coeff * t.coeff, s.p + t.p, s.r + t.r, s.a + t.a, s.b + t.b, s.g + t.g)
            for s in self.terms
            for t in other.terms
        ]
        return ExpPolySection(self.B, tuple(terms), self.tensor_level + other.tensor_level)

    def scale(self, factor) -> "ExpPolySection":
        factor = sympy.sympify(factor)
        return ExpPolySection(
            self.B, tuple(t.with_coeff(t.coeff * factor) for t in self.terms), self.tensor_level
        )

    def with_terms(self, terms, tensor_level: int | None = None) -> "ExpPolySection":
        level = self.tensor_level if tensor_level is None else tensor_level
        return ExpPolySection(self.B, tuple(terms), level)

    def is_holomorphic(self) -> bool:
        return apply_operator(OperatorKind.DZBAR, self).is_zero


def section(B, terms=(), tensor_level: int = 0) -> ExpPolySection:
    return ExpPolySection(sympy.Rational(B), tuple(terms), tensor_level)


def exponential(B, a=0, b=0, coeff=1) -> ExpPolySection:
    """Atalho para coeff * e^{az + bzbar}."""
    return section(B, (ExpPolyTerm(coeff, 0, 0, a, b),))


# --------------------------------------------------------------------------------------------------
# Operadores
# --------------------------------------------------------------------------------------------------


def _dz_terms(terms):
    out = []
    for t in terms:
        if t.p > 0:
            out.append(t.with_coeff(t.p * t.coeff, dp=-1))
        if t.a != 0:
            out.append(t.with_coeff(t.a * t.coeff))
        if t.g != 0:
            out.append(t.with_coeff(2 * t.g * t.coeff, dp=1))
    return out


def _dzbar_terms(terms):
    out = []
    for t in terms:
        if t.r > 0:
            out.append(t.with_coeff(t.r * t.coeff, dr=-1))
        if t.b != 0:
            out.append(t.with_coeff(t.b * t.coeff))
    return out


def _cov_dz_terms(terms, B):
    # (d_z - B zbar): o frame e^{-B|z|^2} fixa d_z log h = -B zbar
    return _dz_terms(terms) + [t.with_coeff(-B * t.coeff, dr=1) for t in terms]


def apply_operator(kind: OperatorKind, s: ExpPolySection) -> ExpPolySection:
    """
    Aplica termo a termo um dos operadores do toro (n = 1):

    dz, dzbar, cov_dz = d_z - B zbar, delta0 = -cov_dz dzbar,
    delta_up0 = -dzbar cov_dz. A saída é canônica.
    """
    kind = OperatorKind(kind)
    if kind is OperatorKind.DZ:
        terms = _dz_terms(s.terms)
    elif kind is OperatorKind.DZBAR:
        terms = _dzbar_terms(s.terms)
    elif kind is OperatorKind.COV_DZ:
        terms = _cov_dz_terms(s.terms, s.B)
    elif kind is OperatorKind.DELTA0:
        inner = _canonical_terms(_dzbar_terms(s.terms))
        terms = [t.with_coeff(-t.coeff) for t in _cov_dz_terms(inner, s.B)]
    else:
        inner = _canonical_terms(_cov_dz_terms(s.terms, s.B))
        terms = [t.with_coeff(-t.coeff) for t in _dzbar_terms(inner)]
    return s.with_terms(terms)


def ladder_up(t: ExpPolySection, steps: int) -> ExpPolySection:
    """Operador de criação em n = 1: cov_dz aplicado `steps` vezes."""
    if steps < 0:
        raise ValueError(f"steps deve ser >= 0, recebido {steps}.")
    result = t
    for _ in range(steps):
        result = apply_operator(OperatorKind.COV_DZ, result)
    return result.with_terms(result.terms, t.tensor_level - steps)


def ladder_down(s: ExpPolySection, steps: int) -> ExpPolySection:
    """Operador de aniquilação em n = 1: (-dzbar) aplicado `steps` vezes."""
    if steps < 0:
        raise ValueError(f"steps deve ser >= 0, recebido {steps}.")
    result = s
    for _ in range(steps):
        result = apply_operator(OperatorKind.DZBAR, result).scale(-1)
    return result.with_terms(result.terms, s.tensor_level + steps)


def eigen_residual(s: ExpPolySection, eigenvalue, kind: OperatorKind = OperatorKind.DELTA0) -> ExpPolySection:
    """delta0(s) - eigenvalue * s (ou delta_up0); vazio se s é autosseção exata."""
    kind = OperatorKind(kind)
    if kind not in (OperatorKind.DELTA0, OperatorKind.DELTA_UP0):
        raise ValueError(f"eigen_residual aceita apenas Laplacianos, recebido {kind.value}.")
    return apply_operator(kind, s) - s.scale(sympy.sympify(eigenvalue))


def bk_residual(s: ExpPolySection) -> ExpPolySection:
    """
    Resíduo da identidade de Bochner-Kodaira em n = 1:
    delta0(cov_dz s) - cov_dz(delta0 s) - B cov_dz s.
    """
    cov = apply_operator(OperatorKind.COV_DZ, s)
    left = apply_operator(OperatorKind.DELTA0, cov)
    right = apply_operator(OperatorKind.COV_DZ, apply_operator(OperatorKind.DELTA0, s))
    return left - right - cov.scale(s.B)


def random_section(seed: int, B=1, n_terms: int = 10, max_degree: int = 3) -> ExpPolySection:
    """
    Seção aleatória com dados racionais (coeficientes e taxas complexas com
    partes real e imaginária racionais), reprodutível pela semente.
    """
    rng = np.random.default_rng(seed)

    def rational():
        return sympy.Rational(int(rng.integers(-9, 10)), int(rng.integers(1, 6)))

    terms = []
    for _ in range(n_terms):
        terms.append(
            ExpPolyTerm(
                rational() + sympy.I * rational(),
                int(rng.integers(0, max_degree + 1)),
                int(rng.integers(0, max_degree + 1)),
                rational() + sympy.I * rational(),
                rational() + sympy.I * rational(),
                rational() if rng.random() < 0.3 else 0,
            )
        )
    return section(B, terms)


# --------------------------------------------------------------------------------------------------
# Funções theta e avaliação numérica
# --------------------------------------------------------------------------------------------------


def required_half_width(delta: int, tail: float = THETA_TAIL) -> int:
    """
    Meia-largura M da soma theta: a cauda gaussiana exp(-pi delta x^2)
    descartada fica abaixo de `tail` vezes o termo dominante no domínio
    fundamental (e na sua translação por i*ell usada na checagem).
    """
    return int(math.ceil(math.sqrt(-math.log(tail) / (math.pi * delta)) + 2))


@dataclass(frozen=True)
class ThetaSpec:
    """
    Dados de uma função theta do toro C / ell(Z + iZ): B*ell^2 = pi*delta,
    índice j em 0..delta-1 e meia-largura M (None = automática).
    """

    B: sympy.Rational
    delta: int
    j: int = 0
    M: int | None = None

    def __post_init__(self):
        B = sympy.Rational(self.B)
        if B <= 0:
            raise ValueError(f"B deve ser positivo, recebido {B}.")
        if not isinstance(self.delta, int) or self.delta < 1:
            raise ValueError(f"delta deve ser um inteiro >= 1, recebido {self.delta!r}.")
        if not 0 <= self.j < self.delta:
            raise ValueError(f"j deve estar em 0..{self.delta - 1}, recebido {self.j}.")
        object.__setattr__(self, "B", B)
        if self.M is None:
            object.__setattr__(self, "M", required_half_width(self.delta))

    @property
    def ell(self) -> sympy.Expr:
        return sympy.sqrt(sympy.pi * self.delta / self.B)

    @property
    def ell_value(self) -> float:
        return float(sympy.N(self.ell, NUMERIC_DIGITS))

    def relation_residual(self) -> float:
        return abs(float(sympy.N(self.B * self.ell**2 - sympy.pi * self.delta, NUMERIC_DIGITS)))


def _theta_terms(spec: ThetaSpec) -> list:
    delta, j, M = spec.delta, spec.j, spec.M
    rate = 2 * sympy.I * sympy.sqrt(sympy.pi * delta * spec.B)
    terms = []
    for m in range(-M - 1, M + 2):
        x = sympy.Rational(m) + sympy.Rational(j, delta)
        if abs(x) > M:
            continue
        terms.append(ExpPolyTerm(sympy.exp(-sympy.pi * delta * x**2), 0, 0, rate * x, 0, spec.B / 2))
    return terms


@lru_cache(maxsize=512)
def _numeric_terms(s: ExpPolySection):
    def to_complex(expr):
        return complex(sympy.N(expr, NUMERIC_DIGITS))

    coeff = np.array([to_complex(t.coeff) for t in s.terms], dtype=complex)
    g = np.array([to_complex(t.g) for t in s.terms], dtype=complex)
    a = np.array([to_complex(t.a) for t in s.terms], dtype=complex)
    b = np.array([to_complex(t.b) for t in s.terms], dtype=complex)
    p = np.array([t.p for t in s.terms], dtype=int)
    r = np.array([t.r for t in s.terms], dtype=int)
    return coeff, p, r, g, a, b


def _term_values(s: ExpPolySection, z):
    z = np.asarray(z, dtype=complex)
    zc = np.conj(z)
    coeff, p, r, g, a, b = _numeric_terms(s)
    for k in range(len(coeff)):
        yield coeff[k] * z ** p[k] * zc ** r[k] * np.exp(g[k] * z * z + a[k] * z + b[k] * zc)


def evaluate(s: ExpPolySection, z) -> np.ndarray:
    """Valor numérico da seção nos pontos z (array complexo)."""
    z = np.asarray(z, dtype=complex)
    total = np.zeros(z.shape, dtype=complex)
    for values in _term_values(s, z):
        total += values
    return total


def evaluate_magnitude(s: ExpPolySection, z) -> np.ndarray:
    """Soma dos módulos dos termos: escala natural para resíduos relativos."""
    z = np.asarray(z, dtype=complex)
    total = np.zeros(z.shape, dtype=float)
    for values in _term_values(s, z):
        total += np.abs(values)
    return total


@dataclass(frozen=True)
class AutomorphyReport:
    chi: complex
    real_residual: float
    imag_residual: float
    points: int


def check_automorphy(s: ExpPolySection, spec: ThetaSpec, tolerance: float, seed: int = 0) -> AutomorphyReport:
    """
    Confere numericamente f(z+ell) = e^{B(ell z + ell^2/2)} f(z) e
    f(z+i ell) = e^{B(-i ell z + ell^2/2)} chi f(z) em pontos aleatórios do
    domínio fundamental, medindo a constante chi.
    """
    rng = np.random.default_rng(seed)
    ell = spec.ell_value
    B = float(spec.B)
    z = ell * (rng.random(AUTOMORPHY_POINTS) + 1j * rng.random(AUTOMORPHY_POINTS))
    base = evaluate(s, z)

    shifted = evaluate(s, z + ell)
    expected = np.exp(B * (ell * z + ell**2 / 2)) * base
    real_residual = float(np.max(np.abs(shifted - expected) / evaluate_magnitude(s, z + ell)))

    shifted = evaluate(s, z + 1j * ell)
    factor = np.exp(B * (-1j * ell * z + ell**2 / 2)) * base
    chi = complex(np.vdot(factor, shifted) / np.vdot(factor, factor))
    imag_residual = float(np.max(np.abs(shifted - chi * factor) / evaluate_magnitude(s, z + 1j * ell)))

    report = AutomorphyReport(chi, real_residual, imag_residual, AUTOMORPHY_POINTS)
    if max(real_residual, imag_residual) > tolerance or abs(abs(chi) - 1) > math.sqrt(tolerance):
        raise VerificationError(
            "Relações de automorfia falharam.",
            {"chi": [chi.real, chi.imag], "real_residual": real_residual, "imag_residual": imag_residual},
        )
    return report


def theta_basis(spec: ThetaSpec, tensor_level: int = 0, tolerances: Tolerances | None = None,
                seed: int = 0, max_attempts: int = 3) -> ExpPolySection:
    """
    Função theta f_j(z) = e^{Bz^2/2} sum_m exp(-pi delta x_m^2 + 2 pi i delta x_m z / ell),
    x_m = m + j/delta, truncada em |x_m| <= M.

    Antes de devolver, verifica a automorfia em 32 pontos; se falhar, aumenta
    M e tenta de novo. chi_j e M ficam registrados em `meta`.

    Raises:
        VerificationError: Se nenhuma tentativa atingir a tolerância.
    """
    tol = (tolerances or Tolerances()).automorphy
    current = spec
    last_error = None
    for attempt in range(max_attempts):
        result = section(current.B, _theta_terms(current), tensor_level)
        try:
            report = check_automorphy(result, current, tol, seed)
        except VerificationError as e:
            last_error = e
            logger.warning(f"Automorfia falhou com M={current.M} (tentativa {attempt + 1}); aumentando M.")
            current = ThetaSpec(current.B, current.delta, current.j, current.M + 2)
            continue
        result.meta.update(
            {
                "M": current.M,
                "chi": [report.chi.real, report.chi.imag],
                "automorphy_residual": max(report.real_residual, report.imag_residual),
            }
        )
        logger.info(
            f"Base theta j={current.j}, delta={current.delta}: {len(result.terms)} termos, M={current.M}."
        )
        return result
    logger.error(f"Base theta falhou após {max_attempts} tentativas: {last_error.details}")
    raise last_error


def _check_periodicity(s, t, spec, tolerance, seed):
    rng = np.random.default_rng(seed)
    ell = spec.ell_value
    B = float(spec.B)
    z = ell * (rng.random(PERIODICITY_POINTS) + 1j * rng.random(PERIODICITY_POINTS))

    def integrand(w):
        return evaluate(s, w) * np.conj(evaluate(t, w)) * np.exp(-B * np.abs(w) ** 2)

    def scale(w):
        return evaluate_magnitude(s, w) * evaluate_magnitude(t, w) * np.exp(-B * np.abs(w) ** 2)

    base = integrand(z)
    worst = 0.0
    for shift in (ell, 1j * ell):
        worst = max(worst, float(np.max(np.abs(integrand(z + shift) - base) / scale(z + shift))))
    if worst > tolerance:
        raise VerificationError(
            "Integrando não é periódico: as seções não pertencem à mesma classe de automorfia.",
            {"residual": worst},
        )
    return worst


def l2_inner(s: ExpPolySection, t: ExpPolySection, spec: ThetaSpec, N: int = 256,
             tolerances: Tolerances | None = None, seed: int = 0) -> complex:
    """
    Produto interno L^2 com peso e^{-B|z|^2} no domínio fundamental
    [0, ell)^2, pela regra do trapézio na malha periódica N x N.

    Raises:
        ValueError: Se as seções tiverem B diferentes.
        VerificationError: Se o integrando não for periódico.
    """
    s._compatible(t)
    tol = (tolerances or Tolerances()).periodicity
    _check_periodicity(s, t, spec, tol, seed)

    ell = spec.ell_value
    B = float(spec.B)
    h = ell / N
    grid = np.arange(N) * h
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    Z = X + 1j * Y
    weight = np.exp(-B * np.abs(Z) ** 2)
    values = evaluate(s, Z) * np.conj(evaluate(t, Z)) * weight
    return complex(values.sum() * h * h)


def normalized_overlap(s: ExpPolySection, t: ExpPolySection, spec: ThetaSpec, N: int = 256,
                       tolerances: Tolerances | None = None, seed: int = 0) -> float:
    """|<s,t>| / (||s|| ||t||)."""
    st = l2_inner(s, t, spec, N, tolerances, seed)
    ss = l2_inner(s, s, spec, N, tolerances, seed).real
    tt = l2_inner(t, t, spec, N, tolerances, seed).real
    return abs(st) / math.sqrt(ss * tt)


def sample_grid(s: ExpPolySection, spec: ThetaSpec, points: int = 64) -> list:
    """Amostra Re/Im da seção na malha points x points do domínio fundamental."""
    ell = spec.ell_value
    grid = np.arange(points) * ell / points
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    values = evaluate(s, X + 1j * Y)
    return [
        (float(X[a, b]), float(Y[a, b]), float(values[a, b].real), float(values[a, b].imag))
        for a in range(points)
        for b in range(points)
    ]
