# src/charclass.py

import cmath
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import sympy

from src.utils import Tolerances, VerificationError, get_logger

logger = get_logger(__name__)

MAX_IDENTITY_DIMENSION = 8


def _check_dimension(n: int):
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"A dimensão n deve ser um inteiro >= 1, recebido {n!r}.")


@dataclass(frozen=True)
class CohomologyClass:
    """
    Elemento do anel H*(P^n, Q) = Q[w]/(w^{n+1}), guardado como os
    coeficientes racionais (a_0, ..., a_n) de sum a_i w^i.

    Produtos truncam todos os termos de grau > n.
    """

    n: int
    coeffs: tuple

    def __post_init__(self):
        _check_dimension(self.n)
        values = [Fraction(c) for c in self.coeffs][: self.n + 1]
        values += [Fraction(0)] * (self.n + 1 - len(values))
        object.__setattr__(self, "coeffs", tuple(values))

    @classmethod
    def one(cls, n: int) -> "CohomologyClass":
        return cls(n, (1,))

    @classmethod
    def exponential(cls, n: int, x) -> "CohomologyClass":
        """e^{x w} truncado em grau n."""
        x = Fraction(x)
        return cls(n, tuple(x**k / math.factorial(k) for k in range(n + 1)))

    def coefficient(self, i: int) -> Fraction:
        return self.coeffs[i] if 0 <= i <= self.n else Fraction(0)

    @property
    def rank(self) -> Fraction:
        return self.coeffs[0]

    @property
    def top(self) -> Fraction:
        """Coeficiente de w^n, isto é, a integral sobre P^n."""
        return self.coeffs[self.n]

    def _same_ring(self, other: "CohomologyClass"):
        if self.n != other.n:
            raise ValueError(f"Classes de anéis diferentes: n={self.n} e n={other.n}.")

    def __add__(self, other: "CohomologyClass") -> "CohomologyClass":
        self._same_ring(other)
        return CohomologyClass(self.n, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __mul__(self, other) -> "CohomologyClass":
        if not isinstance(other, CohomologyClass):
            return self.scale(other)
        self._same_ring(other)
        out = [Fraction(0)] * (self.n + 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j in range(self.n + 1 - i):
                out[i + j] += a * other.coeffs[j]
        return CohomologyClass(self.n, tuple(out))

    __rmul__ = __mul__

    def scale(self, factor) -> "CohomologyClass":
        factor = Fraction(factor)
        return CohomologyClass(self.n, tuple(factor * a for a in self.coeffs))

    def exp(self) -> "CohomologyClass":
        """
        Exponencial de uma classe sem termo constante (nilpotente), truncada.

        Raises:
            ValueError: Se o coeficiente de grau 0 não for nulo.
        """
        if self.coeffs[0] != 0:
            raise ValueError("exp() exige uma classe sem termo de grau 0.")
        result = CohomologyClass.one(self.n)
        power = CohomologyClass.one(self.n)
        for k in range(1, self.n + 1):
            power = power * self
            result = result + power.scale(Fraction(1, math.factorial(k)))
        return result

    def __str__(self) -> str:
        parts = []
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            parts.append(str(a) if i == 0 else f"{a}w" if i == 1 else f"{a}w^{i}")
        return " + ".join(parts) if parts else "0"


@dataclass(frozen=True)
class ChernRootData:
    """Somas de potências p_m = sum_j lambda_j^m das raízes de Chern de T(P^n)."""

    n: int
    power_sums: tuple

    def elementary(self) -> tuple:
        """
        Reconstrói e_1, ..., e_k (k = len(power_sums)) pelas identidades de
        Newton: i e_i = sum_{k=1}^{i} (-1)^{k-1} e_{i-k} p_k.
        """
        e = [Fraction(1)]
        for i in range(1, len(self.power_sums) + 1):
            total = sum(
                (-1) ** (k - 1) * e[i - k] * self.power_sums[k - 1] for k in range(1, i + 1)
            )
            e.append(Fraction(total) / i)
        return tuple(e[1:])


def _elementary_value(n: int, i: int) -> int:
    # c(T) = (1 + w)^{n+1} truncado: e_i = C(n+1, i) para i <= n.
    return math.comb(n + 1, i) if 1 <= i <= n else 0


def chern_power_sums(n: int, m_max: int) -> ChernRootData:
    """
    Calcula as somas de potências exatas das raízes de Chern
    lambda_j = 1 - e^{2 pi i j/(n+1)}, j = 1..n, a partir dos valores
    elementares e_i = C(n+1, i), sem aritmética de ponto flutuante.

    Args:
        n (int): Dimensão de P^n (>= 1).
        m_max (int): Quantidade de somas p_1..p_{m_max}.

    Returns:
        ChernRootData: As somas de potências.

    Raises:
        ValueError: Se n < 1 ou m_max < 1.
    """
    _check_dimension(n)
    if m_max < 1:
        raise ValueError(f"m_max deve ser >= 1, recebido {m_max}.")

    p = []
    for m in range(1, m_max + 1):
        value = (-1) ** (m - 1) * m * _elementary_value(n, m)
        for i in range(1, m):
            value += (-1) ** (i - 1) * _elementary_value(n, i) * p[m - i - 1]
        p.append(value)
    return ChernRootData(n=n, power_sums=tuple(p))


@lru_cache(maxsize=None)
def bernoulli_number(k: int) -> Fraction:
    """
    Número de Bernoulli B_k pela recorrência sum_{j=0}^{k} C(k+1, j) B_j = 0,
    com a convenção B_1 = -1/2.
    """
    if k < 0:
        raise ValueError(f"Índice de Bernoulli negativo: {k}.")
    if k == 0:
        return Fraction(1)
    total = sum(math.comb(k + 1, j) * bernoulli_number(j) for j in range(k))
    return -total / (k + 1)


@lru_cache(maxsize=None)
def todd_class(n: int) -> CohomologyClass:
    """
    Classe de Todd td(T_{P^n}) = prod_j (lambda_j w)/(1 - e^{-lambda_j w}).

    Usa log(x/(1-e^{-x})) = sum_{k>=1} -B_k x^k/(k k!) somado sobre as
    raízes via somas de potências, e exponencia no anel truncado.
    """
    _check_dimension(n)
    roots = chern_power_sums(n, n)
    log_coeffs = [Fraction(0)]
    for k in range(1, n + 1):
        log_coeffs.append(
            -bernoulli_number(k) * roots.power_sums[k - 1] / (k * math.factorial(k))
        )
    td = CohomologyClass(n, tuple(log_coeffs)).exp()
    logger.debug(f"td(T_P^{n}) = {td}")
    return td


def _root_exponential_power_sum(n: int, m: int, power_sums: tuple) -> CohomologyClass:
    # P_m = sum_j e^{m lambda_j w} = sum_k m^k p_k w^k / k!, com p_0 = n.
    coeffs = [Fraction(n)]
    for k in range(1, n + 1):
        coeffs.append(Fraction(m**k * power_sums[k - 1], math.factorial(k)))
    return CohomologyClass(n, tuple(coeffs))


@lru_cache(maxsize=None)
def ch_sym_power(n: int, q: int) -> CohomologyClass:
    """
    Caráter de Chern de Sym^q T(P^n) pela recorrência das funções simétricas
    completas: q h_q = sum_{m=1}^{q} P_m h_{q-m}.

    Raises:
        ValueError: Se q < 0 ou n < 1.
    """
    _check_dimension(n)
    if q < 0:
        raise ValueError(f"A potência simétrica q deve ser >= 0, recebido {q}.")
    roots = chern_power_sums(n, n)
    h = [CohomologyClass.one(n)]
    for level in range(1, q + 1):
        acc = CohomologyClass(n, ())
        for m in range(1, level + 1):
            acc = acc + _root_exponential_power_sum(n, m, roots.power_sums) * h[level - m]
        h.append(acc.scale(Fraction(1, level)))
    return h[q]


def _check_degree(B: int, q: int):
    if not isinstance(B, int) or B < 1:
        raise ValueError(f"O grau B deve ser um inteiro >= 1, recebido {B!r}.")
    if not isinstance(q, int) or q < 0:
        raise ValueError(f"O nível q deve ser um inteiro >= 0, recebido {q!r}.")


def hrr_dimension(n: int, B: int, q: int) -> int:
    """
    h^0(P^n, O(B) (x) Sym^q T) pelo teorema de Hirzebruch-Riemann-Roch:
    coeficiente de w^n em td(T) e^{Bw} ch(Sym^q T).

    Raises:
        ValueError: Se n < 1, B < 1 ou q < 0.
        VerificationError: Se o coeficiente final não for inteiro.
    """
    _check_dimension(n)
    _check_degree(B, q)
    product = todd_class(n) * CohomologyClass.exponential(n, B) * ch_sym_power(n, q)
    value = product.top
    if value.denominator != 1:
        logger.error(f"HRR não inteiro para n={n}, B={B}, q={q}: {value}")
        raise VerificationError(
            "Coeficiente HRR não inteiro.", {"n": n, "B": B, "q": q, "value": str(value)}
        )
    return int(value)


def _generalized_binomial(x: complex, n: int) -> complex:
    # C(x, n) = x (x-1) ... (x-n+1) / n!
    acc = complex(1.0)
    for i in range(n):
        acc *= x - i
    return acc / math.factorial(n)


def closed_form_dimension(n: int, B: int, q: int, tolerances: Tolerances | None = None):
    """
    Soma sum_{k_1+...+k_n=q} C(y+n+B, n), y = sum_j k_j lambda_j, sobre todas
    as composições, em aritmética complexa de ponto flutuante.

    As composições são percorridas em ordem lexicográfica sem materializar a
    lista (multiconjuntos de raízes de tamanho q).

    Returns:
        tuple[int, float]: (inteiro mais próximo, resíduo imaginário absoluto).

    Raises:
        VerificationError: Se o resíduo imaginário ou a distância ao inteiro
            mais próximo excederem a tolerância.
    """
    _check_dimension(n)
    _check_degree(B, q)
    tol = (tolerances or Tolerances()).closed_form
    roots = [1 - cmath.exp(2j * math.pi * j / (n + 1)) for j in range(1, n + 1)]

    total = complex(0.0)
    for combo in itertools.combinations_with_replacement(range(n), q):
        y = sum((roots[j] for j in combo), complex(0.0))
        total += _generalized_binomial(y + n + B, n)

    imag_residual = abs(total.imag)
    nearest = round(total.real)
    distance = abs(total.real - nearest)
    if imag_residual >= tol or distance >= tol:
        logger.error(
            f"Perda de precisão na forma fechada (n={n}, B={B}, q={q}): "
            f"imag={imag_residual:.3e}, distância={distance:.3e}"
        )
        raise VerificationError(
            "Forma fechada fora da tolerância.",
            {
                "n": n,
                "B": B,
                "q": q,
                "real": total.real,
                "imag_residual": imag_residual,
                "integrality_residual": distance,
            },
        )
    return int(nearest), imag_residual


def p2_closed_form(B: int, q: int) -> int:
    """Dimensão em P^2: (q+1)/2 (B^2 + 3(q+1)B + 2(q+1)^2)."""
    _check_degree(B, q)
    product = (q + 1) * (B * B + 3 * (q + 1) * B + 2 * (q + 1) ** 2)
    assert product % 2 == 0, "produto ímpar na fórmula de P^2"
    return product // 2


def binom_poly_identity_check(n: int) -> bool:
    """
    Verifica, como polinômios racionais em z, que o coeficiente de w^n em
    td(T) e^{zw} é igual a C(z+n, n).

    Raises:
        ValueError: Se n estiver fora de 1..8.
        VerificationError: Se algum coeficiente diferir.
    """
    if not isinstance(n, int) or not 1 <= n <= MAX_IDENTITY_DIMENSION:
        raise ValueError(f"n deve estar em 1..{MAX_IDENTITY_DIMENSION}, recebido {n!r}.")
    z = sympy.Symbol("z")
    td = todd_class(n)
    lhs = sum(
        sympy.Rational(c.numerator, c.denominator) * z ** (n - k) / sympy.factorial(n - k)
        for k, c in enumerate(td.coeffs)
    )
    rhs = sympy.Mul(*[z + i for i in range(1, n + 1)]) / sympy.factorial(n)
    difference = sympy.Poly(sympy.expand(lhs - rhs), z, domain=sympy.QQ)
    if not difference.is_zero:
        logger.error(f"Identidade polinomial falhou para n={n}: {difference}")
        raise VerificationError(
            "Identidade td(T) e^{zw} = C(z+n, n) falhou.",
            {"n": n, "difference": str(difference.as_expr())},
        )
    return True


@dataclass(frozen=True)
class DimensionReport:
    """Resultado das três contagens independentes de h^0(P^n, O(B) (x) Sym^q T)."""

    n: int
    B: int
    q: int
    exact_hrr: int
    closed_form: int | None = None
    closed_form_imag_residual: float | None = None
    n2_formula: int | None = None

    @property
    def consistent(self) -> bool:
        values = [v for v in (self.exact_hrr, self.closed_form, self.n2_formula) if v is not None]
        return len(set(values)) == 1

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "B": self.B,
            "q": self.q,
            "exact_hrr": self.exact_hrr,
            "closed_form": self.closed_form,
            "closed_form_imag_residual": self.closed_form_imag_residual,
            "n2_formula": self.n2_formula,
            "consistent": self.consistent,
        }


def dimension_report(
    n: int, B: int, q: int, all_methods: bool = True, tolerances: Tolerances | None = None
) -> DimensionReport:
    """
    Monta o DimensionReport; com all_methods=True roda também a forma fechada
    e, para n=2, a fórmula explícita.
    """
    exact = hrr_dimension(n, B, q)
    if not all_methods:
        return DimensionReport(n=n, B=B, q=q, exact_hrr=exact)
    closed, residual = closed_form_dimension(n, B, q, tolerances)
    n2 = p2_closed_form(B, q) if n == 2 else None
    report = DimensionReport(n, B, q, exact, closed, residual, n2)
    if not report.consistent:
        logger.warning(f"Métodos de dimensão discordam: {report.as_dict()}")
    return report
