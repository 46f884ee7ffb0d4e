# src/spectra.py

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
import sympy
from scipy.linalg import null_space

from src.charclass import hrr_dimension
from src.utils import VerificationError, as_fraction, get_logger

logger = get_logger(__name__)

DEFAULT_C = Fraction(2)
GRASSMANN_MAX_SIDE = 5


class Space(str, Enum):
    ABELIAN = "abelian"
    PROJECTIVE = "pn"
    GRASSMANNIAN = "grassmann"


@dataclass(frozen=True)
class SpectrumRow:
    """Linha da tabela: nível, autovalor exato, multiplicidade (None = desconhecida)."""

    q: int
    eigenvalue: Fraction
    multiplicity: int | None
    flags: tuple = ()


@dataclass(frozen=True)
class SpectrumTable:
    space: Space
    params: dict
    rows: tuple = field(default_factory=tuple)

    def eigenvalues(self) -> list:
        return [row.eigenvalue for row in self.rows]

    def row(self, q: int) -> SpectrumRow:
        for row in self.rows:
            if row.q == q:
                return row
        raise KeyError(q)


@dataclass(frozen=True)
class PolarizationData:
    """Divisores elementares delta_1 | delta_2 | ... | delta_n da polarização."""

    delta: tuple

    def __post_init__(self):
        values = tuple(int(d) for d in self.delta)
        if not values:
            raise ValueError("A polarização precisa de pelo menos um divisor elementar.")
        if any(d < 1 for d in values):
            raise ValueError(f"Divisores elementares devem ser >= 1: {values}.")
        for a, b in zip(values, values[1:]):
            if b % a != 0:
                raise ValueError(f"Cadeia de divisibilidade quebrada: {a} não divide {b}.")
        object.__setattr__(self, "delta", values)

    @property
    def n(self) -> int:
        return len(self.delta)

    @property
    def product(self) -> int:
        return math.prod(self.delta)


@dataclass(frozen=True)
class GrassmannIndex:
    """Índice de coordenada I = (i, i') de G(mu, nu), 1-based."""

    i: int
    ip: int

    def validate(self, mu: int, nu: int):
        if not (1 <= self.i <= mu and 1 <= self.ip <= nu):
            raise ValueError(f"Índice ({self.i},{self.ip}) fora de 1..{mu} x 1..{nu}.")


def _half_c(c) -> Fraction:
    c = as_fraction(c)
    if c <= 0:
        raise ValueError(f"A constante de curvatura c deve ser positiva, recebido {c}.")
    return c / 2


def _positive_rational(B, name: str = "B") -> Fraction:
    B = as_fraction(B)
    if B <= 0:
        raise ValueError(f"{name} deve ser positivo, recebido {B}.")
    return B


def _check_level(q: int, name: str = "q"):
    if not isinstance(q, int) or q < 0:
        raise ValueError(f"{name} deve ser um inteiro >= 0, recebido {q!r}.")


def abelian_spectrum(n: int, B, delta: PolarizationData, q_max: int, dual_k: int = 0) -> SpectrumTable:
    """
    Espectro de Delta_0 (dual_k = 0) ou de Delta^k (dual_k = k > 0) em uma
    variedade abeliana com polarização de divisores elementares delta.

    Para dual_k = 0: linhas (q, qB, C(n+q-1, q) prod delta).
    Para dual_k > 0: linhas (q, (q+n+k)B, desconhecida).
    """
    if not isinstance(delta, PolarizationData):
        delta = PolarizationData(tuple(delta))
    if n != delta.n:
        raise ValueError(f"n={n} difere do número de divisores elementares ({delta.n}).")
    B = _positive_rational(B)
    _check_level(q_max, "q_max")
    _check_level(dual_k, "dual_k")

    rows = []
    for q in range(q_max + 1):
        if dual_k == 0:
            multiplicity = math.comb(n + q - 1, q) * delta.product
            flags = ("holomorphic",) if q == 0 else ()
            rows.append(SpectrumRow(q, q * B, multiplicity, flags))
        else:
            rows.append(SpectrumRow(q, (q + n + dual_k) * B, None))
    params = {"n": n, "B": B, "delta": list(delta.delta), "q_max": q_max, "dual_k": dual_k}
    logger.info(f"Espectro abeliano calculado: n={n}, B={B}, delta={delta.delta}, {len(rows)} linhas.")
    return SpectrumTable(Space.ABELIAN, params, tuple(rows))


def intermediate_eigenvalue(n: int, B, q: int, k: int, c=DEFAULT_C) -> Fraction:
    """Autovalor intermediário (q-k)B + (c/2)(q^2 - k^2 + n(q-k)); telescópico em k."""
    _check_level(q)
    _check_level(k, "k")
    if k > q:
        raise ValueError(f"k={k} maior que q={q}.")
    B = as_fraction(B)
    return (q - k) * B + _half_c(c) * (q * q - k * k + n * (q - k))


def pn_eigenvalue(n: int, B, q: int, c=DEFAULT_C) -> Fraction:
    return intermediate_eigenvalue(n, B, q, 0, c)


def pn_spectrum(n: int, B: int, q_max: int, c=DEFAULT_C) -> SpectrumTable:
    """
    Espectro de Delta_0 em sections de O(B) sobre P^n: autovalores
    qB + (c/2)q(n+q) e multiplicidades h^0(P^n, O(B) (x) Sym^q T) via HRR.
    """
    if not isinstance(B, int) or B < 1:
        raise ValueError(f"B deve ser um inteiro >= 1 em P^n, recebido {B!r}.")
    _check_level(q_max, "q_max")
    rows = []
    for q in range(q_max + 1):
        flags = ("holomorphic",) if q == 0 else ()
        rows.append(SpectrumRow(q, pn_eigenvalue(n, B, q, c), hrr_dimension(n, B, q), flags))
    params = {"n": n, "B": B, "c": as_fraction(c), "q_max": q_max}
    logger.info(f"Espectro de P^{n} calculado: B={B}, {len(rows)} linhas.")
    return SpectrumTable(Space.PROJECTIVE, params, tuple(rows))


def pn_dual_ladder(n: int, B: int, q: int, k_max: int, c=DEFAULT_C) -> SpectrumTable:
    """
    Autovalores (q+n+k)(B + (c/2)(q-k)) de Delta^k ao longo da escada dual
    partindo de uma autosseção de nível q.

    Com c = 2 a escada para em k = B+q (seção anti-holomorfa, autovalor 0);
    linhas além disso não existem porque a seção se anula. Para outros c as
    linhas seguem até k_max enquanto o autovalor for >= 0.
    """
    _check_level(q)
    _check_level(k_max, "k_max")
    if not isinstance(B, int) or B < 1:
        raise ValueError(f"B deve ser um inteiro >= 1, recebido {B!r}.")
    half_c = _half_c(c)
    threshold = B + q if half_c == 1 else None

    rows = []
    for k in range(k_max + 1):
        if threshold is not None and k > threshold:
            break
        eigenvalue = (q + n + k) * (B + half_c * (q - k))
        if eigenvalue < 0:
            break
        flags = ("anti_holomorphic",) if k == threshold else ()
        rows.append(SpectrumRow(k, eigenvalue, None, flags))
    params = {"n": n, "B": B, "q": q, "k_max": k_max, "c": 2 * half_c}
    return SpectrumTable(Space.PROJECTIVE, params, tuple(rows))


def dual_ladder_factor(n: int, B: int, q: int, k: int, c=DEFAULT_C) -> Fraction:
    """
    Fator f(k) = (q+n+k-1)B + (c/2)[q(n+q) - (k-1)(n+k-1)] que relaciona
    imagens consecutivas da escada dual. Com c = 2 é positivo para
    1 <= k <= B+q e nulo em k = B+q+1.
    """
    _check_level(q)
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"k deve ser um inteiro >= 1, recebido {k!r}.")
    B = as_fraction(B)
    return (q + n + k - 1) * B + _half_c(c) * (q * (n + q) - (k - 1) * (n + k - 1))


def zero_mode_levels(space: Space, n: int, B: int, k_max: int, c=DEFAULT_C) -> list:
    """
    Níveis k <= k_max em que Delta^k tem autovalor zero. Em P^n (c = 2) isso
    acontece para todo k >= B; em variedades abelianas nunca acontece.
    """
    space = Space(space)
    _check_level(k_max, "k_max")
    if space is Space.ABELIAN:
        return []
    if space is Space.PROJECTIVE:
        if _half_c(c) != 1:
            raise ValueError("O limiar anti-holomorfo só está estabelecido para c = 2.")
        return [k for k in range(B, k_max + 1)]
    raise ValueError("Níveis de modo zero não estão disponíveis para a Grassmanniana.")


def ladder_constant(space: Space, n: int, B, q: int, c=DEFAULT_C) -> Fraction:
    """
    Constante do isomorfismo de escada: q! B^q (abeliana) ou
    prod_{k<q} N_{q,k} (P^n). Produto vazio = 1.
    """
    space = Space(space)
    _check_level(q)
    B = _positive_rational(B)
    if space is Space.ABELIAN:
        return math.factorial(q) * B**q
    if space is Space.PROJECTIVE:
        result = Fraction(1)
        for k in range(q):
            result *= intermediate_eigenvalue(n, B, q, k, c)
        return result
    raise ValueError("Constante de escada não estabelecida para a Grassmanniana além do nível 1.")


def grassmann_eigenvalues(mu: int, nu: int, B: int, c=DEFAULT_C) -> tuple:
    """
    Primeiro e segundo autovalores de Delta^0 em G(mu, nu) com B <= -1:
    (0, -B + (c/2)(mu+nu)).

    Raises:
        ValueError: Se B >= 0 (nesse caso -B + (c/2)(mu+nu) pode ser o menor
            autovalor, o que não é afirmado aqui).
    """
    if mu < 1 or nu < 1:
        raise ValueError(f"mu e nu devem ser >= 1, recebido ({mu}, {nu}).")
    if B >= 0:
        raise ValueError(
            f"B={B} >= 0 não suportado: a ordenação (0, -B+(c/2)(mu+nu)) só vale para B <= -1."
        )
    return Fraction(0), -as_fraction(B) + _half_c(c) * (mu + nu)


def grassmann_spectrum(mu: int, nu: int, B: int, c=DEFAULT_C) -> SpectrumTable:
    first, second = grassmann_eigenvalues(mu, nu, B, c)
    rows = (SpectrumRow(0, first, None), SpectrumRow(1, second, None))
    params = {"mu": mu, "nu": nu, "B": B, "c": as_fraction(c)}
    return SpectrumTable(Space.GRASSMANNIAN, params, rows)


def grassmann_curvature(mu: int, nu: int, I: GrassmannIndex, J: GrassmannIndex,
                        K: GrassmannIndex, L: GrassmannIndex) -> int:
    """
    R_{I Jbar K Lbar} = d_ij d_kl d_i'l' d_j'k' + d_il d_kj d_i'j' d_k'l'.
    """
    for index in (I, J, K, L):
        index.validate(mu, nu)
    first = I.i == J.i and K.i == L.i and I.ip == L.ip and J.ip == K.ip
    second = I.i == L.i and K.i == J.i and I.ip == J.ip and K.ip == L.ip
    return int(first) + int(second)


def _grassmann_indices(mu: int, nu: int) -> list:
    return [GrassmannIndex(i, ip) for i in range(1, mu + 1) for ip in range(1, nu + 1)]


def is_rectangle_tuple(I, J, K, L) -> bool:
    """
    Tuplas "retângulo": os quatro índices são os vértices de um retângulo
    com I e K opostos, percorridos nos dois sentidos. Nelas R = 1 mesmo com
    I != J, I != L e K != J.
    """
    if I.i == K.i or I.ip == K.ip:
        return False
    row_first = J == GrassmannIndex(I.i, K.ip) and L == GrassmannIndex(K.i, I.ip)
    column_first = J == GrassmannIndex(K.i, I.ip) and L == GrassmannIndex(I.i, K.ip)
    return row_first or column_first


@dataclass
class GrassmannStructureReport:
    mu: int
    nu: int
    violations: dict
    rectangle_exceptions: int
    expected_rectangle_exceptions: int
    nullities: dict
    expected_nullity: int

    @property
    def passed(self) -> bool:
        return (
            all(v == 0 for v in self.violations.values())
            and self.rectangle_exceptions == self.expected_rectangle_exceptions
            and all(v == self.expected_nullity for v in self.nullities.values())
        )

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "nu": self.nu,
            "violations": dict(self.violations),
            "rectangle_exceptions": self.rectangle_exceptions,
            "expected_rectangle_exceptions": self.expected_rectangle_exceptions,
            "nullities": {f"{i},{ip}": v for (i, ip), v in sorted(self.nullities.items())},
            "expected_nullity": self.expected_nullity,
            "pass": self.passed,
        }


def _scan_patterns(mu, nu, indices, I):
    counts = {"same_ij": 0, "k_equals_j": 0, "i_equals_l": 0, "all_distinct": 0}
    rectangles = 0
    for J, K, L in itertools.product(indices, repeat=3):
        value = grassmann_curvature(mu, nu, I, J, K, L)
        if value == 0:
            continue
        if I == J and K != L:
            counts["same_ij"] += 1
        if I != J and I != L and K == J:
            counts["k_equals_j"] += 1
        if I != J and I == L and K != J:
            counts["i_equals_l"] += 1
        if I != J and I != L and K != J:
            if is_rectangle_tuple(I, J, K, L):
                rectangles += 1
            else:
                counts["all_distinct"] += 1
    return counts, rectangles


def _nullity(mu, nu, indices, X) -> tuple:
    size = len(indices)
    H = np.zeros((size, size))
    for a, V in enumerate(indices):
        for b, W in enumerate(indices):
            H[a, b] = grassmann_curvature(mu, nu, X, X, V, W)
    kernel = null_space(H)
    expected = {
        a for a, V in enumerate(indices) if V.i != X.i and V.ip != X.ip
    }
    spanned = all(
        np.allclose(kernel[a, :], 0.0) for a in range(size) if a not in expected
    )
    return kernel.shape[1], spanned


def grassmann_structure_check(mu: int, nu: int, threads: int = 1) -> GrassmannStructureReport:
    """
    Verificação por força bruta da estrutura de curvatura de G(mu, nu):
    padrões de anulamento sobre todas as tuplas (I, J, K, L) e a nulidade
    (mu-1)(nu-1) da forma hermitiana H_X(V, W) = R_{X Xbar V Wbar} em cada
    direção coordenada X = E_{ii'}.

    A varredura é particionada por I; a redução é feita na ordem dos índices.

    Raises:
        ValueError: Se mu ou nu estiverem fora de 1..5.
        VerificationError: Se algum padrão ou nulidade falhar.
    """
    if not (1 <= mu <= GRASSMANN_MAX_SIDE and 1 <= nu <= GRASSMANN_MAX_SIDE):
        raise ValueError(f"mu e nu devem estar em 1..{GRASSMANN_MAX_SIDE}, recebido ({mu}, {nu}).")
    logger.info(f"Verificando estrutura de curvatura de G({mu},{nu}).")
    indices = _grassmann_indices(mu, nu)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda I: _scan_patterns(mu, nu, indices, I), indices))
    else:
        partials = [_scan_patterns(mu, nu, indices, I) for I in indices]

    violations = {"same_ij": 0, "k_equals_j": 0, "i_equals_l": 0, "all_distinct": 0}
    rectangles = 0
    for counts, rect in partials:
        for key, value in counts.items():
            violations[key] += value
        rectangles += rect

    nullities = {}
    expected_nullity = (mu - 1) * (nu - 1)
    for X in indices:
        dimension, spanned = _nullity(mu, nu, indices, X)
        # um núcleo fora de span{E_jj': j != i, j' != i'} conta como falha
        nullities[(X.i, X.ip)] = dimension if spanned else -1

    report = GrassmannStructureReport(
        mu=mu,
        nu=nu,
        violations=violations,
        rectangle_exceptions=rectangles,
        expected_rectangle_exceptions=2 * mu * (mu - 1) * nu * (nu - 1),
        nullities=nullities,
        expected_nullity=expected_nullity,
    )
    if not report.passed:
        logger.error(f"Estrutura de G({mu},{nu}) falhou: {report.as_dict()}")
        raise VerificationError(f"Estrutura de curvatura de G({mu},{nu}) falhou.", report.as_dict())
    logger.info(f"G({mu},{nu}) ok: nulidade {expected_nullity}, {rectangles} exceções retangulares.")
    return report


@dataclass(frozen=True)
class BundleCurvatureReport:
    """
    Curvatura do fibrado espectral: C_{ab} = -pi W_{ab} d_a d_b / d_n^2 vezes
    a identidade de posto C(n+q-1, q) prod d.

    `coefficient_over_pi` guarda C/pi (exato quando W é racional); `coefficient`
    é a mesma matriz com pi simbólico.
    """

    W: sympy.ImmutableMatrix
    polarization: PolarizationData
    q: int
    coefficient_over_pi: sympy.ImmutableMatrix
    rank: int

    @property
    def coefficient(self) -> sympy.ImmutableMatrix:
        return self.coefficient_over_pi * sympy.pi

    def is_hermitian(self) -> bool:
        return self.coefficient_over_pi.is_hermitian

    def is_negative_semidefinite(self, floor: float = -1e-12) -> bool:
        values = np.linalg.eigvalsh(np.array(self.coefficient_over_pi.evalf().tolist(), dtype=complex))
        return bool(np.all(values <= -floor))

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "delta": list(self.polarization.delta),
            "rank": self.rank,
            "coefficient_over_pi": [[str(x) for x in row] for row in self.coefficient_over_pi.tolist()],
        }


def _to_sympy(value):
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    return sympy.nsimplify(value) if isinstance(value, str) else sympy.sympify(value)


def spectral_bundle_curvature(W, delta: PolarizationData, n: int, q: int) -> BundleCurvatureReport:
    """
    Avalia a matriz de coeficientes da curvatura do fibrado espectral E_qB.

    Raises:
        ValueError: Se W não for n x n hermitiana ou se n não bater com delta.
    """
    if not isinstance(delta, PolarizationData):
        delta = PolarizationData(tuple(delta))
    _check_level(q)
    if n != delta.n:
        raise ValueError(f"n={n} difere do número de divisores elementares ({delta.n}).")
    matrix = sympy.ImmutableMatrix([[_to_sympy(x) for x in row] for row in W])
    if matrix.shape != (n, n):
        raise ValueError(f"W deve ser {n}x{n}, recebido {matrix.shape}.")
    if not matrix.is_hermitian:
        raise ValueError("W não é hermitiana.")

    d = delta.delta
    last = sympy.Integer(d[-1]) ** 2
    coeff = sympy.ImmutableMatrix(n, n, lambda a, b: -matrix[a, b] * d[a] * d[b] / last)
    rank = math.comb(n + q - 1, q) * delta.product
    return BundleCurvatureReport(matrix, delta, q, coeff, rank)
