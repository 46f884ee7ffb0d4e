# src/lattice.py

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.sparse.linalg import norm as sparse_norm

from src.level_comparator import ClusterReport, LevelComparator, LevelTarget
from src.utils import Tolerances, VerificationError, get_logger

logger = get_logger(__name__)

# D_bar = (D_x + i D_y)/2 dá D_bar^* D_bar -> (-D^2 - b)/4, cujos níveis são q*b/2.
# Com área 2*pi*delta/B o campo é b = B, então kappa * Delta_lat -> q*B.
KAPPA = 2.0
MIN_GRID = 8
DENSE_MAX_DIMENSION = 48 * 48
PLAQUETTE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TorusLatticeConfig:
    """
    Rede N x N sobre o toro plano quadrado de lado ell = sqrt(2*pi*delta/B),
    espaçamento h = ell/N e fluxo total 2*pi*delta. `origin` é a coluna em que
    começa o calibre de Landau (a costura fica em origin - 1).
    """

    N: int
    B: float
    delta: int
    origin: int = 0

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < MIN_GRID:
            raise ValueError(f"N deve ser um inteiro >= {MIN_GRID}, recebido {self.N!r}.")
        if not self.B > 0:
            raise ValueError(f"B deve ser positivo, recebido {self.B!r}.")
        if not isinstance(self.delta, int) or self.delta < 1:
            raise ValueError(f"delta deve ser um inteiro >= 1, recebido {self.delta!r}.")

    @property
    def ell(self) -> float:
        return math.sqrt(2 * math.pi * self.delta / self.B)

    @property
    def h(self) -> float:
        return self.ell / self.N

    @property
    def dimension(self) -> int:
        return self.N * self.N

    def as_dict(self) -> dict:
        return {"N": self.N, "B": self.B, "delta": self.delta, "origin": self.origin}


@dataclass(frozen=True)
class LinkField:
    """Fases de ligação U_x[m, n] e U_y[m, n] (m = coluna x, n = linha y)."""

    ux: np.ndarray = field(repr=False)
    uy: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.ux.shape[0]


@dataclass(frozen=True)
class LatticeOperator:
    """Operador esparso de dimensão N^2; `hermitian` indica se A == A^H exatamente."""

    matrix: sp.csr_matrix = field(repr=False)
    hermitian: bool
    config: TorusLatticeConfig | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def max_row_nonzeros(self) -> int:
        return int(np.diff(self.matrix.indptr).max()) if self.dimension else 0


def build_links(config: TorusLatticeConfig, flux: int | None = None) -> LinkField:
    """
    Calibre de Landau com uma única costura torcida: U_x = 1 exceto na coluna
    origin - 1, onde U_x = exp(-2*pi*i*flux*n/N); U_y(m) = exp(2*pi*i*flux*m'/N^2)
    com m' = (m - origin) mod N. Todas as fases saem de inteiros reduzidos.

    Raises:
        VerificationError: Se alguma plaqueta não tiver fase 2*pi*flux/N^2.
    """
    N = config.N
    flux = config.delta if flux is None else flux
    m, n = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    shifted = (m - config.origin) % N

    uy = np.exp(2j * np.pi * ((flux * shifted) % (N * N)) / (N * N))
    ux = np.ones((N, N), dtype=complex)
    seam = (config.origin - 1) % N
    ux[seam, :] = np.exp(-2j * np.pi * ((flux * np.arange(N)) % N) / N)

    links = LinkField(ux, uy)
    deviation = np.abs(plaquettes(links) - np.exp(2j * np.pi * flux / (N * N))).max()
    if deviation > PLAQUETTE_TOLERANCE:
        raise VerificationError(
            "Fase de plaqueta não uniforme.", {"max_deviation": float(deviation), "flux": flux}
        )
    return links


def plaquettes(links: LinkField) -> np.ndarray:
    """Produto orientado U_x(s) U_y(s+x) conj(U_x(s+y)) conj(U_y(s)) em cada sítio."""
    ux, uy = links.ux, links.uy
    return ux * np.roll(uy, -1, axis=0) * np.conj(np.roll(ux, -1, axis=1)) * np.conj(uy)


def gauge_transform(links: LinkField, phases: np.ndarray) -> LinkField:
    """U'_mu(s) = conj(g(s)) U_mu(s) g(s + mu), com g = exp(i*phases)."""
    g = np.exp(1j * phases)
    ux = np.conj(g) * links.ux * np.roll(g, -1, axis=0)
    uy = np.conj(g) * links.uy * np.roll(g, -1, axis=1)
    return LinkField(ux, uy)


def _hopping(links: LinkField, axis: int) -> sp.csr_matrix:
    # T[s, s + mu] = conj(U_mu(s)), de modo que (T psi)(s) = conj(U) psi(s + mu)
    N = links.N
    m, n = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    rows = (m * N + n).ravel()
    if axis == 0:
        cols = (((m + 1) % N) * N + n).ravel()
        data = np.conj(links.ux).ravel()
    else:
        cols = (m * N + (n + 1) % N).ravel()
        data = np.conj(links.uy).ravel()
    return sp.csr_matrix((data, (rows, cols)), shape=(N * N, N * N))


def _dbar_from_links(links: LinkField, h: float, direction: str) -> sp.csr_matrix:
    identity = sp.identity(links.N * links.N, dtype=complex, format="csr")
    tx, ty = _hopping(links, 0), _hopping(links, 1)
    if direction == "forward":
        dx, dy = (tx - identity) / h, (ty - identity) / h
    elif direction == "backward":
        dx, dy = (identity - tx.conj().T) / h, (identity - ty.conj().T) / h
    else:
        raise ValueError(f"Direção desconhecida: '{direction}'. Use 'forward' ou 'backward'.")
    return ((dx + 1j * dy) * 0.5).tocsr()


def build_dbar(config: TorusLatticeConfig, direction: str = "forward", flux: int | None = None,
               links: LinkField | None = None) -> LatticeOperator:
    """
    D_bar = (D_x + i D_y)/2 com derivadas covariantes por diferenças (para
    frente ou para trás). `flux=0` desliga o campo mantendo ell, o que deixa o
    vetor constante no núcleo.

    Returns:
        LatticeOperator: Operador não hermitiano.
    """
    links = links or build_links(config, flux)
    matrix = _dbar_from_links(links, config.h, direction)
    return LatticeOperator(matrix, hermitian=False, config=config)


def _laplacian_from_links(config: TorusLatticeConfig, links: LinkField) -> LatticeOperator:
    forward = _dbar_from_links(links, config.h, "forward")
    backward = _dbar_from_links(links, config.h, "backward")
    # média dos dois lados: cada um sozinho tem um modo fantasma de borda de zona
    delta = 0.5 * (forward.conj().T @ forward + backward.conj().T @ backward)
    delta = (0.5 * (delta + delta.conj().T)).tocsr()
    delta.eliminate_zeros()
    return LatticeOperator(delta, hermitian=True, config=config)


def build_laplacian(config: TorusLatticeConfig, flux: int | None = None) -> LatticeOperator:
    """Delta_lat = (D_f^H D_f + D_b^H D_b)/2, hermitiano bit a bit."""
    logger.info(f"Montando Laplaciano da rede: {config.as_dict()}.")
    return _laplacian_from_links(config, build_links(config, flux))


def low_spectrum(op: LatticeOperator, k: int, seed: int = 0, sigma: float | None = None,
                 tolerances: Tolerances | None = None) -> np.ndarray:
    """
    Os k menores autovalores de um operador hermitiano. Até 48^2 linhas usa
    `scipy.linalg.eigh` denso; acima disso, Lanczos com shift-invert em torno
    de um sigma negativo e vetor inicial semeado.

    Raises:
        ValueError: Se o operador não for hermitiano ou k estiver fora do intervalo.
        VerificationError: Se o ARPACK não convergir ou algum resíduo
            ||A v - lambda v|| exceder a tolerância.
    """
    tol = (tolerances or Tolerances()).eigen_residual
    if not op.hermitian:
        raise ValueError("low_spectrum exige um operador hermitiano (forme D_bar^H D_bar).")
    n = op.dimension
    if not 1 <= k <= n:
        raise ValueError(f"k deve estar em 1..{n}, recebido {k}.")

    A = op.matrix
    scale = max(1.0, float(sparse_norm(A, 1)))
    if n <= DENSE_MAX_DIMENSION or k >= n - 1:
        values, vectors = eigh(A.toarray(), subset_by_index=[0, k - 1])
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        if np.iscomplexobj(A):
            v0 = v0 + 1j * rng.standard_normal(n)
        shift = -0.01 * scale if sigma is None else sigma
        try:
            values, vectors = eigsh(A.tocsc(), k=k, sigma=shift, which="LM", v0=v0)
        except ArpackNoConvergence as e:
            logger.error(f"ARPACK não convergiu: {e}", exc_info=True)
            raise VerificationError(
                "Autovalores não convergiram no solver iterativo.",
                {"requested": k, "converged": len(e.eigenvalues), "sigma": shift, "dimension": n},
            ) from e
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]

    residuals = np.linalg.norm(A @ vectors - vectors * values, axis=0) / np.linalg.norm(vectors, axis=0)
    worst = float(residuals.max()) if residuals.size else 0.0
    # ||A v - lambda v|| <= tol com ||v|| = 1
    if worst > tol:
        raise VerificationError(
            "Resíduo de autovetor acima da tolerância.",
            {"max_residual": worst, "tolerance": tol},
        )
    return np.asarray(values, dtype=float)


@dataclass
class LandauReport:
    config: TorusLatticeConfig
    q_levels: int
    eigenvalues: list
    comparison: ClusterReport

    @property
    def passed(self) -> bool:
        return self.comparison.passed

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "kappa": KAPPA,
            "q_levels": self.q_levels,
            "eigenvalues": self.eigenvalues,
            "comparison": self.comparison.as_dict(),
            "pass": self.passed,
        }


def landau_report(config: TorusLatticeConfig, q_levels: int, tolerances: Tolerances | None = None,
                  seed: int = 0, strict: bool = True) -> LandauReport:
    """
    Calcula q_levels*delta autovalores, multiplica por kappa, agrupa com lacuna
    B/2 e compara com os níveis q*B de multiplicidade delta.

    Raises:
        ValueError: Se q_levels*delta exceder a dimensão da rede.
        VerificationError: Com strict=True, se contagens, centros ou a
            positividade falharem.
    """
    tolerances = tolerances or Tolerances()
    k = q_levels * config.delta
    if q_levels < 1 or k > config.dimension:
        raise ValueError(f"q_levels*delta={k} fora do intervalo 1..{config.dimension}.")

    op = build_laplacian(config)
    values = low_spectrum(op, k, seed=seed, sigma=-config.B / 4, tolerances=tolerances)
    if values.min() < tolerances.psd_floor * max(1.0, config.B):
        raise VerificationError(
            "Autovalor negativo no Laplaciano da rede.", {"min_eigenvalue": float(values.min())}
        )
    scaled = [float(v) for v in KAPPA * values]

    comparator = LevelComparator(
        relative_tolerance=tolerances.level_relative,
        zero_tolerance=tolerances.zero_level * config.B,
        allow_extra_clusters=False,
    )
    targets = [LevelTarget(q, q * config.B, config.delta) for q in range(q_levels)]
    comparison = comparator.compare(scaled, targets, gap=config.B / 2)
    report = LandauReport(config, q_levels, scaled, comparison)

    logger.info(f"Níveis de Landau {config.as_dict()}: {comparison.feedback}.")
    if strict and not report.passed:
        raise VerificationError(f"Níveis de Landau não conferem: {comparison.feedback}", report.as_dict())
    return report


def _spectra_close(first, second, tolerance: float) -> tuple:
    first, second = np.asarray(first), np.asarray(second)
    scale = max(1.0, float(np.abs(first).max()))
    difference = float(np.abs(first - second).max())
    return difference, difference <= tolerance * scale


def gauge_invariance_check(config: TorusLatticeConfig, seed: int = 0, k: int | None = None,
                           identity: bool = False, tolerances: Tolerances | None = None) -> bool:
    """
    Aplica uma transformação de calibre aleatória g(s) = exp(i*theta_s) às
    ligações, confere Delta' = G Delta G^H entrada a entrada e compara os
    espectros baixos.

    Raises:
        VerificationError: Se o operador ou o espectro mudarem além da tolerância.
    """
    tolerances = tolerances or Tolerances()
    k = k or min(config.dimension, 4 * config.delta)
    rng = np.random.default_rng(seed)
    N = config.N
    phases = np.zeros((N, N)) if identity else rng.uniform(0, 2 * np.pi, size=(N, N))

    links = build_links(config)
    original = _laplacian_from_links(config, links)
    transformed = _laplacian_from_links(config, gauge_transform(links, phases))

    G = sp.diags(np.exp(1j * phases).ravel())
    expected = G @ original.matrix @ G.conj().T
    operator_error = float(abs(transformed.matrix - expected).max()) if expected.nnz else 0.0
    scale = max(1.0, float(sparse_norm(original.matrix, 1)))
    if operator_error > tolerances.gauge * scale:
        raise VerificationError(
            "Laplaciano não é covariante sob a transformação de calibre.",
            {"operator_error": operator_error, "seed": seed},
        )

    before = low_spectrum(original, k, seed=seed, sigma=-config.B / 4, tolerances=tolerances)
    after = low_spectrum(transformed, k, seed=seed, sigma=-config.B / 4, tolerances=tolerances)
    difference, ok = _spectra_close(before, after, tolerances.gauge)
    if not ok:
        raise VerificationError(
            "Espectro mudou sob transformação de calibre.",
            {"max_difference": difference, "seed": seed, "config": config.as_dict()},
        )
    logger.info(f"Invariância de calibre ok (seed={seed}, diferença máxima {difference:.2e}).")
    return True


def origin_translation_check(config: TorusLatticeConfig, shift: int, k: int | None = None,
                             tolerances: Tolerances | None = None) -> bool:
    """
    Desloca a origem do calibre de Landau em `shift` colunas e confere que o
    espectro baixo não muda.

    Raises:
        VerificationError: Se os espectros diferirem além da tolerância.
    """
    tolerances = tolerances or Tolerances()
    k = k or min(config.dimension, 4 * config.delta)
    moved = TorusLatticeConfig(config.N, config.B, config.delta, (config.origin + shift) % config.N)
    before = low_spectrum(build_laplacian(config), k, sigma=-config.B / 4, tolerances=tolerances)
    after = low_spectrum(build_laplacian(moved), k, sigma=-config.B / 4, tolerances=tolerances)
    difference, ok = _spectra_close(before, after, tolerances.gauge)
    if not ok:
        raise VerificationError(
            "Espectro depende da origem do calibre.", {"shift": shift, "max_difference": difference}
        )
    return True


@dataclass
class ConvergenceStudy:
    rows: list
    orders: list

    def as_dict(self) -> dict:
        return {"rows": self.rows, "orders": self.orders}


def _level_error(comparison: ClusterReport, B: float) -> float:
    errors = []
    for match in comparison.matches:
        if match.center is None:
            return math.inf
        errors.append(abs(match.center) / B if match.target == 0 else match.relative_error)
    return max(errors)


def convergence_study(config: TorusLatticeConfig, sizes, q_levels: int = 3,
                      tolerances: Tolerances | None = None, seed: int = 0) -> ConvergenceStudy:
    """
    Repete `landau_report` (sem exigir aprovação) para cada N em `sizes` e
    estima a ordem do esquema por log2 da razão dos erros entre tamanhos
    consecutivos.
    """
    rows = []
    for N in sorted(sizes):
        sized = TorusLatticeConfig(N, config.B, config.delta, config.origin)
        report = landau_report(sized, q_levels, tolerances=tolerances, seed=seed, strict=False)
        rows.append({
            "N": N,
            "centers": [m.center for m in report.comparison.matches],
            "max_error": _level_error(report.comparison, config.B),
        })
        logger.info(f"Convergência: N={N}, erro máximo {rows[-1]['max_error']:.3e}.")

    orders = []
    for coarse, fine in zip(rows, rows[1:]):
        if coarse["max_error"] > 0 and fine["max_error"] > 0 and math.isfinite(coarse["max_error"]):
            ratio = coarse["max_error"] / fine["max_error"]
            orders.append(math.log(ratio) / math.log(fine["N"] / coarse["N"]))
        else:
            orders.append(None)
    return ConvergenceStudy(rows, orders)


@dataclass
class ProductTorusReport:
    first: TorusLatticeConfig
    second: TorusLatticeConfig
    method: str
    comparison: ClusterReport

    @property
    def passed(self) -> bool:
        return self.comparison.passed

    def as_dict(self) -> dict:
        return {
            "first": self.first.as_dict(),
            "second": self.second.as_dict(),
            "method": self.method,
            "comparison": self.comparison.as_dict(),
            "pass": self.passed,
        }


def product_torus_report(first: TorusLatticeConfig, second: TorusLatticeConfig, q_levels: int,
                         use_kronecker: bool = False, tolerances: Tolerances | None = None,
                         seed: int = 0) -> ProductTorusReport:
    """
    Toro de dimensão 2 como produto de dois toros com fluxos (delta_1, delta_2):
    o Laplaciano é a soma de Kronecker, com níveis q*B de multiplicidade
    (q+1)*delta_1*delta_2. Por padrão soma os espectros dos fatores; com
    use_kronecker=True monta a matriz N^4 (apenas para redes pequenas).
    """
    tolerances = tolerances or Tolerances()
    if first.B != second.B:
        raise ValueError(f"Os fatores precisam do mesmo B, recebido {first.B} e {second.B}.")
    B = first.B
    total = sum((q + 1) * first.delta * second.delta for q in range(q_levels))

    if use_kronecker:
        a, b = build_laplacian(first).matrix, build_laplacian(second).matrix
        kron = sp.kronsum(b, a, format="csr")
        op = LatticeOperator(kron, hermitian=True)
        values = KAPPA * low_spectrum(op, total, seed=seed, sigma=-B / 4, tolerances=tolerances)
        method = "kronecker"
    else:
        spectra = [
            low_spectrum(build_laplacian(c), q_levels * c.delta, seed=seed, sigma=-B / 4,
                         tolerances=tolerances)
            for c in (first, second)
        ]
        values = KAPPA * np.sort(np.add.outer(spectra[0], spectra[1]).ravel())[:total]
        method = "pairwise"

    comparator = LevelComparator(
        relative_tolerance=tolerances.level_relative,
        zero_tolerance=2 * tolerances.zero_level * B,
        allow_extra_clusters=False,
    )
    targets = [
        LevelTarget(q, q * B, (q + 1) * first.delta * second.delta) for q in range(q_levels)
    ]
    comparison = comparator.compare([float(v) for v in values], targets, gap=B / 2)
    logger.info(f"Toro produto ({method}): {comparison.feedback}")
    return ProductTorusReport(first, second, method, comparison)
