# src/verification.py

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from src.charclass import binom_poly_identity_check, dimension_report, hrr_dimension
from src.exppoly import (
    OperatorKind,
    ThetaSpec,
    apply_operator,
    bk_residual,
    eigen_residual,
    ladder_down,
    ladder_up,
    normalized_overlap,
    random_section,
    theta_basis,
)
from src.galerkin import BasisSpec, denominator_bound_holds, p1_spectrum_report
from src.lattice import (
    TorusLatticeConfig,
    gauge_invariance_check,
    landau_report,
    origin_translation_check,
    product_torus_report,
)
from src.spectra import Space, grassmann_eigenvalues, grassmann_structure_check, ladder_constant
from src.utils import Tolerances, VerificationError, get_logger

logger = get_logger(__name__)

TARGETS = ("torus", "p1", "ladder", "identities", "grassmann", "hrr")

DEFAULT_PARAMS = {
    "torus": {"N": 64, "B": 2 * math.pi, "deltas": [1, 2, 3], "levels": 4, "gauge_seeds": 1, "dim": 1},
    "p1": {"Bs": [1, 2, 3, 4], "m": 4, "d": None, "levels": 4},
    "ladder": {"B": 1, "delta_max": 4, "q_max": 5, "orthogonality_levels": 3, "grid": 256},
    "identities": {"seeds": 100, "B": 1, "identity_max_n": 8},
    "grassmann": {"mu_max": 4, "nu_max": 4},
    "hrr": {"n_max": 5, "B_max": 10, "q_max": 8, "golden_n_max": 6, "golden_k_max": 20},
}


@dataclass
class CheckResult:
    """Resultado de uma verificação individual da suíte."""

    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "details": self.details}


@dataclass
class SuiteResult:
    target: str
    params: dict
    checks: list

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "params": self.params,
            "checks": [c.as_dict() for c in self.checks],
            "pass": self.passed,
        }


class VerificationRunner:
    """
    Executa as suítes de verificação (torus, p1, ladder, identities,
    grassmann, hrr), reportando o progresso por callback.

    Cada suíte é uma lista ordenada de verificações independentes; com
    threads > 1 elas rodam num pool, mas os resultados saem sempre na ordem
    do plano.
    """

    def __init__(self, tolerances: Tolerances | None = None, threads: int = 1, seed: int = 0):
        logger.info("Inicializando VerificationRunner...")
        self.tolerances = tolerances or Tolerances()
        self.threads = max(1, int(threads))
        self.seed = seed
        logger.info(f"VerificationRunner configurado: threads={self.threads}, seed={self.seed}.")

    # ----------------------------------------------------------------------------------------------
    # Planejamento
    # ----------------------------------------------------------------------------------------------

    def resolve_params(self, target: str, params: dict | None) -> dict:
        """Mescla os parâmetros informados com os padrões da suíte."""
        if target not in TARGETS:
            raise ValueError(f"Alvo de verificação desconhecido: '{target}'. Use um de {TARGETS}.")
        merged = dict(DEFAULT_PARAMS[target])
        for key, value in (params or {}).items():
            if value is None:
                continue
            if key not in merged:
                raise ValueError(f"Parâmetro '{key}' não se aplica ao alvo '{target}'.")
            merged[key] = value
        return merged

    def plan(self, target: str, params: dict) -> list:
        """Lista ordenada de (nome, função sem argumentos que devolve detalhes)."""
        builder = getattr(self, f"_plan_{target}")
        return builder(params)

    def _plan_torus(self, p: dict) -> list:
        checks = []
        for delta in p["deltas"]:
            config = TorusLatticeConfig(int(p["N"]), float(p["B"]), int(delta))
            checks.append((f"landau[delta={delta}]", self._landau(config, int(p["levels"]))))
            for offset in range(int(p["gauge_seeds"])):
                seed = self.seed + offset
                checks.append(
                    (f"gauge[delta={delta},seed={seed}]", self._gauge(config, seed))
                )
            checks.append((f"origin[delta={delta}]", self._origin(config)))
        if int(p["dim"]) == 2:
            deltas = list(p["deltas"]) * 2
            first = TorusLatticeConfig(int(p["N"]), float(p["B"]), int(deltas[0]))
            second = TorusLatticeConfig(int(p["N"]), float(p["B"]), int(deltas[1]))
            checks.append(("product_torus", self._product(first, second, int(p["levels"]))))
        return checks

    def _plan_p1(self, p: dict) -> list:
        m, levels = int(p["m"]), int(p["levels"])
        checks = []
        for B in p["Bs"]:
            B = int(B)
            # d padrão = B + 8
            d = int(p["d"]) if p["d"] is not None else B + 8
            checks.append((f"p1_levels[B={B}]", self._p1(B, m, d, levels - 1)))
            checks.append((f"denominator_bound[B={B}]", self._denominators(B, m, d)))
        return checks

    def _plan_ladder(self, p: dict) -> list:
        B, q_max = p["B"], int(p["q_max"])
        checks = []
        for delta in range(1, int(p["delta_max"]) + 1):
            for j in range(delta):
                checks.append((f"ladder[delta={delta},j={j}]", self._ladder(B, delta, j, q_max)))
        levels = int(p["orthogonality_levels"])
        if levels > 0:
            checks.append(("level_orthogonality", self._level_orthogonality(B, levels, int(p["grid"]))))
            checks.append(("theta_orthogonality", self._theta_orthogonality(B, int(p["grid"]))))
        return checks

    def _plan_identities(self, p: dict) -> list:
        return [
            ("bochner_kodaira", self._bochner_kodaira(int(p["seeds"]), p["B"])),
            ("laplacian_difference", self._laplacian_difference(int(p["seeds"]), p["B"])),
            ("binomial_polynomial", self._binomial(int(p["identity_max_n"]))),
        ]

    def _plan_grassmann(self, p: dict) -> list:
        checks = [
            (f"structure[{mu},{nu}]", self._grassmann(mu, nu))
            for mu in range(1, int(p["mu_max"]) + 1)
            for nu in range(1, int(p["nu_max"]) + 1)
        ]
        checks.append(("eigenvalues[2,2,-1]", self._grassmann_eigenvalues()))
        return checks

    def _plan_hrr(self, p: dict) -> list:
        checks = [
            (f"three_way[n={n}]", self._three_way(n, int(p["B_max"]), int(p["q_max"])))
            for n in range(1, int(p["n_max"]) + 1)
        ]
        checks.append(("holomorphic_golden", self._golden(int(p["golden_n_max"]), int(p["golden_k_max"]))))
        return checks

    # ----------------------------------------------------------------------------------------------
    # Verificações
    # ----------------------------------------------------------------------------------------------

    def _landau(self, config, levels):
        def check():
            report = landau_report(config, levels, tolerances=self.tolerances, seed=self.seed, strict=False)
            return report.passed, report.as_dict()

        return check

    def _gauge(self, config, seed):
        def check():
            gauge_invariance_check(config, seed=seed, tolerances=self.tolerances)
            return True, {"seed": seed}

        return check

    def _origin(self, config):
        def check():
            shift = config.N // 3
            origin_translation_check(config, shift, tolerances=self.tolerances)
            return True, {"shift": shift}

        return check

    def _product(self, first, second, levels):
        def check():
            report = product_torus_report(first, second, levels, tolerances=self.tolerances, seed=self.seed)
            return report.passed, report.as_dict()

        return check

    def _p1(self, B, m, d, q_max):
        def check():
            report = p1_spectrum_report(B, m, d, q_max, tolerances=self.tolerances)
            return report.passed, {
                "comparison": report.comparison.as_dict(),
                "residuals": report.residuals,
                "kodaira": report.kodaira,
            }

        return check

    def _denominators(self, B, m, d):
        def check():
            return denominator_bound_holds(BasisSpec(B, m, d)), {"bound": f"({B + 2 * m + 1})!"}

        return check

    def _ladder(self, B, delta, j, q_max):
        def check():
            base = theta_basis(ThetaSpec(B, delta, j), tolerances=self.tolerances, seed=self.seed)
            failures = []
            for q in range(q_max + 1):
                up = ladder_up(base, q)
                if not eigen_residual(up, q * base.B).is_zero:
                    failures.append({"q": q, "operator": "delta0"})
                if not eigen_residual(up, (q + 1) * base.B, OperatorKind.DELTA_UP0).is_zero:
                    failures.append({"q": q, "operator": "delta_up0"})
                constant = ladder_constant(Space.ABELIAN, 1, B, q)
                back = ladder_down(up, q) - base.scale(constant)
                if not back.is_zero:
                    failures.append({"q": q, "operator": "annihilation"})
            return not failures, {"failures": failures, "M": base.meta.get("M"), "q_max": q_max}

        return check

    def _level_orthogonality(self, B, levels, grid):
        def check():
            spec = ThetaSpec(B, 1, 0)
            base = theta_basis(spec, tolerances=self.tolerances, seed=self.seed)
            images = [ladder_up(base, q) for q in range(levels + 1)]
            overlaps = {}
            for q in range(levels + 1):
                for qp in range(q + 1, levels + 1):
                    overlaps[f"{q},{qp}"] = normalized_overlap(
                        images[q], images[qp], spec, grid, self.tolerances, self.seed
                    )
            worst = max(overlaps.values(), default=0.0)
            return worst < self.tolerances.orthogonality, {"overlaps": overlaps, "max": worst}

        return check

    def _theta_orthogonality(self, B, grid):
        def check():
            delta = 2
            spec = ThetaSpec(B, delta, 0)
            first = theta_basis(spec, tolerances=self.tolerances, seed=self.seed)
            second = theta_basis(ThetaSpec(B, delta, 1), tolerances=self.tolerances, seed=self.seed)
            overlap = normalized_overlap(first, second, spec, grid, self.tolerances, self.seed)
            return overlap < self.tolerances.theta_orthogonality, {"delta": delta, "overlap": overlap}

        return check

    def _bochner_kodaira(self, seeds, B):
        def check():
            failing = [s for s in range(self.seed, self.seed + seeds) if not bk_residual(random_section(s, B)).is_zero]
            return not failing, {"seeds": seeds, "failing_seeds": failing}

        return check

    def _laplacian_difference(self, seeds, B):
        def check():
            failing = []
            for s in range(self.seed, self.seed + seeds):
                section = random_section(s, B)
                difference = (
                    apply_operator(OperatorKind.DELTA_UP0, section)
                    - apply_operator(OperatorKind.DELTA0, section)
                    - section.scale(section.B)
                )
                if not difference.is_zero:
                    failing.append(s)
            return not failing, {"seeds": seeds, "failing_seeds": failing}

        return check

    def _binomial(self, n_max):
        def check():
            for n in range(1, n_max + 1):
                binom_poly_identity_check(n)
            return True, {"n_max": n_max}

        return check

    def _grassmann(self, mu, nu):
        def check():
            report = grassmann_structure_check(mu, nu)
            return report.passed, report.as_dict()

        return check

    def _grassmann_eigenvalues(self):
        def check():
            first, second = grassmann_eigenvalues(2, 2, -1)
            return (first, second) == (0, 5), {"eigenvalues": [str(first), str(second)]}

        return check

    def _three_way(self, n, B_max, q_max):
        def check():
            disagreements = []
            for B in range(1, B_max + 1):
                for q in range(q_max + 1):
                    report = dimension_report(n, B, q, tolerances=self.tolerances)
                    if not report.consistent:
                        disagreements.append(report.as_dict())
            return not disagreements, {"n": n, "disagreements": disagreements}

        return check

    def _golden(self, n_max, k_max):
        def check():
            mismatches = [
                {"n": n, "k": k}
                for n in range(1, n_max + 1)
                for k in range(1, k_max + 1)
                if hrr_dimension(n, k, 0) != math.comb(k + n, n)
            ]
            return not mismatches, {"mismatches": mismatches}

        return check

    # ----------------------------------------------------------------------------------------------
    # Execução
    # ----------------------------------------------------------------------------------------------

    @staticmethod
    def _execute(name, check) -> CheckResult:
        try:
            passed, details = check()
            return CheckResult(name, bool(passed), details)
        except VerificationError as e:
            logger.error(f"Verificação '{name}' falhou: {e}", exc_info=True)
            return CheckResult(name, False, {"error": str(e), **e.details})

    def run(self, target: str, params: dict | None = None, progress_callback=None) -> SuiteResult:
        """
        Roda a suíte `target` e devolve os resultados na ordem do plano.

        Args:
            target (str): Um de TARGETS.
            params (dict, optional): Parâmetros que substituem os padrões.
            progress_callback (callable, optional): Recebe a fração concluída (0..1).

        Raises:
            ValueError: Para alvo ou parâmetros inválidos.
        """
        params = self.resolve_params(target, params)
        checks = self.plan(target, params)
        logger.info(f"Iniciando suíte '{target}' com {len(checks)} verificações.")

        results = []
        if self.threads > 1 and len(checks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = [pool.submit(self._execute, name, check) for name, check in checks]
                for i, future in enumerate(futures):
                    results.append(future.result())
                    if progress_callback:
                        progress_callback((i + 1) / len(checks))
        else:
            for i, (name, check) in enumerate(checks):
                results.append(self._execute(name, check))
                if progress_callback:
                    progress_callback((i + 1) / len(checks))

        suite = SuiteResult(target, params, results)
        logger.info(f"Suíte '{target}' concluída: {'ok' if suite.passed else 'FALHOU'}.")
        return suite
