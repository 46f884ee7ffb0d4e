# src/level_comparator.py

from dataclasses import dataclass

from src.utils import cluster_levels, get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class LevelTarget:
    """Nível analítico esperado: autovalor e multiplicidade (None = não conferir)."""

    q: int
    eigenvalue: float
    multiplicity: int | None = None


@dataclass(frozen=True)
class LevelMatch:
    q: int
    target: float
    center: float | None
    count: int
    expected_count: int | None
    spread: float
    relative_error: float | None
    passed: bool

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "target": self.target,
            "center": self.center,
            "count": self.count,
            "expected_count": self.expected_count,
            "spread": self.spread,
            "relative_error": self.relative_error,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class ClusterReport:
    """
    Resultado da comparação: grupos medidos, casamento com os níveis alvo
    e feedback legível.
    """

    clusters: tuple
    matches: tuple
    gap: float
    total_values: int
    passed: bool
    feedback: str

    def as_dict(self) -> dict:
        return {
            "clusters": [
                {"center": c.center, "count": c.count, "spread": c.spread} for c in self.clusters
            ],
            "matches": [m.as_dict() for m in self.matches],
            "gap": self.gap,
            "total_values": self.total_values,
            "feedback": self.feedback,
            "pass": self.passed,
        }


class LevelComparator:
    """
    Compara autovalores medidos (numéricos) com os níveis analíticos,
    agrupando por lacuna e gerando feedback em português.
    """

    def __init__(self, relative_tolerance: float = 0.05, zero_tolerance: float = 1e-8,
                 allow_extra_clusters: bool = True):
        """
        Args:
            relative_tolerance (float): Erro relativo máximo para níveis não nulos.
            zero_tolerance (float): |centro| máximo para o nível de autovalor zero.
            allow_extra_clusters (bool): Se False, grupos além dos alvos reprovam.
        """
        logger.info("Inicializando LevelComparator.")
        self.relative_tolerance = relative_tolerance
        self.zero_tolerance = zero_tolerance
        self.allow_extra_clusters = allow_extra_clusters

    def _match(self, target: LevelTarget, cluster) -> LevelMatch:
        if cluster is None:
            return LevelMatch(target.q, target.eigenvalue, None, 0, target.multiplicity, 0.0, None, False)

        if target.eigenvalue == 0:
            relative = abs(cluster.center)
            close = relative <= self.zero_tolerance
        else:
            relative = abs(cluster.center - target.eigenvalue) / abs(target.eigenvalue)
            close = relative <= self.relative_tolerance
        count_ok = target.multiplicity is None or cluster.count == target.multiplicity
        return LevelMatch(
            q=target.q,
            target=target.eigenvalue,
            center=cluster.center,
            count=cluster.count,
            expected_count=target.multiplicity,
            spread=cluster.spread,
            relative_error=float(relative),
            passed=bool(close and count_ok),
        )

    def compare(self, values, targets, gap: float) -> ClusterReport:
        """
        Agrupa `values` com a lacuna `gap` e casa o k-ésimo grupo (em ordem
        crescente) com o k-ésimo alvo.

        Returns:
            ClusterReport: Casamentos e feedback.
        """
        values = list(values)
        clusters = cluster_levels(values, gap) if values else []
        targets = sorted(targets, key=lambda t: t.eigenvalue)

        matches = []
        for index, target in enumerate(targets):
            cluster = clusters[index] if index < len(clusters) else None
            matches.append(self._match(target, cluster))

        extra = len(clusters) > len(targets) and not self.allow_extra_clusters
        passed = all(m.passed for m in matches) and not extra

        feedback = self._generate_feedback(matches, len(clusters) - len(targets) if extra else 0)
        return ClusterReport(
            clusters=tuple(clusters),
            matches=tuple(matches),
            gap=gap,
            total_values=len(values),
            passed=passed,
            feedback=feedback,
        )

    def _generate_feedback(self, matches, extra_clusters: int) -> str:
        """Gera feedback consolidado para todos os níveis com problemas."""
        errors = []
        for match in matches:
            if match.passed:
                continue
            if match.center is None:
                errors.append(f"Nível {match.q}: nenhum grupo encontrado")
                continue
            if match.expected_count is not None and match.count != match.expected_count:
                errors.append(
                    f"Nível {match.q}: {match.count} autovalores, esperado {match.expected_count}"
                )
            limit = self.zero_tolerance if match.target == 0 else self.relative_tolerance
            if match.relative_error > limit:
                direction = "acima" if match.center > match.target else "abaixo"
                errors.append(
                    f"Nível {match.q}: centro {match.center:.6g} {direction} do alvo {match.target:.6g}"
                )
        if extra_clusters:
            errors.append(f"{extra_clusters} grupo(s) além dos níveis esperados")

        if not errors:
            return "Espectro confere com os níveis analíticos!"
        feedback = ". ".join(errors)
        logger.info(f"Feedback gerado: '{feedback}'")
        return feedback
