# src/utils.py

import logging
import os
from dataclasses import dataclass, fields, replace
from fractions import Fraction

import numpy as np
from sklearn.cluster import AgglomerativeClustering

THREADS_ENV_VAR = "SPECTRAL_BUNDLES_THREADS"
DEFAULT_LOG_FILE = os.path.join("logs", "app.log")


# Configuração básica do logger
def setup_logging(level=logging.INFO, log_file: str | None = DEFAULT_LOG_FILE):
    """
    Configura o sistema de logging da aplicação, definindo o formato,
    o nível de saída e os destinos (console e arquivo).

    O console recebe as mensagens em stderr, deixando stdout livre para os
    artefatos JSON/CSV. Deve ser chamada uma única vez na inicialização;
    chamadas repetidas apenas ajustam o nível.

    Args:
        level (int | str): Nível mínimo de logging (ex.: logging.INFO ou "DEBUG").
        log_file (str | None): Caminho do arquivo de log. None desativa o arquivo.
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # Evita handlers duplicados quando setup_logging é chamado mais de uma vez.
    if not root_logger.handlers:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)
        root_logger.info("Console Handler configurado para logging.")

        if log_file:
            log_dir = os.path.dirname(log_file)
            if log_dir and not os.path.exists(log_dir):
                os.makedirs(log_dir)
                root_logger.info(f"Diretório de logs '{log_dir}' criado.")
            file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)
            root_logger.info(f"File Handler configurado para salvar logs em: {log_file}")

    root_logger.info("Configuração de logging inicializada com sucesso.")
    return root_logger


def get_logger(name: str):
    """
    Retorna uma instância de logger com o nome especificado.
    Cada módulo deve obter seu próprio logger usando esta função.

    Args:
        name (str): O nome do logger (geralmente __name__ do módulo).

    Returns:
        logging.Logger: A instância do logger.
    """
    return logging.getLogger(name)


logger = get_logger(__name__)


class VerificationError(RuntimeError):
    """
    Falha de verificação: uma identidade exata não fechou, um oráculo
    numérico discordou ou um solver não convergiu.

    O atributo `details` carrega os números que explicam a falha e é
    serializado no artefato de saída.
    """

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = dict(details or {})


@dataclass(frozen=True)
class Tolerances:
    """
    Limiares numéricos usados pelas verificações. Todos devem ser positivos,
    exceto `psd_floor`, que é o piso (negativo) aceito para autovalores de
    formas semidefinidas positivas.
    """

    closed_form: float = 1e-6
    automorphy: float = 1e-10
    periodicity: float = 1e-8
    orthogonality: float = 1e-6
    theta_orthogonality: float = 1e-8
    eigen_residual: float = 1e-8
    galerkin_residual: float = 1e-9
    galerkin_relative: float = 1e-8
    level_relative: float = 0.05
    zero_level: float = 0.02
    gauge: float = 1e-10
    psd_floor: float = -1e-12

    def with_overrides(self, overrides: dict | None) -> "Tolerances":
        """
        Retorna uma cópia com os valores de `overrides` aplicados.

        Raises:
            ValueError: Se a chave não existir ou o valor não for positivo.
        """
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        parsed = {}
        for key, value in overrides.items():
            if key not in known:
                raise ValueError(f"Tolerância desconhecida: '{key}'.")
            value = float(value)
            if key != "psd_floor" and not value > 0:
                raise ValueError(f"Tolerância '{key}' deve ser positiva, recebido {value}.")
            parsed[key] = value
        logger.info(f"Tolerâncias sobrescritas: {parsed}")
        return replace(self, **parsed)


def resolve_thread_count(env: dict | None = None) -> int:
    """
    Lê o número de threads da variável de ambiente SPECTRAL_BUNDLES_THREADS.

    Valores ausentes ou inválidos resultam em 1 (execução determinística em
    uma única thread).
    """
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV_VAR)
    if raw is None or raw == "":
        return 1
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"{THREADS_ENV_VAR}='{raw}' não é um inteiro. Usando 1 thread.")
        return 1
    if threads < 1:
        logger.warning(f"{THREADS_ENV_VAR}={threads} inválido. Usando 1 thread.")
        return 1
    return threads


def as_fraction(value) -> Fraction:
    """
    Converte int, str ("3/2", "0.25") ou Fraction em Fraction exata.

    Floats são aceitos e convertidos pela representação decimal curta, de modo
    que 0.1 vira 1/10 e não a expansão binária.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("Booleano não é um número racional válido.")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"Valor racional inválido: '{value}'.") from e


def fraction_to_json(value: Fraction) -> dict:
    """Representa um racional como {"num": str, "den": str} sem perda de precisão."""
    value = as_fraction(value)
    return {"num": str(value.numerator), "den": str(value.denominator)}


@dataclass(frozen=True)
class Cluster:
    """Grupo de autovalores próximos: centro (média), contagem e espalhamento."""

    center: float
    count: int
    spread: float
    values: tuple


def cluster_levels(values, gap: float) -> list[Cluster]:
    """
    Agrupa autovalores reais em níveis: dois valores consecutivos (ordenados)
    ficam no mesmo grupo quando a distância entre eles é menor que `gap`.

    Usa ligação simples (single linkage), que em uma dimensão coincide com o
    agrupamento guloso por lacunas.

    Args:
        values: Sequência de autovalores.
        gap (float): Lacuna mínima entre grupos distintos.

    Returns:
        list[Cluster]: Grupos ordenados pelo centro.
    """
    if gap <= 0:
        raise ValueError(f"A lacuna de agrupamento deve ser positiva, recebido {gap}.")
    data = np.sort(np.asarray(values, dtype=float).ravel())
    if data.size == 0:
        return []
    if data.size == 1:
        labels = np.zeros(1, dtype=int)
    else:
        model = AgglomerativeClustering(
            n_clusters=None, distance_threshold=gap, linkage="single"
        )
        labels = model.fit_predict(data.reshape(-1, 1))

    clusters = []
    for label in np.unique(labels):
        members = data[labels == label]
        clusters.append(
            Cluster(
                center=float(np.mean(members)),
                count=int(members.size),
                spread=float(members.max() - members.min()),
                values=tuple(float(v) for v in members),
            )
        )
    clusters.sort(key=lambda c: c.center)
    logger.debug(f"{data.size} autovalores agrupados em {len(clusters)} níveis (lacuna {gap}).")
    return clusters
