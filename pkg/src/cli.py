# src/cli.py

import argparse
import sys
from dataclasses import dataclass, field

from src.charclass import dimension_report
from src.exppoly import ThetaSpec, eigen_residual, ladder_up, sample_grid, theta_basis
from src.report_generator import (
    FORMATS,
    ReportGenerator,
    build_artifact,
    ladder_samples_to_csv,
    render,
    write_output,
)
from src.spectra import (
    DEFAULT_C,
    PolarizationData,
    Space,
    abelian_spectrum,
    grassmann_spectrum,
    pn_dual_ladder,
    pn_spectrum,
    zero_mode_levels,
)
from src.utils import (
    DEFAULT_LOG_FILE,
    Tolerances,
    VerificationError,
    as_fraction,
    get_logger,
    resolve_thread_count,
    setup_logging,
)
from src.verification import TARGETS, VerificationRunner

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SPECTRUM_SPACES = ("abelian", "pn", "pn-dual", "grassmann")

# por alvo: atributo do argparse -> (nome do parâmetro da suíte, conversão)
VERIFY_FLAGS = {
    "torus": {"N": ("N", int), "B": ("B", float), "delta": ("deltas", list), "levels": ("levels", int),
              "gauge_seeds": ("gauge_seeds", int), "dim": ("dim", int)},
    "p1": {"B": ("Bs", lambda value: [int(value)]), "m": ("m", int), "d": ("d", int), "levels": ("levels", int)},
    "ladder": {"B": ("B", str), "delta_max": ("delta_max", int), "qmax": ("q_max", int),
               "grid": ("grid", int), "levels": ("orthogonality_levels", int)},
    "identities": {"seeds": ("seeds", int), "B": ("B", str)},
    "grassmann": {"mu_max": ("mu_max", int), "nu_max": ("nu_max", int)},
    "hrr": {"n_max": ("n_max", int), "B_max": ("B_max", int), "qmax": ("q_max", int)},
}


@dataclass
class RunConfig:
    """Configuração completa de uma execução da linha de comando."""

    subcommand: str
    params: dict = field(default_factory=dict)
    output_format: str = "json"
    output_path: str | None = None
    pdf_path: str | None = None
    tolerance_overrides: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.output_format not in FORMATS:
            raise ValueError(f"Formato desconhecido: '{self.output_format}'.")
        Tolerances().with_overrides(self.tolerance_overrides)

    def to_params(self) -> dict:
        """Objeto `params` do artefato; a semente sempre presente."""
        params = {k: v for k, v in self.params.items() if v is not None}
        params["seed"] = self.seed
        if self.tolerance_overrides:
            params["tolerances"] = dict(self.tolerance_overrides)
        return params


def _parse_tolerances(items) -> dict:
    overrides = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Tolerância deve ter o formato chave=valor, recebido '{item}'.")
        try:
            overrides[key.strip()] = float(value)
        except ValueError as e:
            raise ValueError(f"Valor de tolerância inválido em '{item}'.") from e
    return overrides


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="output_format", choices=FORMATS, default="json")
    common.add_argument("--output", dest="output_path", default=None, help="Arquivo de saída (padrão: stdout).")
    common.add_argument("--pdf", dest="pdf_path", default=None, help="Gera também um resumo em PDF.")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", action="append", default=[], metavar="CHAVE=VALOR")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--log-level", default="INFO")
    common.add_argument("--log-file", default=DEFAULT_LOG_FILE)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="spectral-bundles",
        description="Espectros de Laplacianos de Bochner-Kodaira em fibrados de linha.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    hrr = sub.add_parser("hrr", parents=[common], help="Dimensão h^0 por HRR e fórmulas fechadas.")
    hrr.add_argument("-n", type=int, required=True)
    hrr.add_argument("-B", type=int, required=True)
    hrr.add_argument("-q", type=int, required=True)
    hrr.add_argument("--all-methods", action="store_true")

    spectrum = sub.add_parser("spectrum", parents=[common], help="Tabela espectral exata.")
    spectrum.add_argument("space", choices=SPECTRUM_SPACES)
    spectrum.add_argument("-n", type=int, default=None)
    spectrum.add_argument("-B", type=str, required=True)
    spectrum.add_argument("--delta", type=int, nargs="+", default=None)
    spectrum.add_argument("--qmax", type=int, default=3)
    spectrum.add_argument("-q", type=int, default=0, help="Nível fixo para pn-dual.")
    spectrum.add_argument("--kmax", type=int, default=None)
    spectrum.add_argument("--dual-k", type=int, default=0)
    spectrum.add_argument("--mu", type=int, default=None)
    spectrum.add_argument("--nu", type=int, default=None)
    spectrum.add_argument("--c", type=str, default=str(DEFAULT_C))

    verify = sub.add_parser("verify", parents=[common], help="Roda uma suíte de verificação.")
    verify.add_argument("target", choices=TARGETS)
    verify.add_argument("--N", type=int, default=None)
    verify.add_argument("-B", type=str, default=None)
    verify.add_argument("--delta", type=int, nargs="+", default=None)
    verify.add_argument("--levels", type=int, default=None)
    verify.add_argument("--gauge-seeds", type=int, default=None)
    verify.add_argument("--dim", type=int, choices=(1, 2), default=None)
    verify.add_argument("-m", type=int, default=None)
    verify.add_argument("-d", type=int, default=None)
    verify.add_argument("--seeds", type=int, default=None)
    verify.add_argument("--delta-max", type=int, default=None)
    verify.add_argument("--qmax", type=int, default=None)
    verify.add_argument("--grid", type=int, default=None)
    verify.add_argument("--mu-max", type=int, default=None)
    verify.add_argument("--nu-max", type=int, default=None)
    verify.add_argument("--n-max", type=int, default=None)
    verify.add_argument("--B-max", type=int, default=None)

    ladder = sub.add_parser("ladder", parents=[common], help="Amostra a imagem da escada em CSV.")
    ladder.add_argument("-B", type=str, default="1")
    ladder.add_argument("--delta", type=int, default=1)
    ladder.add_argument("-j", type=int, default=0)
    ladder.add_argument("-q", type=int, default=1)
    ladder.add_argument("--points", type=int, default=64)
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {
        k: v
        for k, v in vars(args).items()
        if k not in {"command", "output_format", "output_path", "pdf_path", "seed", "tol", "threads",
                     "log_level", "log_file"}
    }
    threads = args.threads if args.threads is not None else resolve_thread_count()
    if threads < 1:
        raise ValueError(f"--threads deve ser >= 1, recebido {threads}.")
    return RunConfig(
        subcommand=args.command,
        params=params,
        output_format=args.output_format,
        output_path=args.output_path,
        pdf_path=args.pdf_path,
        tolerance_overrides=_parse_tolerances(args.tol),
        seed=args.seed,
        threads=threads,
    )


# --------------------------------------------------------------------------------------------------
# Subcomandos
# --------------------------------------------------------------------------------------------------


def cmd_hrr(args, config: RunConfig, tolerances: Tolerances) -> dict:
    report = dimension_report(args.n, args.B, args.q, all_methods=args.all_methods, tolerances=tolerances)
    logger.info(f"Dimensão calculada: {report.as_dict()}")
    return build_artifact("hrr", config.to_params(), residuals=report.as_dict(), passed=report.consistent)


def _require(value, name: str, space: str):
    if value is None:
        raise ValueError(f"O espaço '{space}' exige o parâmetro {name}.")
    return value


def cmd_spectrum(args, config: RunConfig, tolerances: Tolerances) -> dict:
    residuals = {}
    if args.space == "abelian":
        delta = PolarizationData(tuple(_require(args.delta, "--delta", args.space)))
        n = args.n if args.n is not None else delta.n
        table = abelian_spectrum(n, as_fraction(args.B), delta, args.qmax, args.dual_k)
    elif args.space == "pn":
        table = pn_spectrum(_require(args.n, "-n", args.space), int(args.B), args.qmax, args.c)
    elif args.space == "pn-dual":
        n = _require(args.n, "-n", args.space)
        k_max = args.kmax if args.kmax is not None else int(args.B) + args.q + 1
        table = pn_dual_ladder(n, int(args.B), args.q, k_max, args.c)
        if as_fraction(args.c) == 2:
            residuals["zero_mode_levels"] = zero_mode_levels(Space.PROJECTIVE, n, int(args.B), k_max, args.c)
    else:
        mu = _require(args.mu, "--mu", args.space)
        nu = _require(args.nu, "--nu", args.space)
        table = grassmann_spectrum(mu, nu, int(args.B), args.c)
    return build_artifact(f"spectrum {args.space}", config.to_params(), table.rows, residuals, True)


def _verify_params(args) -> dict:
    params = {}
    for flag, (name, convert) in VERIFY_FLAGS[args.target].items():
        value = getattr(args, flag)
        if value is not None:
            params[name] = convert(value)
    return params


def cmd_verify(args, config: RunConfig, tolerances: Tolerances) -> dict:
    runner = VerificationRunner(tolerances=tolerances, threads=config.threads, seed=config.seed)

    def progress(fraction):
        logger.info(f"Verificando '{args.target}'... {int(fraction * 100)}%")

    suite = runner.run(args.target, _verify_params(args), progress_callback=progress)
    params = dict(config.to_params(), **{"suite": suite.params})
    return build_artifact(f"verify {args.target}", params, residuals={"checks": [c.as_dict() for c in suite.checks]},
                          passed=suite.passed)


def cmd_ladder(args, config: RunConfig, tolerances: Tolerances) -> dict:
    spec = ThetaSpec(args.B, args.delta, args.j)
    base = theta_basis(spec, tolerances=tolerances, seed=config.seed)
    image = ladder_up(base, args.q)
    exact = eigen_residual(image, args.q * base.B).is_zero
    samples = sample_grid(image, spec, args.points)
    return build_artifact(
        "ladder",
        config.to_params(),
        residuals={"eigen_residual_empty": exact, "M": base.meta.get("M"), "samples": samples},
        passed=exact,
    )


COMMANDS = {"hrr": cmd_hrr, "spectrum": cmd_spectrum, "verify": cmd_verify, "ladder": cmd_ladder}


def _render(args, config: RunConfig, artifact: dict) -> str:
    if args.command == "ladder":
        return ladder_samples_to_csv(artifact["residuals"]["samples"])
    return render(artifact, config.output_format)


def main(argv=None) -> int:
    """
    Ponto de entrada da linha de comando.

    Returns:
        int: 0 se tudo confere, 1 em falha de verificação, 2 em erro de uso.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        setup_logging(args.log_level.upper(), args.log_file or None)
    except ValueError as e:
        parser.print_usage(sys.stderr)
        logger.error(f"Nível de log inválido: {e}")
        return EXIT_USAGE
    logger.info(f"Comando recebido: {args.command}")

    config = None
    try:
        config = run_config_from_args(args)
        tolerances = Tolerances().with_overrides(config.tolerance_overrides)
        artifact = COMMANDS[args.command](args, config, tolerances)
    except VerificationError as e:
        logger.error(f"Verificação falhou: {e}", exc_info=True)
        artifact = build_artifact(
            args.command, config.to_params(), residuals={"error": str(e), "details": e.details}, passed=False
        )
        write_output(render(artifact, config.output_format), config.output_path)
        return EXIT_FAILED
    except ValueError as e:
        logger.error(f"Entrada inválida: {e}", exc_info=True)
        return EXIT_USAGE

    ok, error = write_output(_render(args, config, artifact), config.output_path)
    if not ok:
        logger.error(f"Não foi possível escrever a saída: {error}")
        return EXIT_USAGE

    if config.pdf_path:
        success, error = ReportGenerator(artifact).generate(config.pdf_path)
        if not success:
            logger.warning(f"PDF não gerado: {error}")

    return EXIT_OK if artifact["pass"] else EXIT_FAILED
