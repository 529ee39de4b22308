"""Command-line entry point.

Subcommands run single stages (``generate``, ``features``, ``kernel``,
``build``, ``solve``, ``audit``) or chain them (``pipeline``, ``ablate``).
Every setting lives in :class:`RunConfig`; a ``key = value`` config file is
read first and command-line flags override it. The fully resolved config is
written into each artifact as ``# key = value`` header lines (or a
``config`` object in JSON), so stripping the ``# `` prefix from those lines
gives a config file that regenerates the artifact.

Exit codes:
    0  success
    1  unexpected internal error
    2  bad arguments or config
    3  data stage (catalog, features)
    4  kernel stage (PCA, similarity)
    5  build stage (QUBO)
    6  solve stage
    7  audit stage
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import types
import typing
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from skuqubo.ablation import SAMPLERS, VARIANTS, run_ablation, write_cells_json, write_summary_csv
from skuqubo.audit_kpi import compute_kpis, write_kpi_json, write_utilization_csv
from skuqubo.data_pipeline import (
    SynthesisSpec,
    engineer_features,
    generate_base_catalog,
    ingest_catalog,
    pca_input_matrix,
    pca_reduce,
    read_features,
    synthesize_catalog,
    write_catalog,
    write_embedding,
    write_features,
)
from skuqubo.qubo_builder import (
    AllocationPlan,
    ProblemInstance,
    Weights,
    build_qubo,
    decode,
    instance_from_features,
    read_qubo,
    write_qubo,
)
from skuqubo.quantum_kernel import read_similarity_csv, similarity_matrix, write_similarity_csv
from skuqubo.scenarios import sample_records
from skuqubo.solvers import (
    AnnealConfig,
    MetaheuristicConfig,
    solve_aco,
    solve_exhaustive,
    solve_ga,
    solve_pso,
    solve_sa,
    solve_sqa,
)

logger = logging.getLogger("skuqubo")

EXIT_OK, EXIT_INTERNAL, EXIT_ARGS, EXIT_DATA, EXIT_KERNEL, EXIT_BUILD, EXIT_SOLVE, EXIT_AUDIT = range(8)

SIMILARITY_METHODS = {"quantum": "quantum_fidelity", "cosine": "cosine"}
ANNEALERS = {"sa": solve_sa, "sqa": solve_sqa}
METAHEURISTICS = {"pso": solve_pso, "ga": solve_ga, "aco": solve_aco}
SOLVERS = (*ANNEALERS, *METAHEURISTICS, "exact")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    # data
    catalog: str = ""  # input catalog; empty -> <out_dir>/catalog.csv
    base_skus: int = 100
    skus: int = 500
    jitter_sigma: float = 0.1
    sample: int = 0  # SKUs drawn from the catalog for the instance; 0 keeps all
    # kernel
    similarity: str = "quantum"
    use_pca: bool = True
    pca_dims: int = 5
    angle_scale: float = 1.0
    ratio: str = "margin_over_cost"
    # instance
    periods: int = 8
    slack_bits: int = 13
    capacity: float = 28392.0
    sku_target: int = 50
    w_margin: float = 0.02
    w_similarity: float = 1.0
    w_risk: float = 0.02
    w_inventory: float = 50.0
    w_defect: float = 50.0
    w_capacity: float = 5000.0
    w_cardinality: float = 1000.0
    w_sku_limit: float = 5000.0
    w_top5: float | None = None  # none -> 1e9 * max |U D|
    # solver
    solver: str = "sa"
    reads: int = 500
    sweeps: int | None = None
    beta_start: float | None = None
    beta_end: float | None = None
    trotter_slices: int = 8
    pop_size: int = 50
    iterations: int = 100
    # ablation
    variants: str = ""  # comma-separated; empty -> all
    repeats: int = 5

    def __post_init__(self):
        if self.similarity not in SIMILARITY_METHODS:
            raise ValueError(f"similarity must be one of {sorted(SIMILARITY_METHODS)}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {list(SOLVERS)}")
        if (self.beta_start is None) != (self.beta_end is None):
            raise ValueError("beta_start and beta_end must be given together")
        if self.base_skus < 1 or self.skus < 1 or self.sample < 0 or self.reads < 1:
            raise ValueError("base_skus, skus and reads must be positive; sample non-negative")
        unknown = [v for v in self.variant_list if v not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; choose from {list(VARIANTS)}")
        _ = self.weights  # Weights validates itself

    @property
    def variant_list(self) -> list[str]:
        return [v.strip() for v in self.variants.split(",") if v.strip()] or list(VARIANTS)

    @property
    def weights(self) -> Weights:
        return Weights(
            margin=self.w_margin, similarity=self.w_similarity, risk=self.w_risk,
            inventory=self.w_inventory, defect=self.w_defect, capacity=self.w_capacity,
            cardinality=self.w_cardinality, sku_limit=self.w_sku_limit, top5=self.w_top5,
        )

    @property
    def anneal(self) -> AnnealConfig:
        beta = None if self.beta_start is None else (self.beta_start, self.beta_end)
        return AnnealConfig(
            num_reads=self.reads, num_sweeps=self.sweeps, beta_range=beta,
            trotter_slices=self.trotter_slices, seed=self.seed,
        )

    @property
    def metaheuristic(self) -> MetaheuristicConfig:
        return MetaheuristicConfig(pop_size=self.pop_size, iterations=self.iterations, seed=self.seed)

    def path(self, name: str) -> Path:
        return Path(self.out_dir) / name

    @property
    def catalog_path(self) -> Path:
        return Path(self.catalog) if self.catalog else self.path("catalog.csv")

    @property
    def similarity_path(self) -> Path:
        return self.path(f"similarity_{self.similarity}.csv")

    def header(self, command: str) -> list[str]:
        return [f"skuqubo {command}"] + [f"{k} = {_render(v)}" for k, v in self.as_json().items()]

    def as_json(self) -> dict:
        # out_dir is left out so reruns into different directories compare byte-for-byte
        return {k: v for k, v in sorted(asdict(self).items()) if k != "out_dir"}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, code: int, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {cause}")
        self.code = code


@contextmanager
def stage(code: int, name: str):
    try:
        yield
    except (StageError, ConfigError):
        raise
    except Exception as exc:
        logger.debug("%s stage traceback", name, exc_info=True)
        raise StageError(code, name, exc) from exc


# -- config parsing ----------------------------------------------------------

_FIELD_TYPES = typing.get_type_hints(RunConfig)


def _base_type(tp):
    args = typing.get_args(tp)
    if typing.get_origin(tp) in (typing.Union, types.UnionType):
        return next(a for a in args if a is not type(None)), True
    return tp, False


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    tp, optional = _base_type(_FIELD_TYPES[key])
    text = raw.strip()
    if optional and text.lower() in ("none", "auto", ""):
        return None
    try:
        if tp is bool:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        return tp(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        values[key] = _coerce(key, raw)
    return values


def resolve_config(config_path: str | None, overrides: dict) -> RunConfig:
    values = {}
    if config_path:
        try:
            values = parse_config_text(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    values.update({k: _coerce(k, v) for k, v in overrides.items()})
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- run-length bit encoding -------------------------------------------------

def encode_rle(bits) -> str:
    """``[0,0,1]`` -> ``"0*2,1*1"``."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size == 0:
        return ""
    edges = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate([[0], edges])
    lengths = np.diff(np.concatenate([starts, [bits.size]]))
    return ",".join(f"{bits[s]}*{n}" for s, n in zip(starts, lengths))


def decode_rle(text: str) -> np.ndarray:
    if not text:
        return np.zeros(0, dtype=np.int8)
    parts = []
    for run in text.split(","):
        bit, _, count = run.partition("*")
        if bit not in ("0", "1") or not count.isdigit():
            raise ValueError(f"bad run {run!r}")
        parts.append(np.full(int(count), int(bit), dtype=np.int8))
    return np.concatenate(parts)


# -- stages ------------------------------------------------------------------

def _out_dir(cfg: RunConfig) -> None:
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)


def run_generate(cfg: RunConfig) -> Path:
    if cfg.skus < cfg.base_skus:
        raise ConfigError(f"--skus {cfg.skus} is below the {cfg.base_skus}-row base catalog")
    with stage(EXIT_DATA, "data"):
        base = generate_base_catalog(cfg.base_skus, seed=cfg.seed)
        spec = SynthesisSpec(target_count=cfg.skus, seed=cfg.seed, jitter_sigma=cfg.jitter_sigma)
        records = synthesize_catalog(base, spec)
        out = cfg.path("catalog.csv")
        write_catalog(records, out, cfg.header("generate"))
    return out


def run_features(cfg: RunConfig) -> Path:
    with stage(EXIT_DATA, "data"):
        records = ingest_catalog(cfg.catalog_path).records
        if cfg.sample:
            records = sample_records(records, cfg.sample, cfg.seed)
        feats = engineer_features(records)
        out = cfg.path("features.csv")
        write_features(feats, out, cfg.header("features"))
    return out


def run_kernel(cfg: RunConfig) -> Path:
    with stage(EXIT_DATA, "data"):
        feats = read_features(cfg.path("features.csv"))
    with stage(EXIT_KERNEL, "kernel"):
        z = pca_input_matrix(feats, cfg.ratio)
        x = z
        if cfg.use_pca:
            emb = pca_reduce(z, cfg.pca_dims)
            write_embedding(emb, cfg.path("embedding.csv"), cfg.header("kernel"))
            x = emb.values
        sim = similarity_matrix(x, method=SIMILARITY_METHODS[cfg.similarity], angle_scale=cfg.angle_scale)
        write_similarity_csv(sim, cfg.similarity_path, cfg.header("kernel"))
    return cfg.similarity_path


def _instance(cfg: RunConfig, similarity: np.ndarray | None = None) -> ProblemInstance:
    with stage(EXIT_DATA, "data"):
        feats = read_features(cfg.path("features.csv"))
    with stage(EXIT_KERNEL, "kernel"):
        sim = read_similarity_csv(cfg.similarity_path) if similarity is None else similarity
    with stage(EXIT_BUILD, "build"):
        return instance_from_features(
            feats, sim, periods=cfg.periods, slack_bits=cfg.slack_bits, capacity=cfg.capacity,
            sku_target=cfg.sku_target, weights=cfg.weights,
        )


def run_build(cfg: RunConfig) -> Path:
    inst = _instance(cfg)
    with stage(EXIT_BUILD, "build"):
        model = build_qubo(inst)
        out = cfg.path("qubo.txt")
        write_qubo(model, out, inst.periods, inst.n_skus, inst.slack_bits, cfg.header("build"))
    logger.info("QUBO: %d variables, %d terms", model.n_vars, len(model))
    return out


def run_solve(cfg: RunConfig) -> Path:
    payload = {"solver": cfg.solver, "seed": cfg.seed, "config": cfg.as_json()}
    if cfg.solver in METAHEURISTICS:
        inst = _instance(cfg)
        with stage(EXIT_SOLVE, "solve"):
            res = METAHEURISTICS[cfg.solver](inst, cfg.metaheuristic)
        payload |= {
            "layout": "decisions",
            "best_energy_or_fitness": res.fitness,
            "best_bits": encode_rle(res.bits),
            "per_read_energies": [res.fitness],
            "fitness_history": list(res.history),
        }
    else:
        with stage(EXIT_BUILD, "build"):
            model, _ = read_qubo(cfg.path("qubo.txt"))
        with stage(EXIT_SOLVE, "solve"):
            if cfg.solver == "exact":
                res = solve_exhaustive(model)
                best = res.bits(model.n_vars)[0]
                payload |= {
                    "best_energy_or_fitness": res.energy,
                    "best_bits": encode_rle(best),
                    "per_read_energies": [res.energy],
                    "optimal_states": len(res.states),
                }
            else:
                samples = ANNEALERS[cfg.solver](model, cfg.anneal)
                payload |= {
                    "best_energy_or_fitness": samples.best_energy,
                    "best_bits": encode_rle(samples.best_bits),
                    "per_read_energies": samples.energies.tolist(),
                }
        payload["layout"] = "qubo"
    out = cfg.path("solution.json")
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def _plan(bits: np.ndarray, inst: ProblemInstance) -> AllocationPlan:
    if bits.size == inst.periods * inst.n_skus and bits.size != inst.n_vars:
        return AllocationPlan.from_matrix(bits.reshape(inst.periods, inst.n_skus))
    return decode(bits, inst)


def run_audit(cfg: RunConfig) -> tuple[Path, Path]:
    inst = _instance(cfg)
    with stage(EXIT_DATA, "data"):
        feats = read_features(cfg.path("features.csv"))
    with stage(EXIT_AUDIT, "audit"):
        solution = json.loads(cfg.path("solution.json").read_text(encoding="utf-8"))
        plan = _plan(decode_rle(solution["best_bits"]), inst)
        report = compute_kpis(plan, inst, [f.norm_total_cost for f in feats])
        kpi, util = cfg.path("kpi.json"), cfg.path("utilization.csv")
        write_kpi_json(report, kpi, {"config": cfg.as_json(), "solver": solution["solver"],
                                     "top5": inst.top5.tolist()})
        write_utilization_csv(report, util, cfg.header("audit"))
    logger.info("violations=%d profit=%.2f", report.capacity_violations, report.net_profit)
    return kpi, util


def run_pipeline(cfg: RunConfig) -> list[Path]:
    written = []
    if not cfg.catalog:
        written.append(run_generate(cfg))
    written += [run_features(cfg), run_kernel(cfg), run_build(cfg), run_solve(cfg)]
    written += run_audit(cfg)
    return written


def run_ablate(cfg: RunConfig) -> tuple[Path, Path]:
    if cfg.solver not in SAMPLERS:
        raise ConfigError(f"ablation needs an annealing solver ({sorted(SAMPLERS)}), got {cfg.solver}")
    if not cfg.catalog:
        run_generate(cfg)
    run_features(cfg)
    run_kernel(cfg)
    inst = _instance(cfg)
    with stage(EXIT_DATA, "data"):
        feats = read_features(cfg.path("features.csv"))
    no_pca = None
    if "NoPCA" in cfg.variant_list:
        with stage(EXIT_KERNEL, "kernel"):
            z = pca_input_matrix(feats, cfg.ratio)
            no_pca = similarity_matrix(z, SIMILARITY_METHODS[cfg.similarity], cfg.angle_scale).values
    with stage(EXIT_SOLVE, "solve"):
        summary = run_ablation(
            inst, [f.norm_total_cost for f in feats], variants=cfg.variant_list, repeats=cfg.repeats,
            base_seed=cfg.seed, sampler=cfg.solver, anneal=cfg.anneal, no_pca_similarity=no_pca,
        )
    failed = [c for c in summary.cells if c.error]
    if failed:
        logger.warning("%d ablation cells failed; see ablation_cells.json", len(failed))
    csv_path, json_path = cfg.path("ablation_summary.csv"), cfg.path("ablation_cells.json")
    write_summary_csv(summary, csv_path, cfg.header("ablate"))
    write_cells_json(summary, json_path, {"config": cfg.as_json()})
    return csv_path, json_path


COMMANDS = {
    "generate": (run_generate, "synthesize a catalog CSV"),
    "features": (run_features, "engineer features from a catalog"),
    "kernel": (run_kernel, "PCA embedding and similarity matrix"),
    "build": (run_build, "assemble the QUBO file"),
    "solve": (run_solve, "solve the QUBO (sa, sqa, exact) or the instance (pso, ga, aco)"),
    "audit": (run_audit, "KPIs and utilization for a solution"),
    "pipeline": (run_pipeline, "generate -> features -> kernel -> build -> solve -> audit"),
    "ablate": (run_ablate, "term-removal ablation summary"),
}


# -- argument parsing --------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=argparse.SUPPRESS, help="key = value config file")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    for f in fields(RunConfig):
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar=f.name.upper(),
                            default=argparse.SUPPRESS, help=f"(default: {_render(f.default)})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skuqubo", description="Multi-period SKU allocation as a QUBO.",
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog="exit codes: 0 ok, 1 internal, 2 arguments, 3 data, 4 kernel, "
                                            "5 build, 6 solve, 7 audit")
    _add_config_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        _add_config_flags(sub.add_parser(name, help=help_text))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ns = vars(args)
    logging.basicConfig(level=logging.INFO if ns.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k[4:]: v for k, v in ns.items() if k.startswith("cfg_")}
    try:
        cfg = resolve_config(ns.get("config"), overrides)
        _out_dir(cfg)
        COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        print(f"skuqubo: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except StageError as exc:
        print(f"skuqubo: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # pragma: no cover - last-resort guard
        logger.exception("internal error")
        print(f"skuqubo: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
