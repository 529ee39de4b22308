"""Catalog ingestion, derived metrics, normalization, PCA and synthetic expansion."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

CATEGORIES = ("haircare", "skincare", "cosmetics")
INSPECTIONS = ("pass", "fail", "pending")

CATALOG_COLUMNS = (
    "sku_id",
    "category",
    "price",
    "manufacturing_cost",
    "shipping_cost",
    "other_cost",
    "units_sold",
    "production_volume",
    "inventory_level",
    "lead_time",
    "defect_rate",
    "inspection",
)

_INT_COLUMNS = ("units_sold", "production_volume", "inventory_level", "lead_time")
_FLOAT_COLUMNS = ("price", "manufacturing_cost", "shipping_cost", "other_cost", "defect_rate")

LEAD_TIME_RANGE = (1, 30)
DEFECT_RATE_RANGE = (0.0002, 0.0494)


class SchemaError(ValueError):
    """The catalog header does not match the expected columns."""


class RowError(ValueError):
    """A data row could not be parsed."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SkuRecord:
    sku_id: str
    category: str
    price: float
    manufacturing_cost: float
    shipping_cost: float
    other_cost: float
    units_sold: int
    production_volume: int
    inventory_level: int
    lead_time: int
    defect_rate: float
    inspection: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.inspection not in INSPECTIONS:
            raise ValueError(f"unknown inspection result {self.inspection!r}")
        if self.price < 0:
            raise ValueError(f"{self.sku_id}: negative price")
        if self.units_sold < 0:
            raise ValueError(f"{self.sku_id}: negative units_sold")
        if self.production_volume <= 0:
            raise ValueError(f"{self.sku_id}: production_volume must be positive")
        if not 0.0 <= self.defect_rate <= 1.0:
            raise ValueError(f"{self.sku_id}: defect_rate outside [0, 1]")


@dataclass(frozen=True)
class SkuFeatures:
    sku_id: str
    total_cost: float
    unit_margin: float
    demand: float
    utilization: float
    overload: int
    inventory_risk: float
    lead_time: float
    lead_time_risk: int
    defect_risk: float
    unified_risk: float
    norm_total_cost: float
    norm_unit_margin: float
    norm_demand: float
    norm_utilization: float
    norm_inventory_risk: float
    norm_lead_time: float
    norm_defect_risk: float


FEATURE_COLUMNS = tuple(f.name for f in fields(SkuFeatures))


class IngestResult(NamedTuple):
    records: list[SkuRecord]
    dropped: int


def _parse_row(row: dict[str, str], line: int) -> SkuRecord | None:
    if any(row[c] is None or row[c].strip() == "" for c in CATALOG_COLUMNS):
        return None
    values: dict[str, object] = {
        "sku_id": row["sku_id"].strip(),
        "category": row["category"].strip().lower(),
        "inspection": row["inspection"].strip().lower(),
    }
    for col in _FLOAT_COLUMNS + _INT_COLUMNS:
        cell = row[col].strip()
        try:
            number = float(cell)
        except ValueError:
            raise RowError(line, f"column {col!r} is not numeric: {cell!r}") from None
        if not math.isfinite(number):
            raise RowError(line, f"column {col!r} is not finite: {cell!r}")
        if col in _INT_COLUMNS:
            if number != int(number):
                raise RowError(line, f"column {col!r} must be an integer: {cell!r}")
            number = int(number)
        values[col] = number
    try:
        return SkuRecord(**values)
    except ValueError as exc:
        raise RowError(line, str(exc)) from None


def ingest_catalog(path: str | Path) -> IngestResult:
    """Read a catalog CSV.

    Rows with any empty required cell are dropped and counted; a malformed
    header raises :class:`SchemaError` and an unparsable cell raises
    :class:`RowError` carrying the 1-based file line number.
    """
    path = Path(path)
    records: list[SkuRecord] = []
    dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        reader = csv.DictReader(lines)
        header = tuple(h.strip() for h in (reader.fieldnames or ()))
        if header != CATALOG_COLUMNS:
            raise SchemaError(f"expected header {','.join(CATALOG_COLUMNS)}, got {','.join(header)}")
        for row in reader:
            line = reader.line_num
            if None in row:
                raise RowError(line, "too many cells")
            record = _parse_row(row, line)
            if record is None:
                dropped += 1
                continue
            records.append(record)
    if dropped:
        logger.info("dropped %d catalog rows with missing fields", dropped)
    return IngestResult(records, dropped)


def write_catalog(records: Sequence[SkuRecord], path: str | Path, header_lines: Sequence[str] = ()) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CATALOG_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, c)) for c in CATALOG_COLUMNS])


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def minmax_normalize(column: Sequence[float]) -> np.ndarray:
    """Scale to [0, 1]; a constant column maps to all zeros."""
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise ValueError("cannot normalize an empty column")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def zscore_normalize(column: Sequence[float]) -> np.ndarray:
    """Standard score with the population standard deviation; zero variance maps to zeros."""
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise ValueError("cannot normalize an empty column")
    sd = x.std()
    if sd == 0.0:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def engineer_features(records: Sequence[SkuRecord]) -> list[SkuFeatures]:
    """Derive cost, margin, utilization and risk metrics for a batch of SKUs.

    Rows with ``units_sold == 0`` are excluded because inventory risk divides
    by quantity sold. The lead-time flag compares against the 75th percentile
    of the lead times in this batch.
    """
    if not records:
        raise ValueError("engineer_features needs at least one record")
    kept = [r for r in records if r.units_sold > 0]
    if len(kept) < len(records):
        excluded = [r.sku_id for r in records if r.units_sold == 0]
        logger.warning("excluding %d SKUs with zero units sold: %s", len(excluded), excluded)
    if not kept:
        raise ValueError("every record has zero units sold")

    total_cost = np.array([r.manufacturing_cost + r.shipping_cost + r.other_cost for r in kept])
    price = np.array([r.price for r in kept])
    sold = np.array([r.units_sold for r in kept], dtype=float)
    produced = np.array([r.production_volume for r in kept], dtype=float)
    inventory = np.array([r.inventory_level for r in kept], dtype=float)
    lead = np.array([r.lead_time for r in kept], dtype=float)

    unit_margin = price - total_cost
    utilization = sold / produced
    overload = (sold > produced).astype(int)
    inventory_risk = (inventory - sold) / sold
    lead_p75 = np.percentile(lead, 75)
    lead_risk = (lead > lead_p75).astype(int)
    defect_risk = np.array([r.defect_rate if r.inspection == "fail" else 0.0 for r in kept])

    norm_inv = minmax_normalize(inventory_risk)
    norm_def = minmax_normalize(defect_risk)
    unified = minmax_normalize((norm_inv + norm_def + lead_risk) / 3.0)

    columns = {
        "total_cost": total_cost,
        "unit_margin": unit_margin,
        "demand": sold,
        "utilization": utilization,
        "overload": overload,
        "inventory_risk": inventory_risk,
        "lead_time": lead,
        "lead_time_risk": lead_risk,
        "defect_risk": defect_risk,
        "unified_risk": unified,
        "norm_total_cost": minmax_normalize(total_cost),
        "norm_unit_margin": minmax_normalize(unit_margin),
        "norm_demand": minmax_normalize(sold),
        "norm_utilization": minmax_normalize(utilization),
        "norm_inventory_risk": norm_inv,
        "norm_lead_time": minmax_normalize(lead),
        "norm_defect_risk": norm_def,
    }
    out = []
    for k, rec in enumerate(kept):
        row = {name: col[k].item() for name, col in columns.items()}
        row["overload"] = int(row["overload"])
        row["lead_time_risk"] = int(row["lead_time_risk"])
        out.append(SkuFeatures(sku_id=rec.sku_id, **row))
    return out


def write_features(features: Sequence[SkuFeatures], path: str | Path, header_lines: Sequence[str] = ()) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_COLUMNS)
        for feat in features:
            d = asdict(feat)
            writer.writerow([_fmt(d[c]) for c in FEATURE_COLUMNS])


def read_features(path: str | Path) -> list[SkuFeatures]:
    types = {f.name: f.type for f in fields(SkuFeatures)}
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        if tuple(reader.fieldnames or ()) != FEATURE_COLUMNS:
            raise SchemaError("features file header does not match SkuFeatures")
        for row in reader:
            vals = {}
            for name, cell in row.items():
                kind = types[name]
                vals[name] = cell if kind == "str" else int(cell) if kind == "int" else float(cell)
            out.append(SkuFeatures(**vals))
    return out


# PCA inputs: margin/cost ratio, total cost, inventory risk, utilization, lead time.
PCA_INPUT_NAMES = ("unit_cost_ratio", "total_cost", "inventory_risk", "utilization", "lead_time")


def unit_cost_ratio(feat: SkuFeatures, definition: str = "margin_over_cost") -> float:
    if definition == "margin_over_cost":
        num = feat.unit_margin
    elif definition == "price_over_cost":
        num = feat.unit_margin + feat.total_cost
    else:
        raise ValueError(f"unknown unit-cost ratio definition {definition!r}")
    return num / feat.total_cost if feat.total_cost != 0 else 0.0


def pca_input_matrix(features: Sequence[SkuFeatures], ratio: str = "margin_over_cost") -> np.ndarray:
    """Z-scored N x 5 matrix of the kernel input columns."""
    raw = np.array(
        [
            [unit_cost_ratio(f, ratio), f.total_cost, f.inventory_risk, f.utilization, f.lead_time]
            for f in features
        ],
        dtype=float,
    )
    return np.column_stack([zscore_normalize(raw[:, k]) for k in range(raw.shape[1])])


@dataclass(frozen=True)
class EmbeddingMatrix:
    values: np.ndarray
    explained_variance: np.ndarray
    components: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


def pca_reduce(features: np.ndarray, dims: int = 5) -> EmbeddingMatrix:
    """Project centered data onto the top ``dims`` covariance eigenvectors.

    Population covariance; eigenpairs sorted by decreasing eigenvalue; each
    eigenvector is signed so its largest-magnitude entry is positive.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n, p = x.shape
    if dims < 1 or dims > p:
        raise ValueError(f"dims={dims} must lie in [1, {p}]")
    if n < dims:
        raise ValueError(f"need at least {dims} rows, got {n}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / n
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval, kind="stable")[::-1][:dims]
    eigval = np.clip(eigval[order], 0.0, None)
    eigvec = eigvec[:, order]
    pivots = np.argmax(np.abs(eigvec), axis=0)
    signs = np.sign(eigvec[pivots, np.arange(dims)])
    signs[signs == 0] = 1.0
    eigvec = eigvec * signs
    return EmbeddingMatrix(values=centered @ eigvec, explained_variance=eigval, components=eigvec.T)


def write_embedding(emb: EmbeddingMatrix | np.ndarray, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    values = emb.values if isinstance(emb, EmbeddingMatrix) else np.asarray(emb)
    with Path(path).open("w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for row in values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_embedding(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


@dataclass(frozen=True)
class SynthesisSpec:
    target_count: int = 500
    category_mix: tuple[tuple[str, float], ...] = (("skincare", 0.38), ("haircare", 0.32), ("cosmetics", 0.30))
    seed: int = 0
    jitter_sigma: float = 0.1

    def __post_init__(self):
        total = sum(w for _, w in self.category_mix)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"category_mix sums to {total}, expected 1")
        for name, w in self.category_mix:
            if name not in CATEGORIES or w < 0:
                raise ValueError(f"bad category weight {name}={w}")
        if self.target_count < 1:
            raise ValueError("target_count must be positive")


def _apportion(total: int, weights: Sequence[float]) -> list[int]:
    # largest remainder
    raw = [total * w for w in weights]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in order[: total - sum(counts)]:
        counts[k] += 1
    return counts


def generate_base_catalog(n: int = 100, seed: int = 0) -> list[SkuRecord]:
    """A stand-in for the 100-SKU source catalog, drawn to its published ranges.

    Category shares follow 38/32/30 (skincare/haircare/cosmetics), lead times
    span 1-30 days, stock 1-100 units and defect rates 0.02%-4.94%.
    """
    rng = np.random.default_rng(seed)
    spec = SynthesisSpec(target_count=n)
    cats: list[str] = []
    for (name, _), count in zip(spec.category_mix, _apportion(n, [w for _, w in spec.category_mix])):
        cats.extend([name] * count)
    cats = [cats[k] for k in rng.permutation(n)]
    price_scale = {"skincare": 1.0, "haircare": 0.8, "cosmetics": 1.2}
    records = []
    for k, cat in enumerate(cats):
        price = float(round(rng.uniform(5.0, 100.0) * price_scale[cat], 2))
        records.append(
            SkuRecord(
                sku_id=f"SKU{k}",
                category=cat,
                price=price,
                manufacturing_cost=float(round(price * rng.uniform(0.2, 0.6), 2)),
                shipping_cost=float(round(rng.uniform(1.0, 10.0), 2)),
                other_cost=float(round(rng.uniform(0.5, 5.0), 2)),
                units_sold=int(rng.integers(8, 997)),
                production_volume=int(rng.integers(104, 986)),
                inventory_level=int(rng.integers(1, 101)),
                lead_time=int(rng.integers(LEAD_TIME_RANGE[0], LEAD_TIME_RANGE[1] + 1)),
                defect_rate=float(rng.uniform(*DEFECT_RATE_RANGE)),
                inspection=str(rng.choice(INSPECTIONS, p=[0.23, 0.36, 0.41])),
            )
        )
    return records


def synthesize_catalog(base: Sequence[SkuRecord], spec: SynthesisSpec) -> list[SkuRecord]:
    """Expand ``base`` to ``spec.target_count`` rows.

    Base rows are kept verbatim. New rows resample a base row of the same
    category and apply independent log-normal jitter to every numeric column;
    each new row draws from its own stream keyed by ``(seed, row)``. Category
    totals follow ``spec.category_mix``.
    """
    if not base:
        raise ValueError("base catalog is empty")
    if spec.target_count < len(base):
        raise ValueError(f"target_count {spec.target_count} is below the base size {len(base)}")

    names = [name for name, _ in spec.category_mix]
    targets = _apportion(spec.target_count, [w for _, w in spec.category_mix])
    have = {name: sum(r.category == name for r in base) for name in names}
    need = {name: max(0, t - have[name]) for name, t in zip(names, targets)}
    # base categories over their target push the remainder onto the others
    shortfall = spec.target_count - len(base) - sum(need.values())
    while shortfall < 0:
        name = max(need, key=lambda c: (need[c], -names.index(c)))
        need[name] -= 1
        shortfall += 1
    while shortfall > 0:
        name = min(names, key=lambda c: (have[c] + need[c]) / spec.target_count - dict(spec.category_mix)[c])
        need[name] += 1
        shortfall -= 1

    by_cat = {name: [r for r in base if r.category == name] for name in names}
    used = {r.sku_id for r in base}
    plan = [name for name in names for _ in range(need[name])]
    order_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xC47]))
    plan = [plan[k] for k in order_rng.permutation(len(plan))]

    out = list(base)
    next_id = len(base)
    for row, cat in enumerate(plan):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, row]))
        pool = by_cat[cat] or list(base)
        src = pool[int(rng.integers(len(pool)))]
        jitter = np.exp(rng.normal(0.0, spec.jitter_sigma, size=9)).tolist()
        while f"SKU{next_id}" in used:
            next_id += 1
        sku_id = f"SKU{next_id}"
        used.add(sku_id)
        next_id += 1
        out.append(
            replace(
                src,
                sku_id=sku_id,
                category=cat,
                price=round(src.price * jitter[0], 2),
                manufacturing_cost=round(src.manufacturing_cost * jitter[1], 2),
                shipping_cost=round(src.shipping_cost * jitter[2], 2),
                other_cost=round(src.other_cost * jitter[3], 2),
                units_sold=max(1, round(src.units_sold * jitter[4])),
                production_volume=max(1, round(src.production_volume * jitter[5])),
                inventory_level=max(0, round(src.inventory_level * jitter[6])),
                lead_time=int(np.clip(round(src.lead_time * jitter[7]), *LEAD_TIME_RANGE)),
                defect_rate=float(np.clip(src.defect_rate * jitter[8], *DEFECT_RATE_RANGE)),
            )
        )
    return out
