"""Seeded fictitious record stores backing the simulated sites.

Three kinds mirror the simulated scenarios: flight booking, shopping
records, and statistics lookup.  Everything derives deterministically from
the seed, and :func:`oracle` answers query templates by exhaustive
evaluation over all rows - it is the ground truth the engine is judged
against.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ProtocolError

DB_KINDS = ("flights", "shopping", "statistics")

CITIES = ["Arlano", "Bexley", "Corvan", "Delmare", "Esterby", "Farwick"]
AIRLINES = ["AeroLume", "CloudArc", "NimbusAir", "SwiftJet"]
USERS = ["alice", "bruno", "chen", "divya", "elif", "farid"]
ITEMS = ["backpack", "desk lamp", "keyboard", "monitor", "notebook", "thermos"]
REGIONS = ["Central Plain", "East Shore", "North Valley", "South Basin", "West Ridge"]
METRICS = ["power_usage_gwh", "rainfall_mm", "retail_index", "tourist_visits"]
PERIODS = [f"{year}-Q{q}" for year in (2023, 2024) for q in (1, 2, 3, 4)]
DATES = [f"2025-03-{day:02d}" for day in range(1, 15)]


@dataclass(frozen=True)
class SimDatabase:
    kind: str
    seed: int
    records: tuple[dict, ...]

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "seed": self.seed, "records": list(self.records)},
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SimDatabase":
        obj = json.loads(text)
        return cls(kind=obj["kind"], seed=obj["seed"], records=tuple(obj["records"]))

    def save(self, path: Path):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "SimDatabase":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_db(kind: str, seed: int, size: int) -> SimDatabase:
    """Deterministic database: same (kind, seed, size) always yields the
    same rows."""
    if kind not in DB_KINDS:
        raise ProtocolError(f"unknown database kind: {kind!r}")
    if size < 1:
        raise ProtocolError("size must be >= 1")
    rng = random.Random(f"{kind}:{seed}")
    rows: list[dict] = []
    if kind == "flights":
        for i in range(size):
            origin = rng.choice(CITIES)
            destination = rng.choice([c for c in CITIES if c != origin])
            rows.append(
                {
                    "flight_no": f"SF{100 + i}",
                    "airline": rng.choice(AIRLINES),
                    "origin": origin,
                    "destination": destination,
                    "date": rng.choice(DATES),
                    "depart_time": f"{rng.randrange(5, 23):02d}:{rng.choice(['00', '15', '30', '45'])}",
                    "fare": round(rng.uniform(80, 980), 2),
                }
            )
    elif kind == "shopping":
        for i in range(size):
            quantity = rng.randrange(1, 6)
            rows.append(
                {
                    "order_id": f"ORD{1000 + i}",
                    "user": rng.choice(USERS),
                    "item": rng.choice(ITEMS),
                    "date": rng.choice(DATES),
                    "price": round(rng.uniform(5, 400), 2),
                    "quantity": quantity,
                }
            )
    else:  # statistics
        combos = [(r, m, p) for r in REGIONS for m in METRICS for p in PERIODS]
        rng.shuffle(combos)
        if size > len(combos):
            raise ProtocolError(f"statistics db supports at most {len(combos)} rows")
        for region, metric, period in combos[:size]:
            rows.append(
                {
                    "region": region,
                    "metric": metric,
                    "period": period,
                    "value": round(rng.uniform(10, 500), 1),
                    # shown only inside downloadable reports, never in HTML
                    "audited_value": round(rng.uniform(10, 500), 1),
                }
            )
        rows.sort(key=lambda r: (r["region"], r["metric"], r["period"]))
    return SimDatabase(kind=kind, seed=seed, records=tuple(rows))


@dataclass(frozen=True)
class QueryTemplate:
    """A database query with named params; ``oracle`` evaluates it and QA
    generation turns it into a question."""

    kind: str  # db kind
    name: str
    params: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {"kind": self.kind, "name": self.name, "params": dict(self.params)}

    @classmethod
    def from_obj(cls, obj: dict) -> "QueryTemplate":
        return cls(kind=obj["kind"], name=obj["name"], params=obj.get("params", {}))


def _matches(row: dict, params: dict) -> bool:
    return all(str(row.get(k)) == str(v) for k, v in params.items())


def _fmt(value) -> str:
    if isinstance(value, float):
        text = f"{value:.2f}".rstrip("0").rstrip(".")
        return text if text else "0"
    return str(value)


def oracle(db: SimDatabase, template: QueryTemplate, params: dict = None) -> str:
    """Exhaustively evaluate a template over all records.

    Raises when the template matches nothing it needs or when a lookup is
    not unique - simulated questions must have exactly one answer.
    """
    if params:
        template = QueryTemplate(kind=template.kind, name=template.name, params={**template.params, **params})
    if template.kind != db.kind:
        raise ProtocolError(f"template kind {template.kind!r} does not fit a {db.kind!r} db")
    name, p = template.name, template.params
    rows = [r for r in db.records if _matches(r, {k: v for k, v in p.items() if not k.startswith("_")})]

    def require_rows():
        if not rows:
            raise ProtocolError(f"template {name!r} with {p} matches no rows")

    if name == "count":
        return str(len(rows))
    if name in ("min_fare", "max_fare"):
        require_rows()
        agg = min if name == "min_fare" else max
        return _fmt(agg(r["fare"] for r in rows))
    if name in ("min_price", "max_price"):
        require_rows()
        agg = min if name == "min_price" else max
        return _fmt(agg(r["price"] for r in rows))
    if name in ("lookup_fare", "lookup_price", "lookup_value", "lookup_quantity", "lookup_audited"):
        require_rows()
        key = {
            "lookup_fare": "fare",
            "lookup_price": "price",
            "lookup_value": "value",
            "lookup_quantity": "quantity",
            "lookup_audited": "audited_value",
        }[name]
        values = {_fmt(r[key]) for r in rows}
        if len(values) != 1:
            raise ProtocolError(f"template {name!r} with {p} selects {len(values)} distinct values")
        return values.pop()
    if name == "diff_value":
        # value at period _p2 minus value at period _p1, same region+metric
        base = {k: v for k, v in p.items() if not k.startswith("_")}
        first = [r for r in db.records if _matches(r, {**base, "period": p["_p1"]})]
        second = [r for r in db.records if _matches(r, {**base, "period": p["_p2"]})]
        if len(first) != 1 or len(second) != 1:
            raise ProtocolError(f"diff_value needs exactly one row per period, got {len(first)}/{len(second)}")
        return _fmt(round(second[0]["value"] - first[0]["value"], 1))
    raise ProtocolError(f"unknown query template: {name!r}")


def format_value(value) -> str:
    return _fmt(value)
