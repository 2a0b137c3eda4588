"""Evaluate missing-data methods: amputate, impute or weight, pool, score."""

import csv
import io
import json

from . import _core
from ._core import (
    MievalError,
    em_mvn,
    little_mcar_test as _little_mcar_test,
    recommend_m,
    relative_efficiency,
    rubin_pool,
    wilcoxon_signed_rank,
)

__version__ = _core.version()

__all__ = [
    "MievalError",
    "Table",
    "ampute",
    "em_mvn",
    "impute",
    "little_mcar_test",
    "recommend_m",
    "relative_efficiency",
    "rubin_pool",
    "run_experiment",
    "synth",
    "wilcoxon_signed_rank",
]


class Table:
    """A CSV table with its column schema. Missing cells read as None."""

    def __init__(self, csv_text, schema):
        self.csv = csv_text
        self.schema = schema

    @property
    def columns(self):
        rows = list(csv.reader(io.StringIO(self.csv)))
        header, body = rows[0], rows[1:]
        return {name: [r[k] if r[k] != "" else None for r in body] for k, name in enumerate(header)}

    def __len__(self):
        return self.csv.count("\n") - 1


def synth(dataset=None):
    """Generate a cohort. `dataset` is a preset dict or a full cohort spec."""
    text, schema, truth = _core.synth(json.dumps(dataset or {"preset": "default"}))
    return Table(text, json.loads(schema)), json.loads(truth)


def ampute(table, plan, a=1):
    text, realized = _core.ampute(table.csv, json.dumps(table.schema), json.dumps(plan), a)
    return Table(text, table.schema), realized


def impute(table, method, m=5, seed=1):
    sets = _core.impute(table.csv, json.dumps(table.schema), json.dumps(method), m, seed)
    return [Table(text, json.loads(schema)) for text, schema in sets]


def little_mcar_test(Y):
    return json.loads(_little_mcar_test(Y))


def run_experiment(config, base_dir=""):
    """Run a full experiment; artifacts go to config["out_dir"]."""
    return json.loads(_core.run_experiment(json.dumps(config), base_dir))
