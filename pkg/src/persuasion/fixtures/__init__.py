"""Canonical instances shipped with the package.

Each JSON file is an ordinary instance file with two extra keys: an
``expected`` block of reference results and a ``provenance`` note saying
where those numbers come from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from ..instance import Instance, parse_instance


@dataclass(frozen=True)
class Fixture:
    name: str
    instance: Instance
    expected: dict
    provenance: str
    data: dict = field(repr=False)


def list_fixtures() -> list[str]:
    root = resources.files(__name__)
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def fixture_path(name: str):
    """Filesystem path of a fixture file."""
    if name not in list_fixtures():
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(list_fixtures())}")
    return resources.files(__name__) / f"{name}.json"


def load_fixture(name: str) -> Fixture:
    data = json.loads(fixture_path(name).read_text(encoding="utf-8"))
    return Fixture(name, parse_instance(data), data.get("expected", {}), data.get("provenance", ""), data)
