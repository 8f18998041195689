"""Versioned JSON schemas for every document the CLI writes."""
import json
from functools import lru_cache
from importlib import resources

import jsonschema

SchemaError = jsonschema.ValidationError
NAMES = ("result", "sweep_index", "checkpoint")


@lru_cache(maxsize=None)
def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(name)
    text = resources.files("ddae").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: dict, name: str) -> None:
    """Raise ``SchemaError`` if ``doc`` does not match schema ``name``."""
    jsonschema.validate(doc, load(name))
