"""
Family Configuration

Registry of the catalog metric families: the parameters each one takes,
defaults for the optional ones and a short description. The CLI and the
RunConfig validators read this registry; the constructors live in the
catalog service.
"""

import json
import os
from typing import Any, Dict, List

from app.services import BianchiError

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "family_schema.json")


class UnknownFamilyError(BianchiError):
    """Raised when a family name is not in the registry."""
    pass


def _load_registry() -> Dict[str, Dict[str, Any]]:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as handle:
        document = json.load(handle)
    registry = {}
    for name, entry in document["families"].items():
        registry[name] = {
            "bianchi_class": entry["bianchi_class"],
            "description": entry["description"],
            "required": list(entry.get("required", [])),
            "optional": dict(entry.get("optional", {})),
            "aliases": list(entry.get("aliases", [])),
            "checks": list(entry.get("checks", [])),
        }
    return registry


# Family registry
FAMILIES: Dict[str, Dict[str, Any]] = _load_registry()


def family_names() -> List[str]:
    """
    Get the registered family names.

    Returns:
        List[str]: sorted family names
    """
    return sorted(FAMILIES)


def family_entry(name: str) -> Dict[str, Any]:
    """
    Look up a family.

    Args:
        name (str): family name

    Returns:
        Dict[str, Any]: registry entry

    Raises:
        UnknownFamilyError: if the family is not registered
    """
    if name not in FAMILIES:
        raise UnknownFamilyError(f"unknown family '{name}', expected one of {family_names()}")
    return FAMILIES[name]


def default_checks(name: str) -> List[str]:
    """Checks that make sense for a family when none are requested."""
    return list(family_entry(name)["checks"])
