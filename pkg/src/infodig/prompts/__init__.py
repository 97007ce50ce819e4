"""Editable prompt templates; loaded by name, overridable via explicit paths."""

from importlib import resources
from pathlib import Path


def load_prompt(name: str) -> str:
    """Read a bundled template; `name` may also be a path to a custom file."""
    candidate = Path(name)
    if candidate.suffix == ".txt" and candidate.exists():
        return candidate.read_text(encoding="utf-8")
    return resources.files("infodig").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")
