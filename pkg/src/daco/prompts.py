"""Prompt templates: packaged defaults, optional per-file overrides, placeholder fill.

Placeholders are literal {UPPERCASE} markers. Substitution is plain string
replacement over the known keys, so stray braces in the template text (for
example JSON examples) survive untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

_TEMPLATE_FILES = {
    "planning": "planning.txt",
    "replan": "replan.txt",
    "action": "action.txt",
    "action_fallback": "action_fallback.txt",
    "locate": "locate.txt",
    "target": "target.txt",
}


@dataclass(frozen=True)
class PromptTemplates:
    planning: str
    replan: str
    action: str
    action_fallback: str
    locate: str
    target: str

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptTemplates":
        """Load templates, preferring files in `directory` over packaged defaults."""
        values = {}
        for name in (f.name for f in fields(cls)):
            filename = _TEMPLATE_FILES[name]
            override = Path(directory) / filename if directory is not None else None
            if override is not None and override.is_file():
                values[name] = override.read_text()
            else:
                values[name] = (
                    resources.files("daco.templates").joinpath(filename).read_text()
                )
        return cls(**values)


def render(template: str, **values: str) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template
