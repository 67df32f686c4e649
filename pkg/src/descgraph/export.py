"""DOT rendering of presentations (frontier vertices drawn as triangles)."""
from __future__ import annotations

import json

from .presentation import Presentation


def presentation_dot(p: Presentation, name: str = "presentation") -> str:
    lines = [f"digraph {json.dumps(name)} {{"]
    for v in sorted(p.vertices):
        shape = "triangle" if v in p.frontier else "circle"
        style = ", peripheries=2" if v in p.generators else ""
        lines.append(f"  {json.dumps(v)} [shape={shape}{style}];")
    lines += [f"  {json.dumps(a)} -> {json.dumps(b)};" for a, b in sorted(p.edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"
