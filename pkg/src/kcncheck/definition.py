"""Line-oriented chart definition files.

Example::

    manifold flat-c2
    dim 4
    coords x1 y1 x2 y2
    domain 1 -1 1
    exclude "x1^2 + y1^2"
    g 1 1 = "1"
    J 2 1 = "1"
    theta 1 2 = "x1"

Indices are 1-based. ``g`` lines need ``i <= j`` and ``theta`` lines ``i < j``;
the missing halves are filled in by symmetry / antisymmetry. Unlisted
components are zero, except that every diagonal ``g`` entry is required.

A file may hold several candidates: a ``candidate <label>`` line starts a new
one and the ``theta`` / ``A`` lines that follow belong to it. Without such a
line there is a single candidate labelled ``main``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .expr import ExprError, Expression, constant, default_coords, parse
from .structures import KahlerChart, StructureCandidate

MAX_DIM = 16
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")
_COMPONENT = re.compile(r'(g|J|theta|A)\s+(\S+)\s+(\S+)\s*=\s*"([^"]*)"\s*\Z')
_EXCLUDE = re.compile(r'exclude\s+"([^"]*)"\s*\Z')


class DefinitionError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class CandidateDefinition:
    label: str
    theta: tuple = ()  # ((i, j), Expression) with i < j, 0-based
    A: tuple = ()      # ((i, j), Expression), 0-based


@dataclass(frozen=True)
class ChartDefinition:
    name: str
    dim: int
    coords: tuple
    domain: tuple
    exclusion: Optional[Expression]
    g: tuple            # ((i, j), Expression) with i <= j, 0-based
    J: tuple            # ((i, j), Expression), 0-based
    candidates: tuple   # CandidateDefinition

    def chart(self) -> KahlerChart:
        n = self.dim
        zero = constant(0.0, self.coords)
        g = [[zero] * n for _ in range(n)]
        for (i, j), e in self.g:
            g[i][j] = e
            g[j][i] = e
        J = [[zero] * n for _ in range(n)]
        for (i, j), e in self.J:
            J[i][j] = e
        return KahlerChart(self.name, self.coords, g, J, self.domain, self.exclusion)

    def structure_candidates(self) -> list:
        n = self.dim
        zero = constant(0.0, self.coords)
        out = []
        for c in self.candidates:
            theta = A = None
            if c.theta:
                theta = [[zero] * n for _ in range(n)]
                for (i, j), e in c.theta:
                    theta[i][j] = e
                    theta[j][i] = _negate(e)
            if c.A:
                A = [[zero] * n for _ in range(n)]
                for (i, j), e in c.A:
                    A[i][j] = e
            out.append(StructureCandidate(c.label, theta, A))
        return out

    def candidate(self, label: str) -> StructureCandidate:
        for c in self.structure_candidates():
            if c.label == label:
                return c
        raise KeyError(f"no candidate {label!r} in {self.name}")

    def serialize(self) -> str:
        lines = [f"manifold {self.name}", f"dim {self.dim}", "coords " + " ".join(self.coords)]
        for k, (lo, hi) in enumerate(self.domain):
            lines.append(f"domain {k + 1} {lo!r} {hi!r}")
        if self.exclusion is not None:
            lines.append(f'exclude "{self.exclusion.serialize()}"')
        lines += _component_lines("g", self.g)
        lines += _component_lines("J", self.J)
        single = len(self.candidates) == 1 and self.candidates[0].label == "main"
        for c in self.candidates:
            if not single:
                lines.append(f"candidate {c.label}")
            lines += _component_lines("theta", c.theta)
            lines += _component_lines("A", c.A)
        return "\n".join(lines) + "\n"


def _negate(e: Expression) -> Expression:
    from .expr import Const, Neg

    if isinstance(e.root, Const) and e.root.value == 0.0:
        return e
    if isinstance(e.root, Neg):
        return Expression(e.root.arg, e.coords)
    return Expression(Neg(e.root), e.coords)


def _component_lines(kind: str, comps) -> list:
    return [f'{kind} {i + 1} {j + 1} = "{e.serialize()}"' for (i, j), e in comps]


def _int(tok: str, what: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DefinitionError(f"{what} must be an integer, got {tok!r}", line) from None


def _float(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise DefinitionError(f"expected a number, got {tok!r}", line) from None


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def loads(text: str) -> ChartDefinition:
    """Parse definition text (LF or CRLF line endings)."""
    name = None
    dim = None
    coords = None
    domains = {}
    exclusion = None
    comps = []          # (line, kind, i, j, source, candidate label)
    labels = []
    current = None
    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        head = line.split(None, 1)[0]
        if head == "manifold":
            parts = line.split()
            if len(parts) != 2:
                raise DefinitionError("expected 'manifold <name>'", lineno)
            name = parts[1]
        elif head == "dim":
            parts = line.split()
            if len(parts) != 2:
                raise DefinitionError("expected 'dim <n>'", lineno)
            dim = _int(parts[1], "dim", lineno)
            if dim % 2:
                raise DefinitionError("dimension must be even", lineno)
            if not 2 <= dim <= MAX_DIM:
                raise DefinitionError(f"dimension must be between 2 and {MAX_DIM}", lineno)
        elif head == "coords":
            coords = tuple(line.split()[1:])
            for c in coords:
                if not _IDENT.match(c):
                    raise DefinitionError(f"bad coordinate name {c!r}", lineno)
            if len(set(coords)) != len(coords):
                raise DefinitionError("duplicate coordinate names", lineno)
        elif head == "domain":
            parts = line.split()
            if len(parts) != 4:
                raise DefinitionError("expected 'domain <i> <lo> <hi>'", lineno)
            k = _int(parts[1], "domain index", lineno)
            lo, hi = _float(parts[2], lineno), _float(parts[3], lineno)
            if not lo < hi:
                raise DefinitionError("domain needs lo < hi", lineno)
            domains[k] = (lineno, lo, hi)
        elif head == "exclude":
            m = _EXCLUDE.match(line)
            if m is None:
                raise DefinitionError('expected exclude "<expr>"', lineno)
            exclusion = (lineno, m.group(1))
        elif head == "candidate":
            parts = line.split()
            if len(parts) != 2 or not _IDENT.match(parts[1].replace("-", "_")):
                raise DefinitionError("expected 'candidate <label>'", lineno)
            if parts[1] in labels:
                raise DefinitionError(f"duplicate candidate {parts[1]!r}", lineno)
            current = parts[1]
            labels.append(current)
        elif head in ("g", "J", "theta", "A"):
            m = _COMPONENT.match(line)
            if m is None:
                raise DefinitionError(f'expected \'{head} <i> <j> = "<expr>"\'', lineno)
            kind, si, sj, src = m.groups()
            i, j = _int(si, "index", lineno), _int(sj, "index", lineno)
            if kind in ("theta", "A") and current is None:
                current = "main"
                labels.append(current)
            comps.append((lineno, kind, i, j, src, current))
        else:
            raise DefinitionError(f"unknown directive {head!r}", lineno)

    if dim is None:
        raise DefinitionError("missing 'dim' line")
    if coords is None:
        coords = default_coords(dim)
    if len(coords) != dim:
        raise DefinitionError(f"expected {dim} coordinate names, got {len(coords)}")
    name = name or "unnamed"

    domain = [(-1.0, 1.0)] * dim
    for k, (lineno, lo, hi) in domains.items():
        if not 1 <= k <= dim:
            raise DefinitionError(f"domain index {k} out of range 1..{dim}", lineno)
        domain[k - 1] = (lo, hi)

    def expr(src, lineno):
        try:
            return parse(src, coords)
        except ExprError as exc:
            raise DefinitionError(f"expression error: {exc}", lineno) from None

    excl = None if exclusion is None else expr(exclusion[1], exclusion[0])

    g, J = {}, {}
    per_cand = {label: ({}, {}) for label in labels}
    for lineno, kind, i, j, src, label in comps:
        if not (1 <= i <= dim and 1 <= j <= dim):
            raise DefinitionError(f"{kind} index out of range 1..{dim}", lineno)
        key = (i - 1, j - 1)
        if kind == "g" and i > j:
            raise DefinitionError("g indices must satisfy i <= j", lineno)
        if kind == "theta" and i >= j:
            raise DefinitionError("theta indices must satisfy i < j", lineno)
        target = {"g": g, "J": J}.get(kind)
        if target is None:
            target = per_cand[label][0 if kind == "theta" else 1]
        if key in target:
            raise DefinitionError(f"duplicate {kind} component {i} {j}", lineno)
        target[key] = expr(src, lineno)
    for k in range(dim):
        if (k, k) not in g:
            raise DefinitionError(f"missing diagonal metric component g {k + 1} {k + 1}")
    candidates = tuple(
        CandidateDefinition(label, tuple(sorted(th.items())), tuple(sorted(a.items())))
        for label, (th, a) in per_cand.items())
    if not candidates:
        raise DefinitionError("no candidate: give theta or A components")
    for c in candidates:
        if not c.theta and not c.A:
            raise DefinitionError(f"candidate {c.label!r} has no components")
    return ChartDefinition(name, dim, coords, tuple(domain), excl,
                           tuple(sorted(g.items())), tuple(sorted(J.items())), candidates)


def load_definition(source: Union[str, Path]) -> ChartDefinition:
    """Load from a path, or from definition text when given a multi-line string."""
    if isinstance(source, Path) or ("\n" not in str(source) and Path(source).exists()):
        return loads(Path(source).read_text(encoding="utf-8"))
    return loads(str(source))


def dump_definition(defn: ChartDefinition, path: Union[str, Path]) -> None:
    Path(path).write_text(defn.serialize(), encoding="utf-8")
