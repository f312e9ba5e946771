"""Line-oriented text format for collections.

A collection directory holds ``template.txt`` and ``instances/NNNNN.txt``.

Template file::

    # comments and blank lines are ignored
    DIRECTED 0
    VSCHEMA <name> <type> <kind> [<value>]
    ESCHEMA <name> <type> <kind> [<value>]
    V <id>
    E <id> <src> <dst>

``<type>`` is one of boolean, integer, float, string; ``<kind>`` one of
normal, default, constant. ``<value>`` (required for default and constant)
is the rest of the line.

Instance file::

    INSTANCE <start> <end>
    VA <vertex-id> <attr> <value>
    EA <edge-id> <attr> <value>

Repeated ``VA``/``EA`` lines for the same element and attribute append values
in file order. Values run to the end of the line; backslash escapes ``\\n``
and ``\\\\`` allow newlines inside string values.

Ids are 64-bit integers. :func:`ingest` accepts arbitrary id tokens (for
example IPv4 addresses) and maps them to integers.
"""

from __future__ import annotations

import ipaddress
import os
from pathlib import Path

from .model import (
    EDGE,
    VERTEX,
    AttrColumn,
    AttributeSchema,
    AttrKind,
    Collection,
    GraphInstance,
    GraphTemplate,
    ValueType,
)

TEMPLATE_FILE = "template.txt"
INSTANCE_DIR = "instances"


class FormatError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            out.append("\n" if nxt == "n" else nxt)
        else:
            out.append(ch)
    return "".join(out)


def _schema_line(tag: str, attr: AttributeSchema) -> str:
    parts = [tag, attr.name, attr.value_type.value, attr.kind.value]
    if attr.kind is not AttrKind.NORMAL:
        parts.append(_escape(attr.value_type.format(attr.value)))
    return " ".join(parts)


def write_template(template: GraphTemplate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"DIRECTED {int(template.directed)}\n")
        for attr in template.vertex_schema:
            fh.write(_schema_line("VSCHEMA", attr) + "\n")
        for attr in template.edge_schema:
            fh.write(_schema_line("ESCHEMA", attr) + "\n")
        fh.writelines(f"V {v}\n" for v in template.vertex_ids.tolist())
        fh.writelines(f"E {e} {s} {d}\n" for e, s, d in template.edges())


def write_instance(template: GraphTemplate, instance: GraphInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"INSTANCE {instance.start} {instance.end}\n")
        for tag, element in (("VA", VERTEX), ("EA", EDGE)):
            for name, col in instance.columns(element).items():
                fmt = template.attribute(element, name).value_type.format
                lines = []
                for eid, vals in col.items():
                    for v in vals:
                        lines.append(f"{tag} {eid} {name} {_escape(fmt(v))}\n")
                fh.writelines(lines)


def write_collection(collection: Collection, directory) -> Path:
    directory = Path(directory)
    (directory / INSTANCE_DIR).mkdir(parents=True, exist_ok=True)
    write_template(collection.template, directory / TEMPLATE_FILE)
    for i, inst in enumerate(collection.instances):
        write_instance(collection.template, inst, directory / INSTANCE_DIR / f"{i:05d}.txt")
    return directory


def _parse_schema(tokens, rest, path, lineno) -> AttributeSchema:
    try:
        vtype = ValueType(tokens[2])
        kind = AttrKind(tokens[3])
    except (IndexError, ValueError):
        raise FormatError(path, lineno, "bad schema line") from None
    value = None
    if kind is not AttrKind.NORMAL:
        if rest is None:
            raise FormatError(path, lineno, f"{kind.value} attribute needs a value")
        value = vtype.parse(_unescape(rest))
    return AttributeSchema(tokens[1], vtype, kind, value)


def _split(line: str, n: int):
    """First ``n`` whitespace tokens plus the remainder of the line (or None)."""
    parts = line.split(None, n)
    if len(parts) <= n:
        return parts, None
    return parts[:n], parts[n]


def read_template(path, id_map=None) -> GraphTemplate:
    to_id = id_map if id_map is not None else int
    directed = False
    vschema, eschema, vertices, edges = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            tag = line.split(None, 1)[0]
            try:
                if tag == "V":
                    vertices.append(to_id(line.split()[1]))
                elif tag == "E":
                    _, e, s, d = line.split()
                    edges.append((to_id(e), to_id(s), to_id(d)))
                elif tag in ("VSCHEMA", "ESCHEMA"):
                    tokens, rest = _split(line, 4)
                    (vschema if tag == "VSCHEMA" else eschema).append(
                        _parse_schema(tokens, rest, path, lineno)
                    )
                elif tag == "DIRECTED":
                    directed = bool(int(line.split()[1]))
                else:
                    raise FormatError(path, lineno, f"unknown record {tag!r}")
            except (ValueError, IndexError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(path, lineno, str(exc)) from None
    return GraphTemplate.build(vertices, edges, directed, vschema, eschema)


def read_instance(template: GraphTemplate, path, id_map=None) -> GraphInstance:
    to_id = id_map if id_map is not None else int
    start = end = None
    acc = {VERTEX: {}, EDGE: {}}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            tokens, rest = _split(line, 3)
            tag = tokens[0]
            try:
                if tag == "INSTANCE":
                    start, end = int(tokens[1]), int(tokens[2])
                elif tag in ("VA", "EA"):
                    element = VERTEX if tag == "VA" else EDGE
                    name = tokens[2]
                    text = _unescape(rest if rest is not None else "")
                    if template.has_attribute(element, name):
                        value = template.attribute(element, name).value_type.parse(text)
                    else:
                        value = text
                    acc[element].setdefault(name, {}).setdefault(to_id(tokens[1]), []).append(value)
                else:
                    raise FormatError(path, lineno, f"unknown record {tag!r}")
            except (ValueError, IndexError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(path, lineno, str(exc)) from None
    if start is None:
        raise FormatError(path, 0, "missing INSTANCE header")
    cols = {}
    for element, per_attr in acc.items():
        cols[element] = {}
        for name, mapping in per_attr.items():
            vtype = (
                template.attribute(element, name).value_type
                if template.has_attribute(element, name)
                else ValueType.STRING
            )
            cols[element][name] = AttrColumn.from_mapping(mapping, vtype)
    return GraphInstance(start, end, cols[VERTEX], cols[EDGE])


def instance_files(directory) -> list[Path]:
    return sorted((Path(directory) / INSTANCE_DIR).glob("*.txt"))


def read_collection(directory, id_map=None) -> Collection:
    directory = Path(directory)
    template = read_template(directory / TEMPLATE_FILE, id_map)
    instances = [read_instance(template, p, id_map) for p in instance_files(directory)]
    instances.sort(key=lambda inst: inst.start)
    return Collection(template, instances)


class IdMapper:
    """Maps external id tokens to 64-bit integers.

    Integer tokens map to themselves, IPv4 addresses to their 32-bit value,
    anything else to a fresh id above 2**32 in first-seen order.
    """

    def __init__(self):
        self.mapping: dict[str, int] = {}
        self._next = 1 << 32

    def __call__(self, token: str) -> int:
        got = self.mapping.get(token)
        if got is not None:
            return got
        try:
            value = int(token)
        except ValueError:
            try:
                value = int(ipaddress.IPv4Address(token))
            except ValueError:
                value = self._next
                self._next += 1
        self.mapping[token] = value
        return value


def ingest(source_dir, out_dir) -> tuple[Collection, Path]:
    """Read a collection whose ids may be arbitrary tokens and write it back
    with integer ids, plus an ``idmap.tsv`` of ``token<TAB>id`` lines."""
    mapper = IdMapper()
    collection = read_collection(source_dir, mapper)
    out = write_collection(collection, out_dir)
    with open(Path(out) / "idmap.tsv", "w", encoding="utf-8") as fh:
        for token, value in sorted(mapper.mapping.items(), key=lambda kv: kv[1]):
            fh.write(f"{token}\t{value}\n")
    return collection, out


def default_root() -> Path | None:
    env = os.environ.get("TSGRAPH_ROOT")
    return Path(env) if env else None
