"""Time-series graph collections: a shared template plus time-ordered instances.

A template fixes the topology (vertex and edge ids) and the typed attribute
schema. Each instance holds the attribute values observed over one time window
``[start, end)``. Values are multi-valued: every element carries zero or more
values per attribute per instance.

Instance values are stored column-wise, one :class:`AttrColumn` per attribute,
so that a whole attribute can be moved to and from disk as a few arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import UnknownAttributeError

ID_ATTR = "id"
EXISTS_ATTR = "isExists"


class ValueType(enum.Enum):
    BOOLEAN = "boolean"
    INTEGER = "integer"
    FLOAT = "float"
    STRING = "string"

    @property
    def dtype(self):
        return _DTYPES[self]

    def parse(self, text: str):
        if self is ValueType.BOOLEAN:
            lowered = text.strip().lower()
            if lowered in ("1", "true", "t", "yes"):
                return True
            if lowered in ("0", "false", "f", "no"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if self is ValueType.INTEGER:
            return int(text)
        if self is ValueType.FLOAT:
            return float(text)
        return text

    def format(self, value) -> str:
        if self is ValueType.BOOLEAN:
            return "true" if value else "false"
        if self is ValueType.FLOAT:
            return repr(float(value))
        return str(value)

    def accepts(self, value) -> bool:
        if self is ValueType.BOOLEAN:
            return isinstance(value, (bool, np.bool_))
        if self is ValueType.INTEGER:
            return isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_))
        if self is ValueType.FLOAT:
            return isinstance(value, (float, int, np.floating, np.integer)) and not isinstance(
                value, (bool, np.bool_)
            )
        return isinstance(value, str)


_DTYPES = {
    ValueType.BOOLEAN: np.dtype(np.bool_),
    ValueType.INTEGER: np.dtype(np.int64),
    ValueType.FLOAT: np.dtype(np.float64),
    ValueType.STRING: np.dtype(object),
}


class AttrKind(enum.Enum):
    NORMAL = "normal"
    DEFAULT = "default"
    CONSTANT = "constant"


class ElementClass(enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"


VERTEX = ElementClass.VERTEX
EDGE = ElementClass.EDGE


@dataclass(frozen=True)
class AttributeSchema:
    """One typed attribute of the vertex or edge schema.

    ``value`` is the schema-level value for ``DEFAULT`` and ``CONSTANT`` kinds.
    It may be a scalar or a list; it is always resolved to a list.
    """

    name: str
    value_type: ValueType
    kind: AttrKind = AttrKind.NORMAL
    value: Any = None

    @property
    def schema_values(self) -> list:
        if self.kind is AttrKind.NORMAL or self.value is None:
            return []
        if isinstance(self.value, (list, tuple)):
            return list(self.value)
        return [self.value]


def _readonly(arr, dtype=None):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


class AttrColumn:
    """Sparse multi-valued column: ``values[ptr[i]:ptr[i+1]]`` belong to ``ids[i]``.

    ``ids`` is sorted and unique. Elements without a row have no entry, which
    is different from an entry holding an empty list.
    """

    __slots__ = ("ids", "ptr", "values")

    def __init__(self, ids, ptr, values):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.values = values if isinstance(values, np.ndarray) else np.asarray(values)
        if len(self.ptr) != len(self.ids) + 1:
            raise ValueError("ptr must have len(ids) + 1 entries")

    @classmethod
    def empty(cls, value_type: ValueType) -> "AttrColumn":
        return cls(np.empty(0, np.int64), np.zeros(1, np.int64), np.empty(0, value_type.dtype))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, Sequence], value_type: ValueType) -> "AttrColumn":
        ids = sorted(mapping)
        ptr = [0]
        flat: list = []
        for i in ids:
            vals = mapping[i]
            if not isinstance(vals, (list, tuple, np.ndarray)):
                vals = [vals]
            flat.extend(vals)
            ptr.append(len(flat))
        values = np.empty(len(flat), dtype=value_type.dtype)
        if flat:
            values[:] = flat
        return cls(np.array(ids, dtype=np.int64), np.array(ptr, dtype=np.int64), values)

    def __len__(self):
        return len(self.ids)

    def row(self, element_id) -> int:
        i = int(np.searchsorted(self.ids, element_id))
        if i < len(self.ids) and self.ids[i] == element_id:
            return i
        return -1

    def get(self, element_id):
        """Values recorded for ``element_id``, or ``None`` when it has no entry."""
        i = self.row(element_id)
        if i < 0:
            return None
        return self.values[self.ptr[i] : self.ptr[i + 1]].tolist()

    def items(self):
        for i, eid in enumerate(self.ids.tolist()):
            yield eid, self.values[self.ptr[i] : self.ptr[i + 1]].tolist()

    def to_dict(self) -> dict:
        return dict(self.items())

    def select(self, element_ids) -> "AttrColumn":
        """Rows for the given element ids (ids without an entry are skipped)."""
        wanted = np.asarray(element_ids, dtype=np.int64)
        mask = np.isin(self.ids, wanted)
        rows = np.flatnonzero(mask)
        return self.take_rows(rows)

    def take_rows(self, rows) -> "AttrColumn":
        rows = np.asarray(rows, dtype=np.int64)
        lengths = self.ptr[rows + 1] - self.ptr[rows]
        ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=ptr[1:])
        idx = (
            np.arange(ptr[-1], dtype=np.int64)
            - np.repeat(ptr[:-1], lengths)
            + np.repeat(self.ptr[rows], lengths)
        )
        return AttrColumn(self.ids[rows], ptr, self.values[idx])

    def __eq__(self, other):
        if not isinstance(other, AttrColumn):
            return NotImplemented
        return (
            np.array_equal(self.ids, other.ids)
            and np.array_equal(self.ptr, other.ptr)
            and self.values.tolist() == other.values.tolist()
        )

    def __repr__(self):
        return f"AttrColumn({len(self)} rows, {len(self.values)} values)"


@dataclass(frozen=True, eq=False)
class GraphTemplate:
    """Time-invariant topology and attribute schema shared by every instance."""

    vertex_ids: np.ndarray
    edge_ids: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    directed: bool = False
    vertex_schema: tuple = ()
    edge_schema: tuple = ()

    def __post_init__(self):
        for name in ("vertex_ids", "edge_ids", "edge_src", "edge_dst"):
            object.__setattr__(self, name, _readonly(getattr(self, name), np.int64))
        object.__setattr__(self, "vertex_schema", tuple(self.vertex_schema))
        object.__setattr__(self, "edge_schema", tuple(self.edge_schema))

    @classmethod
    def build(
        cls,
        vertices: Iterable[int],
        edges: Iterable[tuple[int, int, int]],
        directed: bool = False,
        vertex_schema: Sequence[AttributeSchema] = (),
        edge_schema: Sequence[AttributeSchema] = (),
    ) -> "GraphTemplate":
        edges = list(edges)
        arr = np.array(edges, dtype=np.int64).reshape(-1, 3)
        return cls(
            np.array(list(vertices), dtype=np.int64),
            arr[:, 0],
            arr[:, 1],
            arr[:, 2],
            directed,
            tuple(vertex_schema),
            tuple(edge_schema),
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    def schema(self, element: ElementClass) -> tuple:
        return self.vertex_schema if element is VERTEX else self.edge_schema

    @cached_property
    def _schema_maps(self):
        return {
            VERTEX: {a.name: a for a in self.vertex_schema},
            EDGE: {a.name: a for a in self.edge_schema},
        }

    def attribute(self, element: ElementClass, name: str) -> AttributeSchema:
        try:
            return self._schema_maps[element][name]
        except KeyError:
            raise UnknownAttributeError(name) from None

    def has_attribute(self, element: ElementClass, name: str) -> bool:
        return name in self._schema_maps[element]

    @cached_property
    def edge_endpoints(self) -> dict:
        return {
            e: (s, d)
            for e, s, d in zip(self.edge_ids.tolist(), self.edge_src.tolist(), self.edge_dst.tolist())
        }

    def edges(self):
        return zip(self.edge_ids.tolist(), self.edge_src.tolist(), self.edge_dst.tolist())


@dataclass(frozen=True, eq=False)
class GraphInstance:
    """Attribute values for one time window ``[start, end)``."""

    start: int
    end: int
    vertex_values: Mapping[str, AttrColumn] = field(default_factory=dict)
    edge_values: Mapping[str, AttrColumn] = field(default_factory=dict)

    @classmethod
    def from_values(
        cls,
        template: GraphTemplate,
        start: int,
        end: int,
        vertices: Mapping[int, Mapping[str, Sequence]] | None = None,
        edges: Mapping[int, Mapping[str, Sequence]] | None = None,
    ) -> "GraphInstance":
        """Build an instance from ``{element_id: {attr: [values]}}`` mappings."""
        columns = {}
        for element, mapping in ((VERTEX, vertices or {}), (EDGE, edges or {})):
            per_attr: dict[str, dict] = {}
            for eid, attrs in mapping.items():
                for name, vals in attrs.items():
                    per_attr.setdefault(name, {})[eid] = vals
            cols = {}
            for name, m in per_attr.items():
                if template.has_attribute(element, name):
                    vtype = template.attribute(element, name).value_type
                else:
                    vtype = _infer_type(m)
                cols[name] = AttrColumn.from_mapping(m, vtype)
            columns[element] = cols
        return cls(start, end, columns[VERTEX], columns[EDGE])

    def columns(self, element: ElementClass) -> Mapping[str, AttrColumn]:
        return self.vertex_values if element is VERTEX else self.edge_values


def _infer_type(mapping) -> ValueType:
    for vals in mapping.values():
        seq = vals if isinstance(vals, (list, tuple)) else [vals]
        for v in seq:
            for vt in (ValueType.BOOLEAN, ValueType.INTEGER, ValueType.FLOAT, ValueType.STRING):
                if vt.accepts(v):
                    return vt
    return ValueType.STRING


@dataclass(frozen=True, eq=False)
class Collection:
    template: GraphTemplate
    instances: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))

    def __len__(self):
        return len(self.instances)

    def resolve(self, index: int, element_id: int, name: str, element: ElementClass = VERTEX) -> list:
        return resolve_attribute(self.template, self.instances[index], element_id, name, element)

    def is_exists(self, index: int, element_id: int, element: ElementClass = VERTEX) -> bool:
        return is_exists(self.template, self.instances[index], element_id, element)


@dataclass(frozen=True)
class Violation:
    reason: str
    element: Any = None

    def __str__(self):
        return self.reason if self.element is None else f"{self.reason} {self.element}"


def resolve_values(attr: AttributeSchema, column: AttrColumn | None, element_id: int) -> list:
    """Inheritance rule shared by whole instances and subgraph instances."""
    if attr.kind is AttrKind.CONSTANT:
        return attr.schema_values
    if column is not None:
        vals = column.get(element_id)
        if vals is not None:
            return vals
    return attr.schema_values


def resolve_attribute(
    template: GraphTemplate,
    instance: GraphInstance,
    element_id: int,
    attr_name: str,
    element: ElementClass = VERTEX,
) -> list:
    """Values of ``attr_name`` on one element, with default/constant inheritance.

    Constant attributes always return the schema value. Otherwise the
    instance entry wins when present; failing that the schema default (if
    any) is returned, else an empty list.
    """
    attr = template.attribute(element, attr_name)
    return resolve_values(attr, instance.columns(element).get(attr_name), element_id)


def is_exists(
    template: GraphTemplate, instance: GraphInstance, element_id: int, element: ElementClass = VERTEX
) -> bool:
    """Existence of an element in one instance.

    Without an ``isExists`` attribute in the schema every element exists. An
    element with several recorded flags exists only if all are true, and an
    empty list counts as existing. Edges additionally require both endpoints
    to exist.
    """
    if element is EDGE:
        if not _flag(template, instance, element_id, EDGE):
            return False
        src, dst = template.edge_endpoints[element_id]
        return _flag(template, instance, src, VERTEX) and _flag(template, instance, dst, VERTEX)
    return _flag(template, instance, element_id, VERTEX)


def _flag(template, instance, element_id, element) -> bool:
    if not template.has_attribute(element, EXISTS_ATTR):
        return True
    return all(bool(v) for v in resolve_attribute(template, instance, element_id, EXISTS_ATTR, element))


def validate(collection: Collection) -> list[Violation]:
    """Every schema, topology and ordering violation in ``collection``."""
    out: list[Violation] = []
    tpl = collection.template

    vids = tpl.vertex_ids
    uniq_v, counts_v = np.unique(vids, return_counts=True)
    for v in uniq_v[counts_v > 1].tolist():
        out.append(Violation("duplicate vertex id", v))
    uniq_e, counts_e = np.unique(tpl.edge_ids, return_counts=True)
    for e in uniq_e[counts_e > 1].tolist():
        out.append(Violation("duplicate edge id", f"e{e}"))
    vset = set(uniq_v.tolist())
    for e, s, d in tpl.edges():
        if s not in vset or d not in vset:
            out.append(Violation("dangling endpoint", f"e{e}"))

    for element in (VERTEX, EDGE):
        seen = set()
        for attr in tpl.schema(element):
            if attr.name == ID_ATTR:
                out.append(Violation("reserved attribute name", f"{element.value}.{attr.name}"))
            if attr.name in seen:
                out.append(Violation("duplicate attribute name", f"{element.value}.{attr.name}"))
            seen.add(attr.name)
            for v in attr.schema_values:
                if not attr.value_type.accepts(v):
                    out.append(Violation("schema value type mismatch", f"{element.value}.{attr.name}"))
                    break

    element_ids = {VERTEX: uniq_v, EDGE: uniq_e}
    prev_end = None
    for idx, inst in enumerate(collection.instances):
        where = f"instance {idx}"
        if not inst.start < inst.end:
            out.append(Violation("empty time range", where))
        if prev_end is not None and inst.start < prev_end:
            out.append(Violation("overlapping or unordered instance", where))
        prev_end = inst.end
        for element in (VERTEX, EDGE):
            for name, col in inst.columns(element).items():
                label = f"{where} {element.value}.{name}"
                if not tpl.has_attribute(element, name):
                    out.append(Violation("unknown attribute", label))
                    continue
                attr = tpl.attribute(element, name)
                if attr.kind is AttrKind.CONSTANT and len(col):
                    out.append(Violation("constant override", label))
                if len(col.ids) and (np.any(np.diff(col.ids) <= 0)):
                    out.append(Violation("unsorted column ids", label))
                missing = np.setdiff1d(col.ids, element_ids[element])
                for m in missing.tolist():
                    out.append(Violation("unknown element", f"{label} id {m}"))
                if not _column_type_ok(col, attr.value_type):
                    out.append(Violation("value type mismatch", label))
    return out


def _column_type_ok(col: AttrColumn, vtype: ValueType) -> bool:
    vals = col.values
    if vtype is ValueType.STRING:
        return all(isinstance(v, str) for v in vals.tolist())
    if vtype is ValueType.BOOLEAN:
        return vals.dtype == np.bool_ or len(vals) == 0
    if vtype is ValueType.INTEGER:
        return np.issubdtype(vals.dtype, np.integer) or len(vals) == 0
    return np.issubdtype(vals.dtype, np.floating) or np.issubdtype(vals.dtype, np.integer) or len(vals) == 0
