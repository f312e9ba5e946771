"""Binary slice files.

Every slice file is::

    offset  size  field
    0       4     magic  b"GSLC"
    4       2     format version (u16)
    6       1     kind: 0 template, 1 metadata, 2 attribute
    7       1     element class: 0 none, 1 vertex, 2 edge
    8       4     partition id (i32)
    12      4     bin id (i32, -1 when not applicable)
    16      4     window index (i32, -1 when not applicable)
    20      8     covered time start (i64)
    28      8     covered time end (i64)
    36      2     attribute name length n (u16)
    38      n     attribute name, utf-8
    38+n    8     payload length p (u64)
    46+n    p     payload
    46+n+p  4     crc32 of every preceding byte (u32)

All integers are little-endian. Payload layouts live next to their encoders
below; the attribute payload is the hot path and is decoded with
``numpy.frombuffer`` straight from the file bytes.
"""

from __future__ import annotations

import enum
import json
import struct
import zlib
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import ChecksumError, SliceFormatError, VersionError
from ..model import AttrColumn, AttributeSchema, AttrKind, ValueType

MAGIC = b"GSLC"
VERSION = 1
_HEAD = struct.Struct("<4sHBBiiiqqH")
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


class SliceKind(enum.IntEnum):
    TEMPLATE = 0
    METADATA = 1
    ATTRIBUTE = 2


_ELEMENT_CODES = {None: 0, "vertex": 1, "edge": 2}
_ELEMENT_NAMES = {v: k for k, v in _ELEMENT_CODES.items()}


@dataclass(frozen=True, eq=False)
class Slice:
    kind: SliceKind
    partition_id: int
    payload: bytes
    bin_id: int = -1
    window: int = -1
    element: str | None = None
    attr: str = ""
    t_start: int = 0
    t_end: int = 0
    slice_id: str = ""
    content: object = field(default=None, compare=False)

    def header(self) -> tuple:
        return (
            self.kind,
            self.partition_id,
            self.bin_id,
            self.window,
            self.element,
            self.attr,
            self.t_start,
            self.t_end,
        )

    def __eq__(self, other):
        if not isinstance(other, Slice):
            return NotImplemented
        return self.header() == other.header() and self.payload == other.payload


def encode_slice(s: Slice) -> bytes:
    name = s.attr.encode("utf-8")
    head = _HEAD.pack(
        MAGIC,
        VERSION,
        int(s.kind),
        _ELEMENT_CODES[s.element],
        s.partition_id,
        s.bin_id,
        s.window,
        s.t_start,
        s.t_end,
        len(name),
    )
    body = b"".join([head, name, _U64.pack(len(s.payload)), s.payload])
    return body + _U32.pack(zlib.crc32(body))


def decode_slice(data: bytes, slice_id: str = "") -> Slice:
    if len(data) < _HEAD.size + 12:
        raise ChecksumError(f"slice {slice_id!r} truncated")
    body, (crc,) = data[:-4], _U32.unpack(data[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError(f"slice {slice_id!r} checksum mismatch")
    magic, version, kind, element, pid, bin_id, window, t0, t1, nlen = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise SliceFormatError(f"slice {slice_id!r} has bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"slice {slice_id!r} has format version {version}, expected {VERSION}")
    pos = _HEAD.size
    name = body[pos : pos + nlen].decode("utf-8")
    pos += nlen
    (plen,) = _U64.unpack_from(body, pos)
    pos += 8
    payload = body[pos : pos + plen]
    if len(payload) != plen or pos + plen != len(body):
        raise SliceFormatError(f"slice {slice_id!r} payload length mismatch")
    return Slice(SliceKind(kind), pid, payload, bin_id, window, _ELEMENT_NAMES[element], name, t0, t1, slice_id)


def write_slice(s: Slice, path) -> int:
    data = encode_slice(s)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def read_slice(path, slice_id: str = "") -> Slice:
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_slice(data, slice_id or str(path))


# -- payload helpers ---------------------------------------------------------


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u32(self, x):
        self.parts.append(_U32.pack(x))

    def i64(self, x):
        self.parts.append(struct.pack("<q", x))

    def array(self, arr, dtype):
        arr = np.ascontiguousarray(arr, dtype=dtype)
        self.u32(len(arr))
        self.parts.append(arr.tobytes())

    def blob(self, data: bytes):
        self.parts.append(_U64.pack(len(data)))
        self.parts.append(data)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def u32(self):
        (x,) = _U32.unpack_from(self.data, self.pos)
        self.pos += 4
        return x

    def i64(self):
        (x,) = struct.unpack_from("<q", self.data, self.pos)
        self.pos += 8
        return x

    def array(self, dtype):
        n = self.u32()
        dtype = np.dtype(dtype)
        out = np.frombuffer(self.data, dtype=dtype, count=n, offset=self.pos)
        self.pos += n * dtype.itemsize
        return out

    def blob(self) -> bytes:
        (n,) = _U64.unpack_from(self.data, self.pos)
        self.pos += 8
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


# -- template payload --------------------------------------------------------
#
# blob   JSON header {"directed", "vertex_schema", "edge_schema"}
# u32    number of bins; per bin: i64 bin id, u32 subgraph count, then per
#        subgraph: i64 subgraph id, array vertices, arrays local edge
#        id/src/dst, array of remote-edge records (REMOTE_DTYPE)

REMOTE_DTYPE = np.dtype(
    [("eid", "<i8"), ("local", "<i8"), ("remote", "<i8"), ("forward", "u1"), ("sg", "<i8"), ("pid", "<i4")]
)


def schema_to_json(schema) -> list:
    out = []
    for a in schema:
        value = a.value
        if isinstance(value, np.generic):
            value = value.item()
        out.append({"name": a.name, "type": a.value_type.value, "kind": a.kind.value, "value": value})
    return out


def schema_from_json(items) -> tuple:
    return tuple(
        AttributeSchema(i["name"], ValueType(i["type"]), AttrKind(i["kind"]), i["value"]) for i in items
    )


def encode_template(directed, vertex_schema, edge_schema, bins) -> bytes:
    """``bins`` is a list of ``(bin_id, [SubgraphTemplate, ...])``."""
    w = _Writer()
    header = {
        "directed": bool(directed),
        "vertex_schema": schema_to_json(vertex_schema),
        "edge_schema": schema_to_json(edge_schema),
    }
    w.blob(json.dumps(header, sort_keys=True).encode("utf-8"))
    w.u32(len(bins))
    for bin_id, sgs in bins:
        w.i64(bin_id)
        w.u32(len(sgs))
        for sg in sgs:
            w.i64(sg.subgraph_id)
            w.array(sg.vertices, "<i8")
            w.array(sg.edge_ids, "<i8")
            w.array(sg.edge_src, "<i8")
            w.array(sg.edge_dst, "<i8")
            rem = np.array(
                [
                    (r.edge_id, r.local_vertex, r.remote_vertex, r.forward, r.target_subgraph, r.target_partition)
                    for r in sg.remote_edges
                ],
                dtype=REMOTE_DTYPE,
            )
            w.array(rem, REMOTE_DTYPE)
    return w.getvalue()


def decode_template(payload: bytes, partition_id: int):
    """Returns ``(header dict, [(bin_id, [SubgraphTemplate, ...]), ...])``."""
    from ..partition import RemoteEdge, SubgraphTemplate

    r = _Reader(payload)
    header = json.loads(r.blob().decode("utf-8"))
    directed = header["directed"]
    bins = []
    for _ in range(r.u32()):
        bin_id = r.i64()
        sgs = []
        for _ in range(r.u32()):
            sgid = r.i64()
            vertices = r.array("<i8").copy()
            eids = r.array("<i8").copy()
            src = r.array("<i8").copy()
            dst = r.array("<i8").copy()
            rem = r.array(REMOTE_DTYPE)
            remote = tuple(
                RemoteEdge(int(x["eid"]), int(x["local"]), int(x["remote"]), bool(x["forward"]), int(x["sg"]), int(x["pid"]))
                for x in rem
            )
            sgs.append(SubgraphTemplate(sgid, partition_id, vertices, eids, src, dst, remote, directed))
        bins.append((bin_id, sgs))
    return header, bins


# -- metadata payload --------------------------------------------------------
#
# UTF-8 JSON, keys sorted.


def encode_metadata(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True).encode("utf-8")


def decode_metadata(payload: bytes) -> dict:
    return json.loads(payload.decode("utf-8"))


# -- attribute payload -------------------------------------------------------
#
# u32 instance count; per instance u32 instance index and u64 byte offset of
# its block within the payload; then per instance block:
#   i64 start, i64 end
#   array i64 subgraph ids (bin order), array u32 subgraph row pointers
#   array i64 element ids, array u32 value pointers
#   values: u8 (boolean), i64 (integer), f64 (float); strings are an
#   array u32 byte offsets followed by a blob of concatenated utf-8 bytes


class InstanceBlock:
    """One instance's values of one attribute for every subgraph of a bin.

    Rows are grouped by subgraph: ``sg_ptr[k]:sg_ptr[k+1]`` are the rows of
    ``subgraph_ids[k]``. String values decoded from disk stay as UTF-8 until
    a subgraph's rows are asked for.
    """

    def __init__(self, index, start, end, subgraph_ids, sg_ptr, column=None, strings=None):
        self.index = index
        self.start = start
        self.end = end
        self.subgraph_ids = subgraph_ids
        self.sg_ptr = sg_ptr
        self._column = column
        self._strings = strings

    @classmethod
    def encoded(cls, index, start, end, subgraph_ids, sg_ptr, ids, ptr, offsets, blob):
        return cls(index, start, end, subgraph_ids, sg_ptr, strings=(ids, ptr, offsets, blob))

    @property
    def column(self) -> AttrColumn:
        if self._column is None:
            ids, ptr, offsets, blob = self._strings
            self._column = AttrColumn(ids, ptr, _decode_strings(offsets, blob, 0, len(offsets) - 1))
            self._strings = None
        return self._column

    def subgraph_column(self, position: int) -> AttrColumn:
        lo, hi = int(self.sg_ptr[position]), int(self.sg_ptr[position + 1])
        if self._column is None:
            ids, ptr, offsets, blob = self._strings
            vlo, vhi = int(ptr[lo]), int(ptr[hi])
            return AttrColumn(ids[lo:hi], ptr[lo : hi + 1] - vlo, _decode_strings(offsets, blob, vlo, vhi))
        col = self._column
        vlo, vhi = int(col.ptr[lo]), int(col.ptr[hi])
        return AttrColumn(col.ids[lo:hi], col.ptr[lo : hi + 1] - vlo, col.values[vlo:vhi])


def _decode_strings(offsets, blob: bytes, lo: int, hi: int) -> np.ndarray:
    out = np.empty(hi - lo, dtype=object)
    if hi <= lo:
        return out
    rel = offsets[lo : hi + 1].astype(np.int64)
    base = int(rel[0])
    chunk = blob[base : int(rel[-1])]
    cuts = (rel - base).tolist()
    if chunk.isascii():
        text = chunk.decode("ascii")
        out[:] = [text[cuts[i] : cuts[i + 1]] for i in range(hi - lo)]
    else:
        out[:] = [chunk[cuts[i] : cuts[i + 1]].decode("utf-8") for i in range(hi - lo)]
    return out


_VALUE_DTYPES = {
    ValueType.BOOLEAN: np.dtype("u1"),
    ValueType.INTEGER: np.dtype("<i8"),
    ValueType.FLOAT: np.dtype("<f8"),
}


def _write_values(w: _Writer, values, vtype: ValueType):
    if vtype is ValueType.STRING:
        encoded = [str(v).encode("utf-8") for v in values.tolist()]
        offsets = np.zeros(len(encoded) + 1, dtype="<u4")
        if encoded:
            offsets[1:] = np.cumsum([len(b) for b in encoded])
        w.array(offsets, "<u4")
        w.blob(b"".join(encoded))
    else:
        w.array(np.asarray(values).astype(_VALUE_DTYPES[vtype]), _VALUE_DTYPES[vtype])


def _read_values(r: _Reader, vtype: ValueType):
    raw = r.array(_VALUE_DTYPES[vtype])
    if vtype is ValueType.BOOLEAN:
        return raw.astype(bool)
    return raw


def _encode_block(b: InstanceBlock, vtype: ValueType) -> bytes:
    w = _Writer()
    w.i64(b.start)
    w.i64(b.end)
    w.array(b.subgraph_ids, "<i8")
    w.array(b.sg_ptr, "<u4")
    w.array(b.column.ids, "<i8")
    w.array(b.column.ptr, "<u4")
    _write_values(w, b.column.values, vtype)
    return w.getvalue()


def encode_attribute(blocks, vtype: ValueType) -> bytes:
    """``blocks`` is a list of :class:`InstanceBlock`."""
    bodies = [_encode_block(b, vtype) for b in blocks]
    w = _Writer()
    w.u32(len(blocks))
    offset = 4 + len(blocks) * (4 + 8)
    for b, body in zip(blocks, bodies):
        w.u32(b.index)
        w.parts.append(_U64.pack(offset))
        offset += len(body)
    w.parts.extend(bodies)
    return w.getvalue()


def _decode_block(payload: bytes, index: int, offset: int, vtype: ValueType) -> InstanceBlock:
    r = _Reader(payload)
    r.pos = offset
    start = r.i64()
    end = r.i64()
    sgids = r.array("<i8")
    sg_ptr = r.array("<u4").astype(np.int64)
    ids = r.array("<i8")
    ptr = r.array("<u4").astype(np.int64)
    if vtype is ValueType.STRING:
        offsets = r.array("<u4")
        blob = r.blob()
        return InstanceBlock.encoded(index, start, end, sgids, sg_ptr, ids, ptr, offsets, blob)
    return InstanceBlock(index, start, end, sgids, sg_ptr, AttrColumn(ids, ptr, _read_values(r, vtype)))


class AttributeBlocks(Mapping):
    """``{instance_index: InstanceBlock}`` over an attribute payload, parsed on first access."""

    def __init__(self, payload: bytes, vtype: ValueType):
        self._payload = payload
        self._vtype = vtype
        r = _Reader(payload)
        self._offsets = {}
        for _ in range(r.u32()):
            index = r.u32()
            (offset,) = _U64.unpack_from(payload, r.pos)
            r.pos += 8
            self._offsets[index] = offset
        self._blocks: dict = {}

    def __getitem__(self, index) -> InstanceBlock:
        block = self._blocks.get(index)
        if block is None:
            block = _decode_block(self._payload, index, self._offsets[index], self._vtype)
            self._blocks[index] = block
        return block

    def __iter__(self):
        return iter(self._offsets)

    def __len__(self):
        return len(self._offsets)


def decode_attribute(payload: bytes, vtype: ValueType) -> list[InstanceBlock]:
    blocks = AttributeBlocks(payload, vtype)
    return [blocks[i] for i in blocks]
