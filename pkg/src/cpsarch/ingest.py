"""Model ingestion: canonical JSON documents and read-only ``.slx`` archives."""

from __future__ import annotations

import json
import re
import zipfile
import xml.etree.ElementTree as ET
from pathlib import Path

from .errors import InvalidModel, MissingEntry, NotZip, ParseError, SchemaError, XmlError
from .model import ROOT, Block, Connection, Model, validate

SCHEMA_VERSION = "1"
SLX_ENTRY = "simulink/blockdiagram.xml"

# Non-numeric Simulink port kinds get indices past any realistic data port.
_SPECIAL_PORTS = {"enable": 1000, "trigger": 1001, "ifaction": 1002, "reset": 1003, "state": 1004}


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing required field {key!r} in {where}")
    return obj[key]


def _as_str(value, key, where) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"field {key!r} in {where} must be a string")
    return value


def _as_port(value, key, where) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"field {key!r} in {where} must be an integer")
    return value


def model_from_dict(doc) -> Model:
    """Build a model from an already-decoded JSON document (no validation)."""
    version = _require(doc, "schema_version", "document")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION!r})")
    m = _require(doc, "model", "document")
    name = _as_str(_require(m, "name", "model"), "name", "model")
    raw_blocks = _require(m, "blocks", "model")
    raw_conns = _require(m, "connections", "model")
    if not isinstance(raw_blocks, list) or not isinstance(raw_conns, list):
        raise SchemaError("model.blocks and model.connections must be arrays")

    blocks = []
    for i, rb in enumerate(raw_blocks):
        where = f"blocks[{i}]"
        params = rb.get("params", {}) if isinstance(rb, dict) else {}
        if not isinstance(params, dict) or not all(isinstance(v, str) for v in params.values()):
            raise SchemaError(f"{where}.params must map strings to strings")
        blocks.append(
            Block(
                id=_as_str(_require(rb, "id", where), "id", where),
                name=_as_str(_require(rb, "name", where), "name", where),
                block_type=_as_str(_require(rb, "block_type", where), "block_type", where),
                parent=_as_str(_require(rb, "parent", where), "parent", where),
                params=dict(params),
            )
        )
    conns = []
    for i, rc in enumerate(raw_conns):
        where = f"connections[{i}]"
        conns.append(
            Connection(
                src_block=_as_str(_require(rc, "src_block", where), "src_block", where),
                src_port=_as_port(rc.get("src_port", 0), "src_port", where),
                dst_block=_as_str(_require(rc, "dst_block", where), "dst_block", where),
                dst_port=_as_port(rc.get("dst_port", 0), "dst_port", where),
            )
        )
    return Model(name=name, blocks=tuple(blocks), connections=tuple(conns))


def parse_json(data: bytes | str) -> Model:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    model = model_from_dict(doc)
    problems = validate(model)
    if problems:
        raise InvalidModel(problems)
    return model


def model_to_dict(model: Model) -> dict:
    blocks = []
    for b in model.blocks:
        entry = {"id": b.id, "name": b.name, "block_type": b.block_type, "parent": b.parent}
        if b.params:
            entry["params"] = dict(sorted(b.params.items()))
        blocks.append(entry)
    conns = [
        {"src_block": c.src_block, "src_port": c.src_port, "dst_block": c.dst_block, "dst_port": c.dst_port}
        for c in model.connections
    ]
    return {"schema_version": SCHEMA_VERSION, "model": {"name": model.name, "blocks": blocks, "connections": conns}}


def export_json(model: Model) -> bytes:
    """Serialize to the canonical form: sorted keys, 2-space indent, trailing newline."""
    text = json.dumps(model_to_dict(model), indent=2, sort_keys=True, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def load_model(path: str | Path) -> Model:
    """Load a ``.json`` or ``.slx`` model, dispatching on the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".slx":
        return parse_slx(path)
    return parse_json(path.read_bytes())


# --- .slx ---------------------------------------------------------------

_ENDPOINT = re.compile(r"^\s*(?P<sid>[^#]+?)\s*(?:#(?P<kind>[A-Za-z]+)(?::(?P<num>\d+))?)?\s*$")


def _port_index(kind: str | None, num: str | None) -> int:
    if num is not None:
        return max(int(num) - 1, 0)
    if kind is None or kind in ("in", "out"):
        return 0
    return _SPECIAL_PORTS.get(kind.lower(), 0)


def _legacy_port(text: str | None) -> int:
    if text is None:
        return 0
    text = text.strip()
    return _port_index(None, text) if text.isdigit() else _port_index(text, None)


def _endpoint(text: str):
    m = _ENDPOINT.match(text or "")
    if not m:
        raise XmlError(f"cannot parse line endpoint {text!r}")
    return m.group("sid"), _port_index(m.group("kind"), m.group("num"))


def _params(elem) -> dict[str, str]:
    return {p.get("Name"): (p.text or "") for p in elem.findall("P") if p.get("Name")}


class _SlxReader:
    def __init__(self, archive: zipfile.ZipFile):
        self.archive = archive
        self.blocks: list[Block] = []
        self.connections: list[Connection] = []

    def _resolve_system(self, system):
        ref = system.get("Ref")
        if ref is None:
            return system
        entry = f"simulink/systems/{ref}.xml"
        try:
            raw = self.archive.read(entry)
        except KeyError as exc:
            raise MissingEntry(entry) from exc
        try:
            return ET.fromstring(raw)
        except ET.ParseError as exc:
            raise XmlError(f"{entry}: {exc}") from exc

    def read_system(self, system, parent: str):
        system = self._resolve_system(system)
        names: dict[str, str] = {}
        for elem in system.findall("Block"):
            sid = elem.get("SID")
            btype = elem.get("BlockType")
            if sid is None or btype is None:
                raise XmlError("Block element without SID or BlockType")
            name = elem.get("Name", sid)
            names[name] = sid
            self.blocks.append(Block(id=sid, name=name, block_type=btype, parent=parent, params=_params(elem)))
            for child in elem.findall("System"):
                self.read_system(child, sid)
        for line in system.findall("Line"):
            self._read_line(line, names)

    def _read_line(self, line, names):
        p = _params(line)
        if "Src" in p:
            src = _endpoint(p["Src"])
        elif "SrcBlock" in p:
            src = names.get(p["SrcBlock"], p["SrcBlock"]), _legacy_port(p.get("SrcPort"))
        else:
            return
        for dst in self._destinations(line, names):
            self.connections.append(Connection(src[0], src[1], dst[0], dst[1]))

    def _destinations(self, elem, names):
        p = _params(elem)
        if "Dst" in p:
            yield _endpoint(p["Dst"])
        elif "DstBlock" in p:
            yield names.get(p["DstBlock"], p["DstBlock"]), _legacy_port(p.get("DstPort"))
        for branch in elem.findall("Branch"):
            yield from self._destinations(branch, names)


def parse_slx(path: str | Path) -> Model:
    """Read blocks, subsystem nesting and lines from a Simulink ``.slx`` archive.

    Every ``<Block>`` becomes a :class:`Block` with id = SID. Each destination
    of a ``<Line>`` (including nested ``<Branch>`` elements) yields one
    connection. Masked and variant subsystems are entered like ordinary ones.
    """
    path = Path(path)
    try:
        archive = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise NotZip(f"{path} is not a ZIP archive") from exc
    with archive:
        try:
            raw = archive.read(SLX_ENTRY)
        except KeyError as exc:
            raise MissingEntry(f"{path} has no entry {SLX_ENTRY}") from exc
        try:
            root = ET.fromstring(raw)
        except ET.ParseError as exc:
            raise XmlError(f"{SLX_ENTRY}: {exc}") from exc
        model_elem = root if root.tag == "Model" else root.find("Model")
        if model_elem is None:
            model_elem = root
        top = model_elem.find("System")
        if top is None:
            raise XmlError("no top-level System element")
        reader = _SlxReader(archive)
        reader.read_system(top, ROOT)
    name = model_elem.get("Name") or path.stem
    model = Model(name=name, blocks=tuple(reader.blocks), connections=tuple(reader.connections))
    problems = validate(model)
    if problems:
        raise InvalidModel(problems)
    return model
