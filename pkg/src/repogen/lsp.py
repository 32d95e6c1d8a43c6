"""Language-server protocol client used as the production analyzer.

Implements the Content-Length framed JSON-RPC transport over a server
subprocess's stdio, plus the handful of requests the type-context
module needs: initialize, didOpen, typeDefinition, and documentSymbol.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
import threading
from pathlib import Path
from typing import Any, BinaryIO

from .typectx import TypeInfo

logger = logging.getLogger(__name__)

# documentSymbol kinds (LSP SymbolKind) we care about
_SYMBOL_CLASS = 5
_SYMBOL_METHOD = 6
_SYMBOL_FIELD = 8
_SYMBOL_ENUM = 10
_SYMBOL_INTERFACE = 11
_SYMBOL_STRUCT = 23

_KIND_NAMES = {
    _SYMBOL_CLASS: "class",
    _SYMBOL_ENUM: "enum",
    _SYMBOL_INTERFACE: "interface",
    _SYMBOL_STRUCT: "struct",
}


class LspError(RuntimeError):
    pass


def write_message(stream: BinaryIO, payload: dict[str, Any]) -> None:
    body = json.dumps(payload).encode("utf-8")
    stream.write(f"Content-Length: {len(body)}\r\n\r\n".encode("ascii"))
    stream.write(body)
    stream.flush()


def read_message(stream: BinaryIO) -> dict[str, Any]:
    """Read one framed JSON-RPC message; raises LspError on bad framing."""
    length = None
    while True:
        line = stream.readline()
        if not line:
            raise LspError("connection closed while reading headers")
        line = line.strip()
        if not line:
            break
        if line.lower().startswith(b"content-length:"):
            length = int(line.split(b":", 1)[1])
    if length is None:
        raise LspError("missing Content-Length header")
    body = stream.read(length)
    if len(body) != length:
        raise LspError("truncated message body")
    return json.loads(body.decode("utf-8"))


class JsonRpcConnection:
    """Request/response JSON-RPC over byte streams; notifications allowed."""

    def __init__(self, reader: BinaryIO, writer: BinaryIO):
        self._reader = reader
        self._writer = writer
        self._next_id = 1
        self._lock = threading.Lock()

    def notify(self, method: str, params: dict[str, Any] | None = None) -> None:
        with self._lock:
            write_message(self._writer, {
                "jsonrpc": "2.0", "method": method, "params": params or {},
            })

    def request(self, method: str, params: dict[str, Any] | None = None) -> Any:
        with self._lock:
            msg_id = self._next_id
            self._next_id += 1
            write_message(self._writer, {
                "jsonrpc": "2.0", "id": msg_id, "method": method,
                "params": params or {},
            })
            while True:
                msg = read_message(self._reader)
                if msg.get("id") == msg_id:
                    if "error" in msg:
                        raise LspError(f"{method} failed: {msg['error']}")
                    return msg.get("result")
                # server-initiated notifications/requests are skipped here;
                # the analyzer workflow is strictly synchronous
                logger.debug("ignoring server message: %s", msg.get("method"))


class LspClient:
    """Thin client over a language-server subprocess."""

    def __init__(self, server_cmd: list[str], root: str | Path):
        self.root = Path(root).resolve()
        self._proc = subprocess.Popen(
            server_cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        self.conn = JsonRpcConnection(self._proc.stdout, self._proc.stdin)

    def initialize(self) -> Any:
        result = self.conn.request("initialize", {
            "processId": None,
            "rootUri": self.root.as_uri(),
            "capabilities": {},
        })
        self.conn.notify("initialized", {})
        return result

    def did_open(self, file_path: str, language_id: str, text: str) -> None:
        self.conn.notify("textDocument/didOpen", {
            "textDocument": {
                "uri": (self.root / file_path).as_uri(),
                "languageId": language_id,
                "version": 1,
                "text": text,
            }
        })

    def type_definition(self, file_path: str, line: int, character: int) -> Any:
        return self.conn.request("textDocument/typeDefinition", {
            "textDocument": {"uri": (self.root / file_path).as_uri()},
            "position": {"line": line, "character": character},
        })

    def document_symbol(self, file_path: str) -> Any:
        return self.conn.request("textDocument/documentSymbol", {
            "textDocument": {"uri": (self.root / file_path).as_uri()},
        })

    def workspace_symbol(self, query: str) -> Any:
        return self.conn.request("workspace/symbol", {"query": query})

    def shutdown(self) -> None:
        try:
            self.conn.request("shutdown")
            self.conn.notify("exit")
        except OSError:
            pass  # server may already have exited after the shutdown reply
        finally:
            self._proc.terminate()
            self._proc.wait(timeout=10)


def type_info_from_symbols(
    qualified_name: str, symbols: list[dict[str, Any]]
) -> TypeInfo | None:
    """Assemble a TypeInfo from a documentSymbol response.

    Picks the symbol tree node whose name matches the type's simple
    name; fields and methods come from its children. Method detail
    strings are used verbatim as signatures when present.
    """
    simple = qualified_name.rsplit(".", 1)[-1]

    def find(nodes):
        for node in nodes:
            if node.get("name") == simple and node.get("kind") in _KIND_NAMES:
                return node
            found = find(node.get("children", []))
            if found:
                return found
        return None

    node = find(symbols)
    if node is None:
        return None
    fields = []
    methods = []
    for child in node.get("children", []):
        if child.get("kind") == _SYMBOL_FIELD:
            fields.append((child["name"], child.get("detail", ""), ""))
        elif child.get("kind") == _SYMBOL_METHOD:
            methods.append(child.get("detail") or child["name"])
    return TypeInfo(
        qualified_name=qualified_name,
        kind=_KIND_NAMES[node["kind"]],
        fields=tuple(fields),
        method_signatures=tuple(methods),
    )


def _offset_to_position(text: str, offset: int) -> tuple[int, int]:
    prefix = text.encode("utf-8")[:offset].decode("utf-8", errors="ignore")
    line = prefix.count("\n")
    character = len(prefix.rsplit("\n", 1)[-1])
    return line, character


_TYPE_TOKEN_RE = re.compile(r"\b[A-Z][A-Za-z0-9_]*\b")


class LspAnalyzerSession:
    """AnalyzerSession backed by a real language server.

    Member signatures come verbatim from documentSymbol details;
    references of a type are the type-name tokens appearing in those
    member declarations, resolved through workspace/symbol.
    """

    def __init__(self, server_cmd: list[str], language_id: str):
        self._server_cmd = server_cmd
        self._language_id = language_id
        self._client: LspClient | None = None
        self._opened: set[str] = set()
        self._by_name: dict[str, TypeInfo] = {}

    def open(self, repository_root: str | Path) -> None:
        self._client = LspClient(self._server_cmd, repository_root)
        self._client.initialize()

    def _ensure_open(self, file_path: str) -> str:
        assert self._client is not None, "session not opened"
        if file_path not in self._opened:
            text = (self._client.root / file_path).read_text(encoding="utf-8")
            self._client.did_open(file_path, self._language_id, text)
            self._opened.add(file_path)
        return (self._client.root / file_path).read_text(encoding="utf-8")

    def _info_from_location(self, location: dict[str, Any], name_hint: str) -> TypeInfo | None:
        assert self._client is not None
        uri = location.get("uri") or location.get("targetUri")
        if not uri:
            return None
        path = Path(uri.removeprefix("file://"))
        try:
            rel = path.relative_to(self._client.root).as_posix()
        except ValueError:
            return None
        self._ensure_open(rel)
        symbols = self._client.document_symbol(rel) or []
        qualified = rel.rsplit(".", 1)[0].replace("/", ".")
        info = type_info_from_symbols(qualified, symbols)
        if info is not None:
            self._by_name[info.simple_name] = info
            self._by_name[info.qualified_name] = info
        return info

    def resolve_type_at(self, file_path: str, offset: int) -> TypeInfo | None:
        assert self._client is not None, "session not opened"
        text = self._ensure_open(file_path)
        line, character = _offset_to_position(text, offset)
        result = self._client.type_definition(file_path, line, character)
        locations = result if isinstance(result, list) else [result] if result else []
        for location in locations:
            info = self._info_from_location(location, "")
            if info is not None:
                return info
        # fall back to the file's own top-level type
        symbols = self._client.document_symbol(file_path) or []
        qualified = file_path.rsplit(".", 1)[0].replace("/", ".")
        return type_info_from_symbols(qualified, symbols)

    def resolve_type_name(self, name: str) -> TypeInfo | None:
        if name in self._by_name:
            return self._by_name[name]
        assert self._client is not None, "session not opened"
        simple = name.rsplit(".", 1)[-1]
        for sym in self._client.workspace_symbol(simple) or []:
            if sym.get("name") == simple:
                info = self._info_from_location(sym.get("location", {}), simple)
                if info is not None:
                    return info
        return None

    def types_referenced_by(self, info: TypeInfo) -> list[str]:
        names: list[str] = []
        seen = set()
        decls = [decl_type for _, decl_type, _ in info.fields]
        decls.extend(info.method_signatures)
        for decl in decls:
            for token in _TYPE_TOKEN_RE.findall(decl):
                if token != info.simple_name and token not in seen:
                    seen.add(token)
                    names.append(token)
        return names

    def close(self) -> None:
        if self._client is not None:
            self._client.shutdown()
            self._client = None
