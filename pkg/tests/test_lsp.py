from __future__ import annotations

import io
import sys
from pathlib import Path

import pytest

from repogen.lsp import (
    LspClient,
    LspError,
    read_message,
    type_info_from_symbols,
    write_message,
)

FAKE_SERVER = Path(__file__).parent / "fake_lsp_server.py"


class TestFraming:
    def test_roundtrip(self):
        buf = io.BytesIO()
        write_message(buf, {"jsonrpc": "2.0", "id": 1, "method": "x", "params": {}})
        buf.seek(0)
        msg = read_message(buf)
        assert msg["id"] == 1
        assert msg["method"] == "x"

    def test_content_length_exact(self):
        buf = io.BytesIO()
        write_message(buf, {"a": "é"})  # multi-byte payload
        raw = buf.getvalue()
        header, _, body = raw.partition(b"\r\n\r\n")
        assert header == b"Content-Length: %d" % len(body)

    def test_missing_header_rejected(self):
        buf = io.BytesIO(b"\r\n\r\n{}")
        with pytest.raises(LspError):
            read_message(buf)

    def test_truncated_body_rejected(self):
        buf = io.BytesIO(b"Content-Length: 100\r\n\r\n{}")
        with pytest.raises(LspError):
            read_message(buf)


class TestClientAgainstScriptedServer:
    @pytest.fixture
    def client(self, tmp_path):
        (tmp_path / "src").mkdir()
        (tmp_path / "src" / "Widget.java").write_text(
            "public class Widget {\n  int count;\n}\n")
        client = LspClient([sys.executable, str(FAKE_SERVER)], tmp_path)
        yield client
        client.shutdown()

    def test_initialize(self, client):
        result = client.initialize()
        assert result["capabilities"]["typeDefinitionProvider"] is True

    def test_document_symbol_after_open(self, client):
        client.initialize()
        client.did_open("src/Widget.java", "java",
                        (client.root / "src/Widget.java").read_text())
        symbols = client.document_symbol("src/Widget.java")
        assert symbols[0]["name"] == "Widget"

    def test_type_definition_request(self, client):
        client.initialize()
        assert client.type_definition("src/Widget.java", 0, 14) == []

    def test_server_notifications_skipped(self, client):
        # the fake server interleaves a window/logMessage before the
        # initialize response; the client must not mistake it for one
        result = client.initialize()
        assert "capabilities" in result


class TestTypeInfoFromSymbols:
    SYMBOLS = [
        {
            "name": "Widget",
            "kind": 5,
            "children": [
                {"name": "count", "kind": 8, "detail": "int"},
                {"name": "render", "kind": 6,
                 "detail": "public Canvas render(int scale)"},
            ],
        }
    ]

    def test_assembly(self):
        info = type_info_from_symbols("app.Widget", self.SYMBOLS)
        assert info.kind == "class"
        assert info.fields == (("count", "int", ""),)
        assert info.method_signatures == ("public Canvas render(int scale)",)

    def test_missing_type(self):
        assert type_info_from_symbols("app.Nope", self.SYMBOLS) is None
