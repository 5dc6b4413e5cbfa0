"""Skeleton-code emitters: class source from class-diagram text, SQL DDL from
database-table text, and an HTML page from the page IR.

All three are deterministic: identical inputs yield byte-identical outputs
(UTF-8, LF, single trailing newline).
"""
from __future__ import annotations

import html
import re
from dataclasses import dataclass, field

from .detections import UiClass
from .page_ir import PageIr


class CodegenError(ValueError):
    """Unusable generator input (empty lists, malformed cell text)."""


Access = str  # "public" | "private" | "protected"


@dataclass
class ClassModel:
    class_name: str
    class_attributes: list[tuple[str, Access]] = field(default_factory=list)
    class_methods: list[tuple[str, Access]] = field(default_factory=list)


@dataclass
class TableModel:
    table_name: str
    table_attributes: list[tuple[str, str]] = field(default_factory=list)  # (attribute, data_type)
    primary_keys: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Class generation


def class_generation(detected_text: list[str]) -> ClassModel:
    """Build a ClassModel from the OCR'd rows of a class-diagram table.

    The first row is the class name. Each remaining row is classified by its
    leading access symbol ("-" private, "/" protected, "+" or none public)
    and lands in class_methods when it carries parentheses, else in
    class_attributes; input order is preserved.
    """
    if not detected_text:
        raise CodegenError("no class name")
    model = ClassModel(class_name=detected_text[0].strip())
    for element in detected_text[1:]:
        entry = element.strip()
        if entry.startswith("-"):
            access = "private"
            entry = entry[1:].strip()
        elif entry.startswith("/"):
            access = "protected"
            entry = entry[1:].strip()
        else:
            access = "public"
            if entry.startswith("+"):
                entry = entry[1:].strip()
        if "(" in entry and ")" in entry:
            model.class_methods.append((entry, access))
        else:
            model.class_attributes.append((entry, access))
    return model


def _identifier(text: str) -> str:
    ident = re.sub(r"[^A-Za-z0-9_]", "_", text.strip())
    if not ident:
        return "_"
    if ident[0].isdigit():
        ident = "_" + ident
    return ident


def class_file_maker(model: ClassModel) -> str:
    """Emit a Python class skeleton from a ClassModel.

    Attributes become None-initialized fields in __init__ with the declared
    type and access kept as trailing comments; methods become pass stubs with
    their access comment. Identifiers are sanitized to [A-Za-z0-9_].
    """
    lines = [f"class {_identifier(model.class_name)}:"]
    if model.class_attributes:
        lines.append("    def __init__(self):")
        for declaration, access in model.class_attributes:
            name, _, type_text = declaration.partition(":")
            line = f"        self.{_identifier(name)} = None"
            if type_text.strip():
                line += f"  # type: {type_text.strip()}"
            line += f"  # {access}"
            lines.append(line)
    for declaration, access in model.class_methods:
        if len(lines) > 1:
            lines.append("")
        head, _, rest = declaration.partition("(")
        params = rest[: rest.rfind(")")] if ")" in rest else rest
        params = params.strip()
        args = f"self, {params}" if params else "self"
        lines.append(f"    def {_identifier(head)}({args}):  # {access}")
        lines.append("        pass")
    if not model.class_attributes and not model.class_methods:
        lines.append("    pass")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Database generation


def database_generation(detected_text: list[str], table_name: str) -> TableModel:
    """Build a TableModel from the OCR'd rows of a database-table image.

    Each row splits on whitespace: first token is the attribute, the rest
    joined by single spaces is the data type. A "*" in the attribute marks a
    primary key; the cleaned name is recorded and the "*" removed.
    """
    if not table_name:
        raise CodegenError("no table name")
    if not detected_text:
        raise CodegenError("no table rows")
    model = TableModel(table_name=table_name)
    for element in detected_text:
        tokens = element.split()
        if len(tokens) < 2:
            raise CodegenError(f"table row needs an attribute and a type: {element!r}")
        attribute = tokens[0]
        data_type = " ".join(tokens[1:])
        if "*" in attribute:
            attribute = attribute.replace("*", "")
            model.primary_keys.append(attribute)
        model.table_attributes.append((attribute, data_type))
    return model


def create_sql_query(model: TableModel) -> str:
    """Emit the CREATE TABLE statement for a TableModel."""
    lines = [f"  {attribute} {data_type}" for attribute, data_type in model.table_attributes]
    if model.primary_keys:
        lines.append(f"  PRIMARY KEY ({', '.join(model.primary_keys)})")
    body = ",\n".join(lines)
    return f"CREATE TABLE {model.table_name} (\n{body}\n);\n"


# ---------------------------------------------------------------------------
# HTML generation


def _attr_escape(value: str) -> str:
    return html.escape(value, quote=True)


def _click_attr(link_target: str) -> str:
    if link_target.startswith("js:"):
        return f' onclick="{_attr_escape(link_target[3:])}()"'
    return f" onclick=\"location.href='{_attr_escape(link_target)}.html'\""


def _element_html(element) -> str:
    text = html.escape(element.text) if element.text else ""
    link = element.link_target
    cls = element.cls
    if cls is UiClass.PARAGRAPH:
        return f"<p{_click_attr(link) if link else ''}>{text}</p>"
    if cls is UiClass.IMAGE:
        alt = _attr_escape(element.text) if element.text else ""
        return f'<img alt="{alt}"{_click_attr(link) if link else ""}>'
    if cls is UiClass.INPUT:
        value = f' value="{_attr_escape(element.text)}"' if element.text else ""
        return f'<input type="text"{value}{_click_attr(link) if link else ""}>'
    if cls is UiClass.BUTTON:
        return f"<button{_click_attr(link) if link else ''}>{text}</button>"
    if cls is UiClass.HYPERLINK:
        if link and not link.startswith("js:"):
            return f'<a href="{_attr_escape(link)}.html">{text}</a>'
        onclick = _click_attr(link) if link else ""
        return f'<a href="#"{onclick}>{text}</a>'
    if cls is UiClass.SELECT:
        return f"<select{_click_attr(link) if link else ''}>{text}</select>"
    if cls is UiClass.TABLE:
        return f"<table{_click_attr(link) if link else ''}>{text}</table>"
    if cls is UiClass.NAVBAR:
        return f"<nav{_click_attr(link) if link else ''}>{text}</nav>"
    if cls is UiClass.CHECKBOX:
        click = _click_attr(link) if link else ""
        return f'<input type="checkbox"{click}><label>{text}</label>'
    if cls is UiClass.RADIO:
        click = _click_attr(link) if link else ""
        return f'<input type="radio"{click}><label>{text}</label>'
    raise CodegenError(f"no HTML mapping for class {cls}")


def html_generate(ir: PageIr) -> str:
    """Emit an HTML page skeleton: one <div class="row"> per IR row."""
    lines = [
        "<!DOCTYPE html>",
        "<html>",
        "<head>",
        '  <meta charset="utf-8">',
        f"  <title>{html.escape(ir.image_id)}</title>",
        "</head>",
        "<body>",
    ]
    for row in ir.rows:
        lines.append('  <div class="row">')
        for index in row:
            lines.append(f"    {_element_html(ir.elements[index])}")
        lines.append("  </div>")
    lines.append("</body>")
    lines.append("</html>")
    return "\n".join(lines) + "\n"
