"""
Config schema utils
"""

import json
import re
from typing import Any

from ..util.errors import SchemaError

__all__ = [
    'json_typeof',
    'FieldTable',
    'ConfigSource',
    'parse_json',
    'validate_section',
    'dump_section',
    'require_number_list',
]

def json_typeof(val: Any, default: str | None = None) -> str:
    """
    Get the JSON data type of a value

    Args:
        val (Any): The value to check
        default (optional str | None default: None): The default value to return if the value is not
        a valid JSON. If None then an error is raised

    Returns:
        str: The JSON data type of the value

    Raises:
        ValueError: If the value is not a valid JSON type and no default is provided
    """
    if isinstance(val, bool):
        dtype = 'boolean'
    elif isinstance(val, (int, float)):
        dtype = 'number'
    elif isinstance(val, str):
        dtype = 'string'
    elif isinstance(val, list):
        dtype = 'array'
    elif isinstance(val, dict):
        dtype = 'object'
    elif val is None:
        dtype = 'null'
    else:
        if default is not None:
            return default
        raise ValueError(f'Object of type "{type(val)}" is not a valid JSON type')
    return dtype

# Field table: internal name -> (JSON key, valid JSON types, default)
FieldTable = dict[str, tuple[str, tuple[str, ...], Any]]

class ConfigSource:
    """
    The text a JSON document was parsed from, used to point schema errors at a line and column

    Args:
        name (str): The file/URI name reported in diagnostics
        text (str): The document text
    """

    def __init__(self, name: str, text: str = '') -> None:
        self.name = name
        self.text = text

    def locate(self, key: str) -> tuple[int | None, int | None]:
        """
        Find the first occurrence of a quoted key in the document

        Returns:
            tuple[int | None, int | None]: 1-based line and column, or (None, None) if not found
        """
        match = re.search(r'"' + re.escape(key) + r'"\s*:', self.text)
        if match is None:
            return None, None
        line = self.text.count('\n', 0, match.start()) + 1
        column = match.start() - (self.text.rfind('\n', 0, match.start()) + 1) + 1
        return line, column

    def error(self, message: str, key: str | None = None) -> SchemaError:
        """
        Build a SchemaError located at a key
        """
        line, column = self.locate(key) if key is not None else (None, None)
        return SchemaError(message, source=self.name, line=line, column=column)

def parse_json(text: str, name: str) -> tuple[Any, ConfigSource]:
    """
    Parse JSON text, mapping syntax errors to a located SchemaError

    Args:
        text (str): The document text
        name (str): The file/URI name reported in diagnostics

    Returns:
        tuple[Any, ConfigSource]: The parsed document and its source for later validation errors
    """
    try:
        return json.loads(text), ConfigSource(name, text)
    except json.JSONDecodeError as err:
        raise SchemaError(err.msg, source=name, line=err.lineno, column=err.colno) from err

def validate_section(
    section: Any,
    fields: FieldTable,
    path: str,
    source: ConfigSource
) -> dict[str, Any]:
    """
    Validate a JSON object against a field table

    Missing keys take their default, unknown keys and wrongly typed values are rejected

    Args:
        section (Any): The parsed JSON value for the section
        fields (FieldTable): The field table of the section
        path (str): Dotted path of the section used in messages
        source (ConfigSource): Where the document came from

    Returns:
        dict[str, Any]: The values keyed by internal name
    """
    if json_typeof(section, '<unknown>') != 'object':
        raise source.error(f'"{path}" must be an object')
    res: dict[str, Any] = {}
    for arg, (arg_name, arg_t, default) in fields.items():
        val = section.get(arg_name, default)
        val_t = json_typeof(val, '<unknown>')
        if val_t not in arg_t:
            raise source.error(
                f'"{path}.{arg_name}" with value "{val}" has invalid type "{val_t}". '
                f'Expected: {" | ".join(arg_t)}',
                key=arg_name
            )
        res[arg] = val
    arg_names = {arg_name for arg_name, *_ in fields.values()}
    for arg in section:
        if arg not in arg_names:
            raise source.error(f'Unrecognized key "{path}.{arg}"', key=arg)
    return res

def dump_section(values: dict[str, Any], fields: FieldTable) -> dict[str, Any]:
    """
    Inverse of validate_section: map internal names back to JSON keys
    """
    return {fields[arg][0]: val for arg, val in values.items() if arg in fields}

def require_number_list(
    val: Any,
    path: str,
    source: ConfigSource,
    length: int | None = None
) -> list[float]:
    """
    Validate a JSON array of numbers
    """
    key = path.rsplit('.', 1)[-1]
    if json_typeof(val, '<unknown>') != 'array' or any(
        json_typeof(item, '<unknown>') != 'number' for item in val
    ):
        raise source.error(f'"{path}" must be an array of numbers', key=key)
    if length is not None and len(val) != length:
        raise source.error(f'"{path}" must have {length} entries, got {len(val)}', key=key)
    return [float(item) for item in val]
