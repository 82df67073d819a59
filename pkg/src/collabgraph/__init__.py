"""Metamodel-driven collaborative graph modeling engine."""

from .errors import (
    CollabGraphError,
    DecodeError,
    DesyncDetectedError,
    MalformedCommandError,
    NotConnectedError,
    NotInvertibleError,
    ParseError,
    ProtocolError,
    SchemaMismatchError,
    UnknownActionError,
    UnknownElementError,
    UnknownModelError,
    UnknownTypeError,
)
from .metamodel import (
    MetamodelSpec,
    metamodel_to_dict,
    parse_metamodel,
    serialize_metamodel,
    validate_metamodel,
)
from .model import (
    GraphModelInstance,
    apply_command,
    invert,
    models_equal,
    new_model,
    validate_model,
)
from .protocol import Message, decode_message, edit_message, encode_message
from .schema import TableStore, emit_ddl, generate_schema
from .server import GraphServer, Session
from .client import MirrorModel, render_state

__version__ = "0.1.0"

__all__ = [
    "CollabGraphError",
    "DecodeError",
    "DesyncDetectedError",
    "GraphModelInstance",
    "GraphServer",
    "MalformedCommandError",
    "Message",
    "MetamodelSpec",
    "MirrorModel",
    "NotConnectedError",
    "NotInvertibleError",
    "ParseError",
    "ProtocolError",
    "SchemaMismatchError",
    "Session",
    "TableStore",
    "UnknownActionError",
    "UnknownElementError",
    "UnknownModelError",
    "UnknownTypeError",
    "apply_command",
    "decode_message",
    "edit_message",
    "emit_ddl",
    "encode_message",
    "generate_schema",
    "invert",
    "metamodel_to_dict",
    "models_equal",
    "new_model",
    "parse_metamodel",
    "render_state",
    "serialize_metamodel",
    "validate_metamodel",
    "validate_model",
    "__version__",
]
