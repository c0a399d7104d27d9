"""Wire protocol: JSON-RPC message model, tool schemas, transports."""

from mcplab.protocol.messages import (
    INTERNAL_ERROR,
    INVALID_PARAMS,
    INVALID_REQUEST,
    METHOD_NOT_FOUND,
    PARSE_ERROR,
    ProtocolError,
    RpcError,
    RpcMessage,
    frame_message,
    parse_message,
)
from mcplab.protocol.tooltypes import (
    SCALAR_TYPES,
    ContentBlock,
    PropertySpec,
    ToolCallResult,
    ToolDescriptor,
    validate_args,
)
from mcplab.protocol.transport import (
    Connection,
    HttpConnection,
    RequestTimeout,
    StdioConnection,
    TransportConfig,
    TransportError,
    open_transport,
)

__all__ = [
    "INTERNAL_ERROR",
    "INVALID_PARAMS",
    "INVALID_REQUEST",
    "METHOD_NOT_FOUND",
    "PARSE_ERROR",
    "ProtocolError",
    "RpcError",
    "RpcMessage",
    "frame_message",
    "parse_message",
    "SCALAR_TYPES",
    "ContentBlock",
    "PropertySpec",
    "ToolCallResult",
    "ToolDescriptor",
    "validate_args",
    "Connection",
    "HttpConnection",
    "RequestTimeout",
    "StdioConnection",
    "TransportConfig",
    "TransportError",
    "open_transport",
]
