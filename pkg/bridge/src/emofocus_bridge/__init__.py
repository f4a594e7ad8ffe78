"""Bridge any external sequence model into emofocus over stdio."""

from .host import BridgeModel
from .protocol import BridgeProtocolError
from .serve import ModelAdapter, serve

__version__ = "0.1.0"

__all__ = ["BridgeModel", "BridgeProtocolError", "ModelAdapter", "serve"]
