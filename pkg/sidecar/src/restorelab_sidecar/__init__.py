"""Reference inference service for the restorelab backend wire protocol."""

from .config import SidecarConfig
from .service import create_app, create_default_app

__version__ = "0.1.0"

__all__ = ["SidecarConfig", "create_app", "create_default_app", "__version__"]
