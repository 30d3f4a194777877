"""
datadep: named data dependencies for reproducible research
Resolves datasets to absolute local paths, downloading, checksum-validating
and unpacking them on first use
"""

__version__ = "1.0.0"
__author__ = "datadep developers"

from .acquire import datadep_path, resolve
from .errors import DataDepError
from .locate import build_load_path, default_load_path, search
from .manifest import Manifest, load_manifest, parse_manifest, write_manifest
from .registry import DataDepSpec, Registry

__all__ = [
    "datadep_path",
    "resolve",
    "DataDepError",
    "build_load_path",
    "default_load_path",
    "search",
    "Manifest",
    "load_manifest",
    "parse_manifest",
    "write_manifest",
    "DataDepSpec",
    "Registry",
]
