"""Self-hosted simulated websites with seeded databases and answer oracles."""

from .db import SimDatabase, build_db, oracle, QueryTemplate
from .site import SimSiteSpec, site_spec
from .server import ServerHandle, serve

__all__ = [
    "SimDatabase",
    "build_db",
    "oracle",
    "QueryTemplate",
    "SimSiteSpec",
    "site_spec",
    "ServerHandle",
    "serve",
]
