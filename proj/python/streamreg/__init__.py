"""One-pass streaming nonparametric regression."""

import json

from ._core import Regressor, Service, StreamregError, cli

__all__ = ["Regressor", "Service", "StreamregError", "cli", "request"]


def request(service, **fields):
    """Sends one request dict to a Service and returns the decoded response."""
    return json.loads(service.handle(json.dumps(fields)))
