"""Provider plumbing shared by the embedding and LLM clients: errors, retries, HTTP."""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from typing import Any, Callable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ProviderError(RuntimeError):
    """A provider call failed.  ``retryable`` marks transient failures."""

    def __init__(self, message: str, status: int | None = None, retryable: bool = False) -> None:
        super().__init__(message)
        self.status = status
        self.retryable = retryable


def call_with_retries(fn: Callable[[], T], attempts: int = 3, base_delay: float = 0.5) -> T:
    """Call ``fn``, retrying retryable :class:`ProviderError` with exponential backoff."""
    for attempt in range(1, attempts + 1):
        try:
            return fn()
        except ProviderError as exc:
            if not exc.retryable or attempt == attempts:
                raise
            delay = base_delay * 2 ** (attempt - 1)
            logger.warning("provider call failed (%s), retry %d/%d in %.2fs", exc, attempt, attempts - 1, delay)
            if delay > 0:
                time.sleep(delay)
    raise AssertionError("unreachable")


def post_json(url: str, payload: dict[str, Any], token_env: str | None, timeout: float = 60.0) -> dict[str, Any]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(token_env) if token_env else None
    if token:
        headers["Authorization"] = f"Bearer {token}"
    req = urllib.request.Request(url, data=json.dumps(payload).encode("utf-8"), headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        retryable = exc.code >= 500 or exc.code == 429
        raise ProviderError(f"HTTP {exc.code} from {url}", status=exc.code, retryable=retryable) from None
    except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
        raise ProviderError(f"transport failure for {url}: {exc}", retryable=True) from None
    try:
        data = json.loads(body)
    except json.JSONDecodeError:
        raise ProviderError(f"non-JSON response from {url}", retryable=False) from None
    if not isinstance(data, dict):
        raise ProviderError(f"unexpected response shape from {url}")
    return data
