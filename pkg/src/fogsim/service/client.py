"""Synchronous in-process client for the service.

httpx's bundled ASGI transport is async-only; this wraps it so blocking
callers (the CLI, tests) can talk to the app without a socket or a server
process. Request and response bodies are buffered, which is fine for the
JSON payloads this API exchanges.
"""

from __future__ import annotations

import asyncio

import httpx


class SyncASGITransport(httpx.BaseTransport):
    def __init__(self, app):
        self._async_transport = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        return asyncio.run(self._round_trip(request))

    async def _round_trip(self, request: httpx.Request) -> httpx.Response:
        response = await self._async_transport.handle_async_request(request)
        try:
            body = await response.aread()
        finally:
            await response.aclose()
        return httpx.Response(
            status_code=response.status_code,
            headers=response.headers,
            content=body,
            request=request,
        )

    def close(self) -> None:
        pass


def in_process_client(app=None) -> httpx.Client:
    if app is None:
        from .app import create_app

        app = create_app()
    return httpx.Client(
        transport=SyncASGITransport(app),
        base_url="http://fogsim.internal",
        timeout=None,
    )
