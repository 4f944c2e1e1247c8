"""Externally visible surface: config loading, HTTP/WebSocket, CLI REPL."""
