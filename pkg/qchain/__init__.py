"""qchain: deterministic quantum-threat blockchain simulator."""
