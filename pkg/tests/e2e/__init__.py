"""End-to-end CLI tests (opt in with PNC_RUN_SLOW=1)."""
