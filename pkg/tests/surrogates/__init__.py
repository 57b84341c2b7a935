"""Tests for the surrogates package."""
