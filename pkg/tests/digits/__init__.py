"""Tests for the digits package."""
