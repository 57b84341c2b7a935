"""Tests for the graft package."""
