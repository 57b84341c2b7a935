"""Tests for the packet package."""
