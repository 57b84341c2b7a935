"""Tests for the localize package."""
