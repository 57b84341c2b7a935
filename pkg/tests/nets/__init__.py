"""Tests for the nets package."""
