"""Tests for the autodiff package."""
