"""Tests for ktan."""
