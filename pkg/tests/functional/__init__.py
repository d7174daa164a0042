"""Functional tests for govchain."""
