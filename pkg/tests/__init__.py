"""Тесты State Tracking Workbench."""
