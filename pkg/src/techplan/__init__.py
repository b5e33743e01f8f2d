"""Technician routing and scheduling with strategic investment planning."""

__version__ = "0.1.0"
