"""Toolkit for building, scoring, calibrating and curating protein PTM
relation-extraction predictions from abstract collections."""

__version__ = "0.1.0"
