"""Typed knowledge base."""
