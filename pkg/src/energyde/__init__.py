"""Desk-scale energy data ecosystem: RDF knowledge graphs built from raw data
via declarative mappings, shape validation, contract-governed connectors, and
federated query processing."""

__version__ = "0.1.0"
