"""Master-equation simulator for a two-qubit superconducting microwave frequency divider."""

__version__ = "0.1.0"
