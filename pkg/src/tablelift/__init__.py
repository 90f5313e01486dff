"""Table enrichment for ML: find joinable rows in a table lake, align them
into new feature columns, and measure the effect on model quality."""

__version__ = "0.1.0"
