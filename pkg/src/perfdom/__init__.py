"""Random perforated domains: regularity fields, Voronoi mesostructure,
discrete harmonic connectivity graphs and local-to-global extension operators."""

__version__ = "0.1.0"
