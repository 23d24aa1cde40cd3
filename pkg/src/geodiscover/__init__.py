"""Knowledge-graph-driven discovery engine for geospatial data catalogs."""

__version__ = "0.1.0"
