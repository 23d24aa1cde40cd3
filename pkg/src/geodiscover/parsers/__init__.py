"""Catalog-standard parsers: each turns one document into a NormalizedRecord."""

from .ckan import parse_ckan_package
from .fgdc import parse_fgdc_record
from .stac import parse_stac_collection

__all__ = ["parse_ckan_package", "parse_fgdc_record", "parse_stac_collection"]
