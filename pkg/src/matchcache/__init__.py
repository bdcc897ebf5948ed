"""Online caching where the cache is a union of matchings."""

__version__ = "0.1.0"
