"""
GSA Audit - quantifying over-optimism in gene set analysis
"""

__version__ = "1.0.0"
