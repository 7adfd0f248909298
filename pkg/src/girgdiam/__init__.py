"""Threshold GIRG sampling, box tessellations, routing certificates and diameter analysis."""
__version__ = "0.1.0"
