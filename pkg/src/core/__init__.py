"""Core package"""

from .pipeline import ExtractionPipeline

__all__ = ['ExtractionPipeline']
