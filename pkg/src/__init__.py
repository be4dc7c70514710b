"""ChoiMap package"""

from .core import ExtractionPipeline

__all__ = ['ExtractionPipeline']
