"""Services package"""

from . import chainmap, edcore, gaussian, lattice, maps, spectral, systems, transport

__all__ = ['chainmap', 'edcore', 'gaussian', 'lattice', 'maps', 'spectral', 'systems', 'transport']
