"""Models package"""

from .chain import ChainCoefficients
from .hamiltonian import InteractionTerms, ManyBodyHamiltonian, QuadraticHamiltonian
from .layout import BathAttachment, ModeLayout, ModeRole, Ordering, Side
from .spectral import BathSpec, DensityKind, SpectralDensity
from .states import CorrelationMatrix, DensityMatrix, ManyBodyState
from .superoperator import CPTPReport, FixedPointPair, MemoryTimes, NormKind, Superoperator, SuperoperatorKind
from .trajectory import TrajectoryRecord

__all__ = [
    'ChainCoefficients', 'InteractionTerms', 'ManyBodyHamiltonian', 'QuadraticHamiltonian',
    'BathAttachment', 'ModeLayout', 'ModeRole', 'Ordering', 'Side',
    'BathSpec', 'DensityKind', 'SpectralDensity',
    'CorrelationMatrix', 'DensityMatrix', 'ManyBodyState',
    'CPTPReport', 'FixedPointPair', 'MemoryTimes', 'NormKind', 'Superoperator', 'SuperoperatorKind',
    'TrajectoryRecord',
]
