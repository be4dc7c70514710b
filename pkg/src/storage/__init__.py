# Storage module - run configuration and result bundles
from .bundle import LoadedBundle, ResultBundle
from .models import RunConfig, load_config, load_preset

__all__ = ['LoadedBundle', 'ResultBundle', 'RunConfig', 'load_config', 'load_preset']
