"""Agent-based IoT time-series analysis platform."""

from .numerics import ClusterReport, NormalizationParams, RegressionReport
from .store import register_record_type

__version__ = "0.1.0"


def _register_domain_types() -> None:
    from .datasets import SynthSensorsSpec, SynthSeriesSpec, TimeSeriesDataset
    from .spatial.graph import SensorNode, SimilarityMatrix

    for cls in (
        NormalizationParams,
        RegressionReport,
        ClusterReport,
        TimeSeriesDataset,
        SynthSeriesSpec,
        SynthSensorsSpec,
        SensorNode,
        SimilarityMatrix,
    ):
        register_record_type(cls)


_register_domain_types()
