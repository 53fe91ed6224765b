"""cellcast: probabilistic forecasting of daily cell-level network traffic.

A recurrent Gaussian-likelihood forecaster augmented with local moving
average covariate channels, plus a synthetic panel generator, naive and
Holt-Winters baselines, and an evaluation harness that sweeps pooled and
per-series RMSLE over a range of prediction steps.
"""

from .baselines import BaselineError, HoltWintersConfig, holt_winters, seasonal_naive
from .deepar import (
    Forecast,
    ForecastError,
    LayerParams,
    NetworkParams,
    TrainConfig,
    TrainedModel,
    TrainError,
    batch_loss_and_grad,
    forward_window,
    gaussian_nll,
    init_params,
    load_model,
    lstm_cell,
    point_forecast,
    sample_forecast,
    save_model,
    series_scale,
    train,
    window_loss_and_grad,
)
from .evalharness import (
    DEFAULT_STEPS,
    EvalError,
    EvalReport,
    HoltWintersForecaster,
    SeasonalNaiveForecaster,
    TrainedModelForecaster,
    provenance_payload,
    rmsle_per_series,
    rmsle_pooled,
    stability_std,
    sweep,
    write_provenance,
    write_report_csvs,
    write_svg_plots,
)
from .lma import (
    CovariatePanel,
    LmaConfig,
    LmaError,
    assemble_covariates,
    build_covariates,
    day_of_week_channel,
    export_covariates,
    feature_value,
    lma_features,
    lma_window,
)
from .panel import (
    PanelError,
    SeriesPanel,
    SplitSpec,
    load_panel,
    split_panel,
    write_panel,
)
from .synth import SynthConfig, SynthConfigError, generate_panel, series_params
from ._rng import substream

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "assemble_covariates",
    "BaselineError",
    "batch_loss_and_grad",
    "build_covariates",
    "CovariatePanel",
    "day_of_week_channel",
    "DEFAULT_STEPS",
    "EvalError",
    "EvalReport",
    "export_covariates",
    "feature_value",
    "Forecast",
    "ForecastError",
    "forward_window",
    "gaussian_nll",
    "generate_panel",
    "holt_winters",
    "HoltWintersConfig",
    "HoltWintersForecaster",
    "init_params",
    "LayerParams",
    "lma_features",
    "lma_window",
    "LmaConfig",
    "LmaError",
    "load_model",
    "load_panel",
    "lstm_cell",
    "NetworkParams",
    "PanelError",
    "point_forecast",
    "provenance_payload",
    "rmsle_per_series",
    "rmsle_pooled",
    "sample_forecast",
    "save_model",
    "seasonal_naive",
    "SeasonalNaiveForecaster",
    "series_params",
    "series_scale",
    "SeriesPanel",
    "split_panel",
    "SplitSpec",
    "stability_std",
    "substream",
    "sweep",
    "SynthConfig",
    "SynthConfigError",
    "train",
    "TrainConfig",
    "TrainedModel",
    "TrainedModelForecaster",
    "TrainError",
    "window_loss_and_grad",
    "write_panel",
    "write_provenance",
    "write_report_csvs",
    "write_svg_plots",
]
