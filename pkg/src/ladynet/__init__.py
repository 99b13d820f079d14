"""Locally adaptive dynamic network inference.

Bernoulli edges with logit ``mu(t) + x_v(t)'x_u(t)``, nested-GP state
equations for every trajectory, Polya-gamma Gibbs sampling, one-step
forecasting and online updating.
"""
from .forecast_online import (ForecastResult, OnlineState, forecast_one_step,
                              online_update, predict_replicate)
from .gibbs import (ModelConfig, PosteriorStore, edge_probability, in_sample_auc,
                    load_store, run_gibbs, save_store, select_H)
from .netseries import (DataError, NetworkSeries, TimeGrid, aggregate_windows,
                        load_contacts, load_series, save_series)
from .netstats import (assortativity, auc, density, degrees, predictive_check, psrf,
                       psrf_array, split_chains)
from .polyagamma import sample_pg1, sample_pg1_array
from .simgen import default_regimes, default_schedule, simulate, simulate_from_pi

__version__ = "0.1.0"
