"""Exact no-arbitrage price bounds in multi-asset binomial markets."""
from .market_core import Asset, MarketParams, NodeId, Scenario
from .measures import Measure
from .payoffs import Certificate, PayoffFn, certify
from .pricer import (
    BoundsSurface,
    PriceInterval,
    backward_induction_bounds,
    basket_bounds,
    closed_form_surface,
    single_step_bounds,
    two_asset_interval,
)

__all__ = [
    "Asset",
    "BoundsSurface",
    "Certificate",
    "MarketParams",
    "Measure",
    "NodeId",
    "PayoffFn",
    "PriceInterval",
    "Scenario",
    "backward_induction_bounds",
    "basket_bounds",
    "certify",
    "closed_form_surface",
    "single_step_bounds",
    "two_asset_interval",
]
