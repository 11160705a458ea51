"""AI playtesting for a tile-popping puzzle game.

Search agents play levels, their gameplay statistics become level features,
and two predictors turn those features into player pass and churn rates.
"""

__version__ = "0.1.0"
