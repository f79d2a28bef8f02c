"""Market drivers: endogenous, five-factor exogenous and higher-moment fits."""
