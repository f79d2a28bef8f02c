"""Moving-window parameter estimation and robust regression."""
