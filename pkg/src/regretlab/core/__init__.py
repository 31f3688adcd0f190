"""Numerical core: models, simulation, Riccati solvers, synthesis and regret bounds."""
