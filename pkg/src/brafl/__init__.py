"""Bayesian robust aggregation for federated learning, with baselines, attacks and a desk-scale simulator."""
