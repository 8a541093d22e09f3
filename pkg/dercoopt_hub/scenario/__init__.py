"""
Monte Carlo scenarios: renewable models, experiment runner and metrics
"""
