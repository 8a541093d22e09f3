"""
Benchmarks for the co-optimization policy: exact DP, perfect-foresight bound,
MPC and heuristic customer types
"""
