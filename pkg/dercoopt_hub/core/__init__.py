"""
Core domain: tariffs, demand, storage and the co-optimization policy
"""
