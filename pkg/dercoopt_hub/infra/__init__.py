"""
Infrastructure layer for DER co-optimization hub
"""
