"""
Command line interface for DER co-optimization hub
"""
