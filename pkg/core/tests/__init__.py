"""
Test package for core app
"""
