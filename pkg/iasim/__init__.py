"""
IASim - Experiments Package
"""
