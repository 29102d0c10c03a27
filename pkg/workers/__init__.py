"""
IASim - Workers Package
"""
