"""
Results Database Package

Polars schemas for every emitted table and a DuckDB store that collects
sweep cells and run summaries across invocations.
"""
