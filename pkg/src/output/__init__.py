"""
Artefacts de sortie: CSV, JSON et schéma des colonnes.
"""
from src.output.writers import (
    COLUMN_SCHEMA, KERNEL_COLUMNS, NONLINEAR_COLUMNS, SOLUTION_COLUMNS,
    format_value, to_jsonable, write_csv, write_json, write_schema,
)
