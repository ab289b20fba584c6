"""
Configuration centralisée de rotflow.
Toutes les variables sont configurables via variables d'environnement.
"""
import os

# Logging
LOG_LEVEL = os.environ.get('ROTFLOW_LOG_LEVEL', 'INFO').upper()

# Sorties (CSV / JSON)
OUTPUT_DIR = os.environ.get('ROTFLOW_OUTPUT_DIR', 'output')

# Parallélisme (0 = nombre de coeurs de la machine)
THREADS = int(os.environ.get('ROTFLOW_THREADS', '0'))

# Budgets de quadrature
BUDGET_SCALE = float(os.environ.get('ROTFLOW_BUDGET_SCALE', '1.0'))
ABS_TOL = float(os.environ.get('ROTFLOW_ABS_TOL', '1e-8'))
REL_TOL = float(os.environ.get('ROTFLOW_REL_TOL', '1e-6'))
MAX_EVALS = int(os.environ.get('ROTFLOW_MAX_EVALS', '2000000'))
MAX_PERIODS = int(os.environ.get('ROTFLOW_MAX_PERIODS', '4096'))
TRUNCATION_CAP = float(os.environ.get('ROTFLOW_TRUNCATION_CAP', '128'))

# Noyaux
SERIES_SWITCH_RADIUS = float(os.environ.get('ROTFLOW_SERIES_SWITCH', '1e-3'))
GRADIENT_FD_STEP = float(os.environ.get('ROTFLOW_GRADIENT_FD_STEP', '1e-4'))

# Version du format des rapports JSON
SCHEMA_VERSION = "1.0"
