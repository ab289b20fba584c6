"""
Interface en ligne de commande: configuration des runs, forces prédéfinies, commandes.
"""
from src.cli.run_config import RunConfig, load_run_config, apply_overrides, VERIFY_STAGES, KERNEL_KINDS
from src.cli.presets import PRESETS, ForcePreset, build_force
from src.cli.commands import (
    COMMANDS, EXIT_OK, EXIT_VERIFICATION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NONCONTRACTION,
    exit_code_for, cmd_kernel_probe, cmd_linear_solve, cmd_divform_solve,
    cmd_nonlinear_solve, cmd_verify,
)
