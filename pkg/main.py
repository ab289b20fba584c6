#!/usr/bin/env python3
"""
rotflow
=======
Point d'entrée principal: écoulements de Stokes et Navier-Stokes dans un
repère tournant autour d'un obstacle, comportement asymptotique et audits.

Usage:
    python main.py kernel-probe --config run.ini          # Gamma_a, grad Gamma_a, K, H ou B
    python main.py linear-solve --config run.ini          # problème linéaire, force ponctuelle
    python main.py divform-solve --set force.preset=divform_gauss
    python main.py nonlinear-solve --config run.ini       # itération de Picard
    python main.py verify --out output/verify             # batterie de contrôles

Options communes:
    --config FICHIER     configuration INI (sections run, force, probes, budget, nonlinear, output)
    --set SECTION.CLE=V  surcharge une valeur (répétable)
    --out DOSSIER        dossier de sortie (défaut: ROTFLOW_OUTPUT_DIR)
    --threads N          nombre de workers (0 = automatique)
    --json-only          pas de CSV, les lignes vont dans le JSON

Codes de sortie: 0 succès, 1 vérification en échec, 2 configuration invalide,
3 échec numérique, 4 non-contraction de Picard.
"""

import argparse
import os
import sys

# Fix encodage Windows
if sys.platform == 'win32':
    sys.stdout.reconfigure(encoding='utf-8', errors='replace')

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.logging_config import setup_logging
setup_logging()

from src.cli.commands import COMMANDS, EXIT_CONFIG, exit_code_for
from src.cli.run_config import load_run_config
from src.errors import RotflowError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='rotflow',
        description="Stokes / Navier-Stokes en repère tournant: solveurs et vérifications",
    )
    sub = parser.add_subparsers(dest='command', metavar='commande')
    for name, fn in COMMANDS.items():
        cmd = sub.add_parser(name, help=(fn.__doc__ or '').strip().splitlines()[0])
        cmd.add_argument('--config', help="fichier de configuration INI")
        cmd.add_argument('--set', dest='overrides', action='append', default=[],
                         metavar='SECTION.CLE=VALEUR', help="surcharge une valeur (répétable)")
        cmd.add_argument('--out', help="dossier de sortie")
        cmd.add_argument('--threads', type=int, help="nombre de workers")
        cmd.add_argument('--json-only', action='store_true', default=None,
                         help="n'écrit que les fichiers JSON")
    return parser


def run(argv=None) -> int:
    """Exécute la commande demandée et retourne le code de sortie."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    print("\nrotflow")
    print("=" * 50)

    try:
        cfg = load_run_config(args.config, args.overrides, output_dir=args.out,
                              threads=args.threads, json_only=args.json_only)
        print(f"\n[ETAPE] {args.command} -> {cfg.output_dir}")
        code = COMMANDS[args.command](cfg)
    except RotflowError as e:
        code = exit_code_for(e)
        print(f"\n[ERREUR] {e} (code {code})")
        return code

    if code == 0:
        print(f"\n[OK] {args.command} terminé")
    else:
        print(f"\n[ECHEC] {args.command}: code {code}")
    print("=" * 50)
    return code


if __name__ == "__main__":
    sys.exit(run())
