# Rotflow - Stokes et Navier-Stokes plans en repère tournant
