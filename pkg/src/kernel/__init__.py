"""
Noyaux du problème de Stokes tournant: G, H, K, B, L et Gamma_a.
"""
from src.kernel.geometry import IDENTITY, perp, outer, norm2, rotation, rotate
from src.kernel.kernels import (
    KernelEvalConfig, DEFAULT_KERNEL_CONFIG,
    gauss, kernel_H, kernel_K, kernel_B, b_prefactor, grad_kernel_K,
    leading_kernel, grad_leading_kernel, mirrored_leading_kernel,
)
from src.kernel.fundamental import (
    fundamental_solution, fundamental_solution_batch,
    grad_fundamental_solution, grad_fundamental_solution_batch, grad_fundamental_solution_fd,
    gradient_time_integral, b_time_integral, head_cutoff, far_field_bound_shape,
)

__all__ = [
    'IDENTITY', 'perp', 'outer', 'norm2', 'rotation', 'rotate',
    'KernelEvalConfig', 'DEFAULT_KERNEL_CONFIG',
    'gauss', 'kernel_H', 'kernel_K', 'kernel_B', 'b_prefactor', 'grad_kernel_K',
    'leading_kernel', 'grad_leading_kernel', 'mirrored_leading_kernel',
    'fundamental_solution', 'fundamental_solution_batch',
    'grad_fundamental_solution', 'grad_fundamental_solution_batch', 'grad_fundamental_solution_fd',
    'gradient_time_integral', 'b_time_integral', 'head_cutoff', 'far_field_bound_shape',
]
