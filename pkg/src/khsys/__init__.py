"""Relative operator theory on finite Hilbert bundles and finite measure-preserving systems."""
from .errors import *  # noqa: F401,F403
from .stone import BaseSet, Idempotent, StoneElement, support_of, invert_on_support
from .khmod import (KhModuleShape, KhVector, inner_product, lattice_norm, normalize,
                    gram_schmidt, extend_to_basis, project_onto, dimension_function,
                    homogeneous_components)
from .homs import (ModuleHom, HsElement, apply, adjoint, op_lattice_norm, hs_inner, hs_norm,
                   rank_one, tensor_to_hs, hs_to_tensor)
from .spectral import SpectralDecomposition, mean_ergodic_projection, spectral_decompose
from .gsystem import (BaseAction, GSystem, apply_group, fixed_submodule, intertwiner_basis,
                      ds_wm_decomposition, equivariant_spectral)
from .measure import (FiniteProbSpace, MpSystem, FiniteExtension, MarkovOperator,
                      conditional_expectation, conditional_module, coupling_from_markov,
                      rel_indep_joining, tensor_joining_iso, extensions_equivalent)
from .structure import (KroneckerReport, TowerReport, kronecker_subspace,
                        orthogonality_criteria, folner_diagnostic, is_weakly_mixing,
                        furstenberg_tower, shift_correlations)

__version__ = "0.1.0"
