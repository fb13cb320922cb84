"""Exact chain-level calculator for Taylor towers of functors.

Modules:
  fields, sparse, chain   -- exact linear algebra and homological primitives
  perms, equivariant      -- Young groups, orbits/fixed points, norm, Tate
  trees, operads          -- partition trees, bar constructions, the dual
                             tree operad, plethysm
  comonads                -- the Top and Sp comonads, K', nu
  coalgebras              -- coalgebra data, representables, divided powers
  tower                   -- cobar, fat Tot, box product, stages, derived
                             hom, the Bousfield-Kan E^1 page
  classify                -- 2-/3-excisive classification and validators
  serialize, cli          -- JSON interchange and the batch interface
"""

from .chain import ChainComplex, ChainMap, ChainHomotopy, DegreeWindow
from .fields import F2, F3, QQ, FieldSpec, field_from_name
from .sparse import SparseMatrix
from .perms import YoungGroup
from .equivariant import (
    EquivariantComplex, WindowedResult, homotopy_fixed, homotopy_orbits,
    is_free, norm_map, permutation_module, strict_fixed, strict_orbits, tate,
    tensor_power,
)
from .operads import (
    Cooperad, Operad, RightModule, SymmetricSequence, bar_construction,
    commutative_operad, partition_poset_nerve, plethysm, spectral_lie,
    tree_cooperad, validate_right_module,
)
from .comonads import (
    KPrimeComonad, module_comonad_kprime, SpComonad, TopComonad, counit_check, k_sp, k_sp_component,
    k_top, k_top_component, l3_complex, nu_component,
)
from .coalgebras import (
    FinitePointedSet, TruncatedCoalgebra, divided_power_check,
    evaluation_pairing_check, representable_module, truncate_coalgebra,
    trivial_coalgebra, validate_coalgebra,
)
from .tower import (
    CosimplicialComplex, bk_e1, box_product, cobar, derived_hom, fat_tot,
    lemma_ij_check, p_n, tower_map,
)
from .classify import (
    classify_2exc_sp, classify_2exc_top, classify_3exc_sp,
    mccarthy_square_check, splitting_check, validate_2exc_sp_to_top,
    validate_2exc_top_to_top,
)
