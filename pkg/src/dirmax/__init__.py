"""dirmax: exact restricted directional maximal operators on the dyadic square.

Everything numeric in the core is an exact dyadic rational (or exact
Fraction where odd denominators are forced); floats appear only in fits and
reports.
"""

from .dyadic import DyadicRational
from .geometry import (
    DyadicInterval,
    GridSpec,
    Parallelogram,
    SlopeCell,
    Window,
    overlap_measure,
    union_measure,
)
from .grids import (
    GridFunction,
    OneVarField,
    RationalGrid,
    average,
    integrate,
    parse_field,
    parse_grid,
    render_field,
    render_grid,
)
from .family import (
    FamilyParams,
    GoodnessWitness,
    RectangleFamily,
    allowable_slopes,
    enumerate_family,
    g_measure,
    is_dense,
    is_good_collection,
    theta,
    v_measure,
)
from .maximal import (
    ChoiceMap,
    NormReport,
    apply_T,
    apply_T_adjoint,
    estimate_norm,
    linearize,
    m2_vertical,
    maximal_apply,
    nu,
    rayleigh_ratio,
)
from .stopping_time import (
    DecompositionResult,
    GenerationRecord,
    SlopeAssignment,
    ThetaPair,
    carleson_sum,
    classify_points,
    compute_assignments,
    decomposition_to_json,
    domination_check,
    omega_levels,
    partition_theta,
    run_generations,
    stopping_intervals,
)
from .badness import (
    BadnessTable,
    ShrinkTrace,
    badness,
    badness_table,
    in_out_split,
    multi_collection_experiment,
    reformulate_check,
    select_bad_windows,
    shrink_iterate,
    shrink_once,
)
from .instances import (
    build_corpus,
    cascade_field,
    identity_field,
    make_kakeya_bundle,
    make_kakeya_instance,
    make_square_instance,
    organized_collections,
    random_field,
    random_grid,
)
from .sweeps import ExperimentConfig, sweep_delta, sweep_logn, sweep_lp
from .verify import run_verify
from .cli import cli_main

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
