"""First-order (term-modal) dynamic epistemic logic: models, action models,
product update, planning and reduction to the static language."""

from .syntax import (
    AGT, OBJ, AGT_OR_OBJ, Signature, Var, Const, Apply, XSTAR,
    Atom, Top, Bottom, Not, And, Or, Implies, Iff, Knows, Forall, Exists, Neq, Dyn,
    TOP, BOTTOM, Eq, conj, disj, free_vars, substitute, well_formed,
)
from .semantics import EpistemicModel, PointedModel, satisfies, holds, extension, isomorphic
from .dynamics import (
    ActionModel, ActionSchema, product_update, update_pointed, applicable, instantiate,
    ground_all, compose,
)
from .dsl import parse_domain, parse_problem, load_task, parse_infix
from .planning import PlanningTask, SearchConfig, find_plan, verify_plan, NoneWithinBound
from .reduction import complexity, translate, reduce_step, check_equivalence

__version__ = "0.1.0"
