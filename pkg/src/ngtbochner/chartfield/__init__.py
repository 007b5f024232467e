"""Periodic charts, the scalar expression language and order-2 jet arithmetic."""

from .expr import (
    Binary,
    Const,
    Coord,
    CoordinateRangeError,
    ExprError,
    ExprNode,
    ExprSyntaxError,
    NonIntegerExponentError,
    Unary,
    UnknownIdentifierError,
    eval_jet,
    evaluate,
    evaluate_array,
    evaluate_values,
    format_expr,
    parse_expr,
)
from .jets import (
    BudgetError,
    Jet2Scalar,
    JetArray,
    JetDivisionError,
    inverse,
    jein,
    jet_derivative,
    stack,
)
from .torus import GRID_CAP, GridCapError, Point, TorusChart, grid_coordinates, integrate, iter_chunks, sample_grid

__all__ = [
    "Binary",
    "BudgetError",
    "Const",
    "Coord",
    "CoordinateRangeError",
    "ExprError",
    "ExprNode",
    "ExprSyntaxError",
    "GRID_CAP",
    "GridCapError",
    "Jet2Scalar",
    "JetArray",
    "JetDivisionError",
    "NonIntegerExponentError",
    "Point",
    "TorusChart",
    "Unary",
    "UnknownIdentifierError",
    "eval_jet",
    "evaluate",
    "evaluate_array",
    "evaluate_values",
    "format_expr",
    "grid_coordinates",
    "integrate",
    "inverse",
    "iter_chunks",
    "jein",
    "jet_derivative",
    "parse_expr",
    "sample_grid",
    "stack",
]
