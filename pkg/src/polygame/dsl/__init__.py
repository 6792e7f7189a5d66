"""Modeling language for polytopal stochastic games."""

from .ast import ModelAst, dump
from .expand import DEFAULT_STATE_CAP, command_polytope, expand, parse_state_id
from .parser import parse, parse_expression
from .printer import pretty
from .roborta import generate_roborta, roborta_source

__all__ = [
    "DEFAULT_STATE_CAP", "ModelAst", "command_polytope", "dump", "expand", "generate_roborta",
    "parse", "parse_expression", "parse_state_id", "pretty", "roborta_source",
]
