"""MPST!: multiparty session types with replication and first-class roles.

Parsing, typechecking against runtime properties, behavioural-set
exploration, syntactic finiteness strategies and an interpreter.
"""
from __future__ import annotations

from .context import Context, assoc
from .diagnostics import Diagnostic, ParseError
from .interp import fidelity_check, normalize, run, run_program, subject_reduction_check
from .parser import Program, parse, parse_file, parse_process, parse_protocol, parse_type
from .safety import PROPERTIES, check_property, compute_beh
from .strategy import analyse, crcps, loop_free, triv_finite
from .subtype import is_subtype
from .typecheck import typecheck_program

__version__ = "0.1.0"
