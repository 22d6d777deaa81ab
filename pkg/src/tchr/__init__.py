"""Tabled logic programming with CHR-defined constraint domains."""
from .answers import (CombinatorSpec, GroundEnumeration, check_compaction, ground_cover,
                      tp_fixpoint)
from .bench import load_program, run_suite
from .codec import EncodedStore, canonicalize, encode_store
from .engine import BudgetExceeded, Engine
from .program import LoadError, Program, parse_program, parse_query
from .reader import ParseError, format_term, read_term

__all__ = [
    "Engine", "BudgetExceeded", "Program", "parse_program", "parse_query", "LoadError",
    "ParseError", "read_term", "format_term", "EncodedStore", "encode_store", "canonicalize",
    "CombinatorSpec", "GroundEnumeration", "tp_fixpoint", "ground_cover", "check_compaction",
    "load_program", "run_suite",
]
