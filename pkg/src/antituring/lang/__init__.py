from antituring.lang.compiler import CompileError, Compiler, Request, compile_request
from antituring.lang.lexer import ParseError, Token, tokenize
from antituring.lang.parser import RequestAst, format_program, format_request, parse_program

__all__ = [
    "CompileError",
    "Compiler",
    "ParseError",
    "Request",
    "RequestAst",
    "Token",
    "compile_request",
    "format_program",
    "format_request",
    "parse_program",
    "tokenize",
]
