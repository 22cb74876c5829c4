"""Safe evaluator for the small arithmetic grammar used in JSON configs.

Supported: numbers, the variable ``t``, ``+ - * / ^`` (``**`` also accepted),
unary minus, parentheses and the functions ``exp``, ``log``, ``sqrt``.
Expressions compile to numpy-vectorised callables.
"""

import ast

import numpy as np

from .errors import ConfigError

_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _check(node):
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ConfigError("only unary +/- allowed")
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ConfigError("only exp, log, sqrt may be called")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes one argument")
        _check(node.args[0])
    elif isinstance(node, ast.Name):
        if node.id != "t":
            raise ConfigError(f"unknown variable {node.id!r}; only 't' is defined")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ConfigError(f"bad constant {node.value!r}")
    else:
        raise ConfigError(f"syntax {type(node).__name__} not allowed")


def _eval(node, t):
    if isinstance(node, ast.Expression):
        return _eval(node.body, t)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, t), _eval(node.right, t))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, t)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], t))
    if isinstance(node, ast.Name):
        return t
    return float(node.value)


def compile_expression(text):
    """Compile ``text`` into a function of ``t`` (scalar or ndarray)."""
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from exc
    _check(tree)

    def func(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = _eval(tree, t) * np.ones_like(t)
        return out if out.ndim else float(out)

    func.__doc__ = f"nu(t) = {text}"
    func.expression = text
    return func
