"""A tiny reference interpreter for subset expressions and straight-line
statements. Used as the independent oracle when checking that inspection
rewrites preserve semantics; deliberately unrelated to the rewrite engine.
"""

from stepwise import syntax as syn


def eval_expr(expr, env):
    if isinstance(expr, syn.IntLit):
        return expr.value
    if isinstance(expr, syn.BoolLit):
        return expr.value
    if isinstance(expr, syn.StringLit):
        return expr.value
    if isinstance(expr, syn.NameRef):
        return env[expr.name]
    if isinstance(expr, syn.Unary):
        value = eval_expr(expr.operand, env)
        return (not value) if expr.op == "!" else -value
    if isinstance(expr, syn.RangeExpr):
        return (eval_expr(expr.low, env), eval_expr(expr.high, env))
    if isinstance(expr, syn.Binary):
        left = eval_expr(expr.left, env)
        if expr.op == "&&":
            return bool(left) and bool(eval_expr(expr.right, env))
        if expr.op == "||":
            return bool(left) or bool(eval_expr(expr.right, env))
        right = eval_expr(expr.right, env)
        ops = {
            "+": lambda a, b: a + b,
            "-": lambda a, b: a - b,
            "*": lambda a, b: a * b,
            "/": lambda a, b: int(a / b),
            "%": lambda a, b: a - b * int(a / b),
            "==": lambda a, b: a == b,
            "!=": lambda a, b: a != b,
            "<": lambda a, b: a < b,
            "<=": lambda a, b: a <= b,
            ">": lambda a, b: a > b,
            ">=": lambda a, b: a >= b,
            "in": lambda a, b: b[0] <= a <= b[1],
        }
        return ops[expr.op](left, right)
    raise TypeError(f"cannot evaluate {type(expr).__name__}")


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def run_statements(stmts, env):
    """Execute straight-line statements; returns (return value, println log)."""
    output = []

    def run(statements):
        for st in statements:
            if isinstance(st, syn.VarDecl):
                env[st.name] = eval_expr(st.value, env)
            elif isinstance(st, syn.Assign):
                value = eval_expr(st.value, env)
                if st.op == "=":
                    env[st.target] = value
                else:
                    base = env[st.target]
                    env[st.target] = eval_expr(
                        syn.Binary(op=st.op[0], left=syn.IntLit(value=base),
                                   right=syn.IntLit(value=value)), env)
            elif isinstance(st, syn.ExprStmt):
                expr = st.expr
                if isinstance(expr, syn.Call) and expr.name == "println":
                    output.append(eval_expr(expr.args[0], env) if expr.args else "")
                else:
                    eval_expr(expr, env)
            elif isinstance(st, syn.ReturnStmt):
                raise _Return(None if st.value is None else eval_expr(st.value, env))
            elif isinstance(st, syn.IfStmt):
                if eval_expr(st.condition, env):
                    run(st.then_block.statements)
                elif st.else_block is not None:
                    run(st.else_block.statements)
            else:
                raise TypeError(f"oracle cannot run {type(st).__name__}")

    try:
        run(stmts)
    except _Return as ret:
        return ret.value, output
    return None, output


def assignments(domains: dict):
    """Cartesian product of variable domains as env dicts."""
    names = sorted(domains)
    envs = [{}]
    for name in names:
        envs = [dict(env, **{name: value}) for env in envs for value in domains[name]]
    return envs


INT_GRID = list(range(-100, 101, 20)) + [-1, 0, 1, 2, 11, 12, 13, 99]
BOOLS = [True, False]
