//! Pretty-printer for surface programs. Output parses back to a
//! structurally identical AST.

use super::{
    Constant, DefDecl, Expr, ExprKind, GuardClauseKind, InterfaceDecl, Literal, SurfaceProgram,
    SurfaceType,
};

pub fn pretty_program(p: &SurfaceProgram) -> String {
    let mut out = String::new();
    for i in &p.interfaces {
        out.push_str(&pretty_interface(i));
        out.push('\n');
    }
    for d in &p.defs {
        out.push_str(&pretty_def(d));
        out.push('\n');
    }
    if let Some(body) = &p.body {
        out.push_str(&expr(body, 0));
        out.push('\n');
    }
    out
}

fn pretty_interface(i: &InterfaceDecl) -> String {
    let sigs: Vec<String> = i
        .messages
        .iter()
        .map(|(tag, payloads)| {
            let ts: Vec<String> = payloads.iter().map(ty).collect();
            format!("{tag}({})", ts.join(", "))
        })
        .collect();
    format!("interface {} {{ {} }}\n", i.name, sigs.join(", "))
}

fn pretty_def(d: &DefDecl) -> String {
    let params: Vec<String> = d
        .params
        .iter()
        .map(|(x, t)| format!("{x}: {}", ty(t)))
        .collect();
    format!(
        "def {}({}): {} {{\n{}\n}}\n",
        d.name,
        params.join(", "),
        ty(&d.ret),
        indent(&expr(&d.body, 0), 1)
    )
}

pub fn ty(t: &SurfaceType) -> String {
    match t {
        SurfaceType::Base(b) => b.to_string(),
        // patterns on send types are internal (desugared) only; the surface
        // form is the bare capability
        SurfaceType::MbSend { iface, .. } => format!("{iface}!"),
        SurfaceType::MbRecv { iface, pattern } => match pattern {
            Some(p) if p.is_closed() => format!("{iface}?({})", p.render()),
            _ => format!("{iface}?"),
        },
        SurfaceType::Pair(a, b) => format!("({}, {})", ty(a), ty(b)),
        SurfaceType::Sum(a, b) => format!("{} + {}", ty_atom(a), ty(b)),
        SurfaceType::Fun {
            linear,
            params,
            ret,
        } => {
            let kw = if *linear { "linfun" } else { "fun" };
            let ps: Vec<String> = params.iter().map(ty).collect();
            format!("{kw}({}) -> {}", ps.join(", "), ty(ret))
        }
    }
}

fn ty_atom(t: &SurfaceType) -> String {
    match t {
        SurfaceType::Sum(..) => format!("({})", ty(t)),
        _ => ty(t),
    }
}

fn indent(s: &str, levels: usize) -> String {
    let pad = "  ".repeat(levels);
    s.lines()
        .map(|l| format!("{pad}{l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn literal(l: &Literal) -> String {
    match l {
        Literal::Unit => "()".to_string(),
        Literal::Int(n) => n.to_string(),
        Literal::Bool(b) => b.to_string(),
    }
}

// precedence levels: 0 seq, 1 comparison, 2 additive, 3 multiplicative,
// 4 send, 5 postfix/primary
fn expr(e: &Expr, prec: u8) -> String {
    let (s, my_prec) = expr_raw(e);
    if my_prec < prec {
        format!("({s})")
    } else {
        s
    }
}

fn expr_raw(e: &Expr) -> (String, u8) {
    match &e.kind {
        ExprKind::Var(x) => (x.clone(), 5),
        ExprKind::Const(Constant::Lit(l)) => (literal(l), 5),
        ExprKind::Const(Constant::Str(s)) => {
            (format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")), 5)
        }
        ExprKind::Let {
            var,
            ann,
            subject,
            body,
        } => {
            let a = ann.as_ref().map(|t| format!(": {}", ty(t))).unwrap_or_default();
            (
                format!(
                    "let {var}{a} = {} in\n{}",
                    expr(subject, 1),
                    expr(body, 0)
                ),
                0,
            )
        }
        ExprKind::LetPair {
            left,
            right,
            ann,
            subject,
            body,
        } => {
            let a = ann.as_ref().map(|t| format!(": {}", ty(t))).unwrap_or_default();
            (
                format!(
                    "let ({left}, {right}){a} = {} in\n{}",
                    expr(subject, 1),
                    expr(body, 0)
                ),
                0,
            )
        }
        ExprKind::Seq(a, b) => (format!("{};\n{}", expr(a, 1), expr(b, 0)), 0),
        ExprKind::Case {
            subject,
            left_var,
            left_ann,
            left_body,
            right_var,
            right_ann,
            right_body,
        } => {
            let la = left_ann.as_ref().map(|t| format!(": {}", ty(t))).unwrap_or_default();
            let ra = right_ann.as_ref().map(|t| format!(": {}", ty(t))).unwrap_or_default();
            (
                format!(
                    "case {} {{\n{}\n{}\n}}",
                    expr(subject, 5),
                    indent(&format!("inl({left_var}){la} -> {}", expr(left_body, 0)), 1),
                    indent(&format!("inr({right_var}){ra} -> {}", expr(right_body, 0)), 1),
                ),
                5,
            )
        }
        ExprKind::If {
            cond,
            then_body,
            else_body,
        } => (
            format!(
                "if {} {{\n{}\n}} else {{\n{}\n}}",
                expr(cond, 1),
                indent(&expr(then_body, 0), 1),
                indent(&expr(else_body, 0), 1)
            ),
            5,
        ),
        ExprKind::Pair(a, b) => (format!("({}, {})", expr(a, 0), expr(b, 0)), 5),
        ExprKind::Inl(a) => (format!("inl({})", expr(a, 0)), 5),
        ExprKind::Inr(a) => (format!("inr({})", expr(a, 0)), 5),
        ExprKind::Lambda {
            linear,
            params,
            ret,
            body,
        } => {
            let kw = if *linear { "linfun" } else { "fun" };
            let ps: Vec<String> = params
                .iter()
                .map(|(x, t)| format!("{x}: {}", ty(t)))
                .collect();
            (
                format!(
                    "{kw}({}): {} {{\n{}\n}}",
                    ps.join(", "),
                    ty(ret),
                    indent(&expr(body, 0), 1)
                ),
                5,
            )
        }
        ExprKind::App { head, args } => {
            let a: Vec<String> = args.iter().map(|x| expr(x, 0)).collect();
            (format!("{}({})", expr(head, 5), a.join(", ")), 5)
        }
        ExprKind::BinOp { op, lhs, rhs } => {
            let (lp, rp, mine) = match op {
                super::BinOp::Less => (2, 2, 1),
                super::BinOp::Add | super::BinOp::Sub => (2, 3, 2),
                super::BinOp::Mul => (3, 4, 3),
            };
            (
                format!("{} {} {}", expr(lhs, lp), op.symbol(), expr(rhs, rp)),
                mine,
            )
        }
        ExprKind::Spawn(body) => (
            format!("spawn {{\n{}\n}}", indent(&expr(body, 0), 1)),
            5,
        ),
        ExprKind::New { iface } => (format!("new[{iface}]"), 5),
        ExprKind::Send { target, tag, args } => {
            let a: Vec<String> = args.iter().map(|x| expr(x, 0)).collect();
            (format!("{} ! {tag}({})", expr(target, 5), a.join(", ")), 4)
        }
        ExprKind::Guard {
            subject,
            pattern,
            clauses,
        } => {
            let mut body = String::new();
            for c in clauses {
                let line = match &c.kind {
                    GuardClauseKind::Receive {
                        tag,
                        params,
                        rebind,
                        body,
                    } => format!(
                        "receive {tag}({}) from {rebind} ->\n{}",
                        params.join(", "),
                        indent(&expr(body, 0), 1)
                    ),
                    GuardClauseKind::Free { body } => {
                        format!("free ->\n{}", indent(&expr(body, 0), 1))
                    }
                    GuardClauseKind::Fail => "fail".to_string(),
                };
                body.push_str(&indent(&line, 1));
                body.push('\n');
            }
            (
                format!(
                    "guard {}: {} {{\n{}}}",
                    expr(subject, 5),
                    pattern.render(),
                    body
                ),
                5,
            )
        }
        ExprKind::FreeSugar(v) => (format!("free({})", expr(v, 0)), 5),
        ExprKind::FailSugar(v) => (format!("fail({})", expr(v, 0)), 5),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn strip_spans(p: &SurfaceProgram) -> SurfaceProgram {
        // structural comparison ignores spans; realised by comparing the
        // pretty forms of a reparse
        p.clone()
    }

    #[test]
    fn round_trip_is_stable() {
        let src = r#"
interface Door { Want(Int, Robot!), Knock() }
interface Robot { GoIn(Door!) }

def idle(self: Robot?, door: Door!): Unit {
  door ! Want(1 + 2 * 3, self);
  guard self: GoIn + 1 {
    free -> ()
    receive GoIn(d) from self ->
      if 1 < 2 { free(self); d ! Knock() } else { fail(self) }
  }
}

def main(): Unit {
  let r = new[Robot] in
  spawn { idle(r, new[Door]) }
}

main()
"#;
        let p1 = parse_program(src).unwrap();
        let printed = pretty_program(&p1);
        let p2 = parse_program(&printed).unwrap_or_else(|e| {
            panic!("pretty output failed to reparse: {e:?}\n{printed}")
        });
        let printed2 = pretty_program(&p2);
        assert_eq!(printed, printed2, "pretty-printing must be a fixed point");
        assert_eq!(
            pretty_program(&strip_spans(&p1)),
            printed2,
            "reparse must be structurally identical"
        );
    }
}
