//! Recursive descent parser for `.pat` source.

use crate::diag::{Diagnostic, Phase};
use crate::patterns::Pattern;
use crate::span::Span;

use super::lexer::{lex, Token, TokenKind};
use super::{
    BaseType, BinOp, Constant, DefDecl, Expr, ExprKind, GuardClause, GuardClauseKind,
    InterfaceDecl, Literal, SurfaceProgram, SurfaceType,
};

/// Parse a whole program: interfaces, then definitions, then an optional
/// body expression.
pub fn parse_program(source: &str) -> Result<SurfaceProgram, Diagnostic> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };

    let mut interfaces = Vec::new();
    while p.peek() == &TokenKind::Interface {
        interfaces.push(p.interface_decl()?);
    }
    let mut defs = Vec::new();
    while p.peek() == &TokenKind::Def {
        defs.push(p.def_decl()?);
    }
    let body = if p.peek() != &TokenKind::Eof {
        Some(p.expr()?)
    } else {
        None
    };
    p.expect(TokenKind::Eof)?;

    check_duplicates(&interfaces, &defs)?;
    Ok(SurfaceProgram {
        interfaces,
        defs,
        body,
        next_pattern_var: 0,
    })
}

fn check_duplicates(interfaces: &[InterfaceDecl], defs: &[DefDecl]) -> Result<(), Diagnostic> {
    let mut seen = std::collections::HashSet::new();
    for i in interfaces {
        if ["Unit", "Int", "String", "Bool"].contains(&i.name.as_str()) {
            return Err(Diagnostic::error(
                Phase::Parse,
                format!("interface name {} shadows a base type", i.name),
            )
            .at(i.span));
        }
        if !seen.insert(i.name.clone()) {
            return Err(
                Diagnostic::error(Phase::Parse, format!("duplicate interface {}", i.name))
                    .at(i.span),
            );
        }
        let mut tags = std::collections::HashSet::new();
        for (tag, _) in &i.messages {
            if !tags.insert(tag.clone()) {
                return Err(Diagnostic::error(
                    Phase::Parse,
                    format!("duplicate tag {tag} in interface {}", i.name),
                )
                .at(i.span));
            }
        }
    }
    let mut names = std::collections::HashSet::new();
    for d in defs {
        if !names.insert(d.name.clone()) {
            return Err(Diagnostic::error(
                Phase::Parse,
                format!("duplicate definition {}", d.name),
            )
            .at(d.span));
        }
    }
    Ok(())
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, Diagnostic> {
        if self.peek() == &kind {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("expected `{kind}`")))
        }
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        Diagnostic::error(
            Phase::Parse,
            format!("{what}, found `{}`", self.peek()),
        )
        .at(self.span())
    }

    fn uid(&mut self) -> Result<String, Diagnostic> {
        match self.peek().clone() {
            TokenKind::Uid(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("expected an uppercase identifier")),
        }
    }

    fn lid(&mut self) -> Result<String, Diagnostic> {
        match self.peek().clone() {
            TokenKind::Lid(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("expected a lowercase identifier")),
        }
    }

    // -- Declarations --

    fn interface_decl(&mut self) -> Result<InterfaceDecl, Diagnostic> {
        let span = self.span();
        self.expect(TokenKind::Interface)?;
        let name = self.uid()?;
        self.expect(TokenKind::LBrace)?;
        let mut messages = Vec::new();
        loop {
            let tag = self.uid()?;
            self.expect(TokenKind::LParen)?;
            let mut payloads = Vec::new();
            if self.peek() != &TokenKind::RParen {
                payloads.push(self.ty()?);
                while self.peek() == &TokenKind::Comma {
                    self.bump();
                    payloads.push(self.ty()?);
                }
            }
            self.expect(TokenKind::RParen)?;
            messages.push((tag, payloads));
            if self.peek() == &TokenKind::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(TokenKind::RBrace)?;
        Ok(InterfaceDecl {
            name,
            messages,
            span,
        })
    }

    fn def_decl(&mut self) -> Result<DefDecl, Diagnostic> {
        let span = self.span();
        self.expect(TokenKind::Def)?;
        let name = self.lid()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if self.peek() != &TokenKind::RParen {
            loop {
                let p = self.lid()?;
                self.expect(TokenKind::Colon)?;
                let t = self.ty()?;
                params.push((p, t));
                if self.peek() == &TokenKind::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Colon)?;
        let ret = self.ty()?;
        self.expect(TokenKind::LBrace)?;
        let body = self.expr()?;
        self.expect(TokenKind::RBrace)?;
        Ok(DefDecl {
            name,
            params,
            ret,
            body,
            span,
        })
    }

    // -- Types --

    fn ty(&mut self) -> Result<SurfaceType, Diagnostic> {
        let first = self.ty_atom()?;
        if self.peek() == &TokenKind::Plus {
            self.bump();
            let rest = self.ty()?;
            Ok(SurfaceType::Sum(Box::new(first), Box::new(rest)))
        } else {
            Ok(first)
        }
    }

    fn ty_atom(&mut self) -> Result<SurfaceType, Diagnostic> {
        match self.peek().clone() {
            TokenKind::Uid(name) => {
                self.bump();
                match name.as_str() {
                    "Unit" => return Ok(SurfaceType::Base(BaseType::Unit)),
                    "Int" => return Ok(SurfaceType::Base(BaseType::Int)),
                    "String" => return Ok(SurfaceType::Base(BaseType::String)),
                    "Bool" => return Ok(SurfaceType::Base(BaseType::Bool)),
                    _ => {}
                }
                match self.peek() {
                    TokenKind::Bang => {
                        self.bump();
                        Ok(SurfaceType::MbSend {
                            iface: name,
                            pattern: None,
                        })
                    }
                    TokenKind::Question => {
                        self.bump();
                        let pattern = if self.peek() == &TokenKind::LParen {
                            self.bump();
                            let p = self.pattern()?;
                            self.expect(TokenKind::RParen)?;
                            Some(p)
                        } else {
                            None
                        };
                        Ok(SurfaceType::MbRecv {
                            iface: name,
                            pattern,
                        })
                    }
                    _ => Err(self.unexpected(&format!(
                        "expected `!` or `?` after interface {name} in type position"
                    ))),
                }
            }
            TokenKind::LParen => {
                self.bump();
                let a = self.ty()?;
                self.expect(TokenKind::Comma)?;
                let b = self.ty()?;
                self.expect(TokenKind::RParen)?;
                Ok(SurfaceType::Pair(Box::new(a), Box::new(b)))
            }
            TokenKind::Fun | TokenKind::LinFun => {
                let linear = self.peek() == &TokenKind::LinFun;
                self.bump();
                self.expect(TokenKind::LParen)?;
                let mut params = Vec::new();
                if self.peek() != &TokenKind::RParen {
                    params.push(self.ty()?);
                    while self.peek() == &TokenKind::Comma {
                        self.bump();
                        params.push(self.ty()?);
                    }
                }
                self.expect(TokenKind::RParen)?;
                self.expect(TokenKind::Arrow)?;
                let ret = self.ty()?;
                Ok(SurfaceType::Fun {
                    linear,
                    params,
                    ret: Box::new(ret),
                })
            }
            _ => Err(self.unexpected("expected a type")),
        }
    }

    // -- Patterns: `*` binds tighter than `.` binds tighter than `+` --

    fn pattern(&mut self) -> Result<Pattern, Diagnostic> {
        let mut acc = self.pattern_dot()?;
        while self.peek() == &TokenKind::Plus {
            self.bump();
            let rhs = self.pattern_dot()?;
            acc = Pattern::plus(acc, rhs);
        }
        Ok(acc)
    }

    fn pattern_dot(&mut self) -> Result<Pattern, Diagnostic> {
        let mut acc = self.pattern_star()?;
        while self.peek() == &TokenKind::Dot {
            self.bump();
            let rhs = self.pattern_star()?;
            acc = Pattern::dot(acc, rhs);
        }
        Ok(acc)
    }

    fn pattern_star(&mut self) -> Result<Pattern, Diagnostic> {
        if self.peek() == &TokenKind::Star {
            self.bump();
            let inner = self.pattern_star()?;
            Ok(Pattern::star(inner))
        } else {
            self.pattern_atom()
        }
    }

    fn pattern_atom(&mut self) -> Result<Pattern, Diagnostic> {
        match self.peek().clone() {
            TokenKind::Int(0) => {
                self.bump();
                Ok(Pattern::Zero)
            }
            TokenKind::Int(1) => {
                self.bump();
                Ok(Pattern::One)
            }
            TokenKind::Uid(tag) => {
                self.bump();
                Ok(Pattern::Tag(tag))
            }
            TokenKind::LParen => {
                self.bump();
                let p = self.pattern()?;
                self.expect(TokenKind::RParen)?;
                Ok(p)
            }
            _ => Err(self.unexpected("expected a pattern")),
        }
    }

    // -- Expressions --

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        if self.peek() == &TokenKind::Let {
            return self.let_expr();
        }
        let lhs = self.comparison()?;
        if self.peek() == &TokenKind::Semi {
            self.bump();
            let rhs = self.expr()?;
            Ok(Expr::new(ExprKind::Seq(Box::new(lhs), Box::new(rhs)), span))
        } else {
            Ok(lhs)
        }
    }

    fn let_expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        self.expect(TokenKind::Let)?;
        if self.peek() == &TokenKind::LParen {
            // let (x, y) [: T] = M in N
            self.bump();
            let left = self.lid()?;
            self.expect(TokenKind::Comma)?;
            let right = self.lid()?;
            self.expect(TokenKind::RParen)?;
            let ann = if self.peek() == &TokenKind::Colon {
                self.bump();
                Some(self.ty()?)
            } else {
                None
            };
            self.expect(TokenKind::Equals)?;
            let subject = self.expr()?;
            self.expect(TokenKind::In)?;
            let body = self.expr()?;
            Ok(Expr::new(
                ExprKind::LetPair {
                    left,
                    right,
                    ann,
                    subject: Box::new(subject),
                    body: Box::new(body),
                },
                span,
            ))
        } else {
            let var = self.lid()?;
            let ann = if self.peek() == &TokenKind::Colon {
                self.bump();
                Some(self.ty()?)
            } else {
                None
            };
            self.expect(TokenKind::Equals)?;
            let subject = self.expr()?;
            self.expect(TokenKind::In)?;
            let body = self.expr()?;
            Ok(Expr::new(
                ExprKind::Let {
                    var,
                    ann,
                    subject: Box::new(subject),
                    body: Box::new(body),
                },
                span,
            ))
        }
    }

    fn comparison(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let lhs = self.additive()?;
        if self.peek() == &TokenKind::Less {
            self.bump();
            let rhs = self.additive()?;
            Ok(Expr::new(
                ExprKind::BinOp {
                    op: BinOp::Less,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            ))
        } else {
            Ok(lhs)
        }
    }

    fn additive(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let mut acc = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.multiplicative()?;
            acc = Expr::new(
                ExprKind::BinOp {
                    op,
                    lhs: Box::new(acc),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(acc)
    }

    fn multiplicative(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let mut acc = self.send_expr()?;
        while self.peek() == &TokenKind::Star {
            self.bump();
            let rhs = self.send_expr()?;
            acc = Expr::new(
                ExprKind::BinOp {
                    op: BinOp::Mul,
                    lhs: Box::new(acc),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(acc)
    }

    fn send_expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let target = self.postfix()?;
        if self.peek() == &TokenKind::Bang {
            self.bump();
            let tag = self.uid()?;
            self.expect(TokenKind::LParen)?;
            let args = self.expr_args()?;
            self.expect(TokenKind::RParen)?;
            Ok(Expr::new(
                ExprKind::Send {
                    target: Box::new(target),
                    tag,
                    args,
                },
                span,
            ))
        } else {
            Ok(target)
        }
    }

    fn expr_args(&mut self) -> Result<Vec<Expr>, Diagnostic> {
        let mut args = Vec::new();
        if self.peek() != &TokenKind::RParen {
            args.push(self.expr()?);
            while self.peek() == &TokenKind::Comma {
                self.bump();
                args.push(self.expr()?);
            }
        }
        Ok(args)
    }

    fn postfix(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let mut acc = self.primary()?;
        while self.peek() == &TokenKind::LParen {
            self.bump();
            let args = self.expr_args()?;
            self.expect(TokenKind::RParen)?;
            acc = Expr::new(
                ExprKind::App {
                    head: Box::new(acc),
                    args,
                },
                span,
            );
        }
        Ok(acc)
    }

    fn primary(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        match self.peek().clone() {
            TokenKind::Int(n) => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(Constant::Lit(Literal::Int(n))), span))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(Constant::Str(s)), span))
            }
            TokenKind::True => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Const(Constant::Lit(Literal::Bool(true))),
                    span,
                ))
            }
            TokenKind::False => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Const(Constant::Lit(Literal::Bool(false))),
                    span,
                ))
            }
            TokenKind::Lid(x) => {
                self.bump();
                Ok(Expr::new(ExprKind::Var(x), span))
            }
            TokenKind::LParen => {
                self.bump();
                if self.peek() == &TokenKind::RParen {
                    self.bump();
                    return Ok(Expr::new(
                        ExprKind::Const(Constant::Lit(Literal::Unit)),
                        span,
                    ));
                }
                let first = self.expr()?;
                if self.peek() == &TokenKind::Comma {
                    self.bump();
                    let second = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(Expr::new(
                        ExprKind::Pair(Box::new(first), Box::new(second)),
                        span,
                    ))
                } else {
                    self.expect(TokenKind::RParen)?;
                    Ok(first)
                }
            }
            TokenKind::New => {
                self.bump();
                self.expect(TokenKind::LBracket)?;
                let iface = self.uid()?;
                self.expect(TokenKind::RBracket)?;
                Ok(Expr::new(ExprKind::New { iface }, span))
            }
            TokenKind::Spawn => {
                self.bump();
                self.expect(TokenKind::LBrace)?;
                let body = self.expr()?;
                self.expect(TokenKind::RBrace)?;
                Ok(Expr::new(ExprKind::Spawn(Box::new(body)), span))
            }
            TokenKind::Inl | TokenKind::Inr => {
                let is_left = self.peek() == &TokenKind::Inl;
                self.bump();
                self.expect(TokenKind::LParen)?;
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let kind = if is_left {
                    ExprKind::Inl(Box::new(inner))
                } else {
                    ExprKind::Inr(Box::new(inner))
                };
                Ok(Expr::new(kind, span))
            }
            TokenKind::Free => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::new(ExprKind::FreeSugar(Box::new(inner)), span))
            }
            TokenKind::Fail => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::new(ExprKind::FailSugar(Box::new(inner)), span))
            }
            TokenKind::Guard => self.guard_expr(),
            TokenKind::Case => self.case_expr(),
            TokenKind::If => self.if_expr(),
            TokenKind::Fun | TokenKind::LinFun => self.lambda_expr(),
            _ => Err(self.unexpected("expected an expression")),
        }
    }

    fn guard_expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        self.expect(TokenKind::Guard)?;
        let subject = self.postfix()?;
        self.expect(TokenKind::Colon)?;
        let pattern = self.pattern()?;
        self.expect(TokenKind::LBrace)?;
        let mut clauses = Vec::new();
        loop {
            let cspan = self.span();
            match self.peek() {
                TokenKind::Receive => {
                    self.bump();
                    let tag = self.uid()?;
                    self.expect(TokenKind::LParen)?;
                    let mut params = Vec::new();
                    if self.peek() != &TokenKind::RParen {
                        params.push(self.lid()?);
                        while self.peek() == &TokenKind::Comma {
                            self.bump();
                            params.push(self.lid()?);
                        }
                    }
                    self.expect(TokenKind::RParen)?;
                    self.expect(TokenKind::From)?;
                    let rebind = self.lid()?;
                    self.expect(TokenKind::Arrow)?;
                    let body = self.expr()?;
                    clauses.push(GuardClause {
                        kind: GuardClauseKind::Receive {
                            tag,
                            params,
                            rebind,
                            body: Box::new(body),
                        },
                        span: cspan,
                    });
                }
                TokenKind::Free => {
                    self.bump();
                    self.expect(TokenKind::Arrow)?;
                    let body = self.expr()?;
                    clauses.push(GuardClause {
                        kind: GuardClauseKind::Free {
                            body: Box::new(body),
                        },
                        span: cspan,
                    });
                }
                TokenKind::Fail => {
                    self.bump();
                    clauses.push(GuardClause {
                        kind: GuardClauseKind::Fail,
                        span: cspan,
                    });
                }
                TokenKind::RBrace => break,
                _ => return Err(self.unexpected("expected a guard clause or `}`")),
            }
        }
        self.expect(TokenKind::RBrace)?;
        check_clause_uniqueness(&clauses, span)?;
        Ok(Expr::new(
            ExprKind::Guard {
                subject: Box::new(subject),
                pattern,
                clauses,
            },
            span,
        ))
    }

    fn case_expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        self.expect(TokenKind::Case)?;
        let subject = self.postfix()?;
        self.expect(TokenKind::LBrace)?;
        self.expect(TokenKind::Inl)?;
        self.expect(TokenKind::LParen)?;
        let left_var = self.lid()?;
        self.expect(TokenKind::RParen)?;
        let left_ann = if self.peek() == &TokenKind::Colon {
            self.bump();
            Some(self.ty()?)
        } else {
            None
        };
        self.expect(TokenKind::Arrow)?;
        let left_body = self.expr()?;
        self.expect(TokenKind::Inr)?;
        self.expect(TokenKind::LParen)?;
        let right_var = self.lid()?;
        self.expect(TokenKind::RParen)?;
        let right_ann = if self.peek() == &TokenKind::Colon {
            self.bump();
            Some(self.ty()?)
        } else {
            None
        };
        self.expect(TokenKind::Arrow)?;
        let right_body = self.expr()?;
        self.expect(TokenKind::RBrace)?;
        Ok(Expr::new(
            ExprKind::Case {
                subject: Box::new(subject),
                left_var,
                left_ann,
                left_body: Box::new(left_body),
                right_var,
                right_ann,
                right_body: Box::new(right_body),
            },
            span,
        ))
    }

    fn if_expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        self.expect(TokenKind::If)?;
        let cond = self.comparison()?;
        self.expect(TokenKind::LBrace)?;
        let then_body = self.expr()?;
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::Else)?;
        self.expect(TokenKind::LBrace)?;
        let else_body = self.expr()?;
        self.expect(TokenKind::RBrace)?;
        Ok(Expr::new(
            ExprKind::If {
                cond: Box::new(cond),
                then_body: Box::new(then_body),
                else_body: Box::new(else_body),
            },
            span,
        ))
    }

    fn lambda_expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let linear = self.peek() == &TokenKind::LinFun;
        self.bump();
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if self.peek() != &TokenKind::RParen {
            loop {
                let x = self.lid()?;
                self.expect(TokenKind::Colon)?;
                let t = self.ty()?;
                params.push((x, t));
                if self.peek() == &TokenKind::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Colon)?;
        let ret = self.ty()?;
        self.expect(TokenKind::LBrace)?;
        let body = self.expr()?;
        self.expect(TokenKind::RBrace)?;
        Ok(Expr::new(
            ExprKind::Lambda {
                linear,
                params,
                ret,
                body: Box::new(body),
            },
            span,
        ))
    }

}

fn check_clause_uniqueness(clauses: &[GuardClause], span: Span) -> Result<(), Diagnostic> {
    let mut tags = std::collections::HashSet::new();
    let mut frees = 0;
    let mut fails = 0;
    for c in clauses {
        match &c.kind {
            GuardClauseKind::Receive { tag, .. } => {
                if !tags.insert(tag.clone()) {
                    return Err(Diagnostic::error(
                        Phase::Parse,
                        format!("duplicate receive clause for tag {tag}"),
                    )
                    .at(c.span));
                }
            }
            GuardClauseKind::Free { .. } => frees += 1,
            GuardClauseKind::Fail => fails += 1,
        }
    }
    if frees > 1 || fails > 1 {
        return Err(
            Diagnostic::error(Phase::Parse, "guard clauses must be unique").at(span),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_guard_with_pattern_sugar() {
        let src = r#"
interface W { Prepare(Int) }
def empty(self: W?): Unit {
  guard self: Prepare + 1 {
    free -> ()
    receive Prepare(n) from self -> ()
  }
}
"#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.defs.len(), 1);
        let body = &p.defs[0].body;
        match &body.kind {
            ExprKind::Guard {
                pattern, clauses, ..
            } => {
                assert_eq!(*pattern, Pattern::plus(Pattern::tag("Prepare"), Pattern::One));
                assert_eq!(clauses.len(), 2);
                assert!(matches!(clauses[0].kind, GuardClauseKind::Free { .. }));
                assert!(
                    matches!(&clauses[1].kind, GuardClauseKind::Receive { tag, .. } if tag == "Prepare")
                );
            }
            other => panic!("expected a guard, got {other:?}"),
        }
    }

    #[test]
    fn minimal_def() {
        let p = parse_program("def f(): Unit { () }").unwrap();
        assert_eq!(p.defs.len(), 1);
        assert!(p.defs[0].params.is_empty());
        assert!(matches!(
            p.defs[0].body.kind,
            ExprKind::Const(Constant::Lit(Literal::Unit))
        ));
    }

    #[test]
    fn pattern_precedence_star_dot_plus() {
        let src = "def f(x: M?(Inside.Prepared.*Want)): Unit { () }";
        let p = parse_program(src).unwrap();
        let SurfaceType::MbRecv { pattern, .. } = &p.defs[0].params[0].1 else {
            panic!("expected receive type");
        };
        let expected = Pattern::dot(
            Pattern::tag("Inside"),
            Pattern::dot(Pattern::tag("Prepared"), Pattern::star(Pattern::tag("Want"))),
        );
        assert_eq!(pattern.as_ref().unwrap(), &expected);
        // a + b . c parses as a + (b.c)
        let src2 = "def g(x: M?(A + B . C)): Unit { () }";
        let p2 = parse_program(src2).unwrap();
        let SurfaceType::MbRecv { pattern, .. } = &p2.defs[0].params[0].1 else {
            panic!();
        };
        let expected2 = Pattern::plus(
            Pattern::tag("A"),
            Pattern::dot(Pattern::tag("B"), Pattern::tag("C")),
        );
        assert_eq!(pattern.as_ref().unwrap(), &expected2);
    }

    #[test]
    fn send_binds_tighter_than_seq() {
        let p = parse_program("def f(d: D!, s: S?): Unit { d ! Want(0, s); () }");
        let p = p.unwrap();
        match &p.defs[0].body.kind {
            ExprKind::Seq(first, _) => {
                assert!(matches!(&first.kind, ExprKind::Send { tag, args, .. }
                    if tag == "Want" && args.len() == 2));
            }
            other => panic!("expected seq, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_declarations_rejected() {
        assert!(parse_program("interface A { M() } interface A { N() }").is_err());
        assert!(parse_program("interface A { M(), M() }").is_err());
        assert!(parse_program("def f(): Unit { () } def f(): Unit { () }").is_err());
        let dup_clause = r#"
def f(x: A?): Unit {
  guard x: M {
    receive M() from y -> ()
    receive M() from z -> ()
  }
}
"#;
        assert!(parse_program(dup_clause).is_err());
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_program("def f(): Unit { let x = }").unwrap_err();
        assert_eq!(err.phase, Phase::Parse);
        let span = err.span.unwrap();
        assert_eq!(span.line, 1);
        assert!(span.col > 20);
    }

    #[test]
    fn interleaved_sections_rejected() {
        // the grammar is interfaces, then defs, then the body
        assert!(parse_program("def f(): Unit { () } interface A { M() }").is_err());
    }

    #[test]
    fn let_requires_in() {
        assert!(parse_program("def f(): Unit { let x = 1 x }").is_err());
        assert!(parse_program("def f(): Unit { let x = 1 in () }").is_ok());
    }
}
