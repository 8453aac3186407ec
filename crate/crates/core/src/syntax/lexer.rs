//! Hand-rolled lexer. `#` comments to end of line; string escapes are
//! limited to `\n` and `\"`.

use crate::diag::{Diagnostic, Phase};
use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Uid(String),
    Lid(String),
    Int(i64),
    Str(String),
    // keywords
    Interface,
    Def,
    Let,
    In,
    Guard,
    Receive,
    Free,
    Fail,
    From,
    Spawn,
    New,
    Case,
    Inl,
    Inr,
    If,
    Else,
    Fun,
    LinFun,
    True,
    False,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Bang,
    Question,
    Arrow,
    Plus,
    Minus,
    Star,
    Dot,
    Less,
    Equals,
    Eof,
}

impl std::fmt::Display for TokenKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use TokenKind::*;
        match self {
            Uid(s) | Lid(s) => write!(f, "{s}"),
            Int(n) => write!(f, "{n}"),
            Str(s) => write!(f, "{s:?}"),
            Interface => write!(f, "interface"),
            Def => write!(f, "def"),
            Let => write!(f, "let"),
            In => write!(f, "in"),
            Guard => write!(f, "guard"),
            Receive => write!(f, "receive"),
            Free => write!(f, "free"),
            Fail => write!(f, "fail"),
            From => write!(f, "from"),
            Spawn => write!(f, "spawn"),
            New => write!(f, "new"),
            Case => write!(f, "case"),
            Inl => write!(f, "inl"),
            Inr => write!(f, "inr"),
            If => write!(f, "if"),
            Else => write!(f, "else"),
            Fun => write!(f, "fun"),
            LinFun => write!(f, "linfun"),
            True => write!(f, "true"),
            False => write!(f, "false"),
            LBrace => write!(f, "{{"),
            RBrace => write!(f, "}}"),
            LParen => write!(f, "("),
            RParen => write!(f, ")"),
            LBracket => write!(f, "["),
            RBracket => write!(f, "]"),
            Comma => write!(f, ","),
            Colon => write!(f, ":"),
            Semi => write!(f, ";"),
            Bang => write!(f, "!"),
            Question => write!(f, "?"),
            Arrow => write!(f, "->"),
            Plus => write!(f, "+"),
            Minus => write!(f, "-"),
            Star => write!(f, "*"),
            Dot => write!(f, "."),
            Less => write!(f, "<"),
            Equals => write!(f, "="),
            Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub fn lex(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(ch) = c {
                if ch == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let span = Span::new(line, col);
        let Some(&c) = chars.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                span,
            });
            return Ok(tokens);
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '0'..='9' => {
                let mut n: i64 = 0;
                while let Some(&c) = chars.peek() {
                    if let Some(d) = c.to_digit(10) {
                        n = n
                            .checked_mul(10)
                            .and_then(|n| n.checked_add(d as i64))
                            .ok_or_else(|| {
                                Diagnostic::error(Phase::Parse, "integer literal too large")
                                    .at(span)
                            })?;
                        bump!();
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Int(n),
                    span,
                });
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some('n') => s.push('\n'),
                            Some('"') => s.push('"'),
                            other => {
                                return Err(Diagnostic::error(
                                    Phase::Parse,
                                    format!("unsupported string escape {other:?}"),
                                )
                                .at(span))
                            }
                        },
                        Some('\n') | None => {
                            return Err(Diagnostic::error(
                                Phase::Parse,
                                "unterminated string literal",
                            )
                            .at(span))
                        }
                        Some(c) => s.push(c),
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Str(s),
                    span,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let kind = match ident.as_str() {
                    "interface" => TokenKind::Interface,
                    "def" => TokenKind::Def,
                    "let" => TokenKind::Let,
                    "in" => TokenKind::In,
                    "guard" => TokenKind::Guard,
                    "receive" => TokenKind::Receive,
                    "free" => TokenKind::Free,
                    "fail" => TokenKind::Fail,
                    "from" => TokenKind::From,
                    "spawn" => TokenKind::Spawn,
                    "new" => TokenKind::New,
                    "case" => TokenKind::Case,
                    "inl" => TokenKind::Inl,
                    "inr" => TokenKind::Inr,
                    "if" => TokenKind::If,
                    "else" => TokenKind::Else,
                    "fun" => TokenKind::Fun,
                    "linfun" => TokenKind::LinFun,
                    "true" => TokenKind::True,
                    "false" => TokenKind::False,
                    _ => {
                        if ident.chars().next().unwrap().is_ascii_uppercase() {
                            TokenKind::Uid(ident)
                        } else {
                            TokenKind::Lid(ident)
                        }
                    }
                };
                tokens.push(Token { kind, span });
            }
            _ => {
                bump!();
                let kind = match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    ':' => TokenKind::Colon,
                    ';' => TokenKind::Semi,
                    '!' => TokenKind::Bang,
                    '?' => TokenKind::Question,
                    '+' => TokenKind::Plus,
                    '*' => TokenKind::Star,
                    '.' => TokenKind::Dot,
                    '<' => TokenKind::Less,
                    '=' => TokenKind::Equals,
                    '-' => {
                        if chars.peek() == Some(&'>') {
                            bump!();
                            TokenKind::Arrow
                        } else {
                            TokenKind::Minus
                        }
                    }
                    other => {
                        return Err(Diagnostic::error(
                            Phase::Parse,
                            format!("unexpected character {other:?}"),
                        )
                        .at(span))
                    }
                };
                tokens.push(Token { kind, span });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_guard_line() {
        let toks = lex("guard self: Prepare + 1 { free -> () }").unwrap();
        let kinds: Vec<&TokenKind> = toks.iter().map(|t| &t.kind).collect();
        assert!(matches!(kinds[0], TokenKind::Guard));
        assert!(matches!(kinds[1], TokenKind::Lid(s) if s == "self"));
        assert!(matches!(kinds[3], TokenKind::Uid(s) if s == "Prepare"));
        assert!(matches!(kinds[5], TokenKind::Int(1)));
    }

    #[test]
    fn comments_and_spans() {
        let toks = lex("# a comment\nlet x = 1").unwrap();
        assert!(matches!(toks[0].kind, TokenKind::Let));
        assert_eq!(toks[0].span, Span::new(2, 1));
        assert_eq!(toks[3].span, Span::new(2, 9));
    }

    #[test]
    fn string_escapes() {
        let toks = lex(r#""a\nb\"c""#).unwrap();
        assert!(matches!(&toks[0].kind, TokenKind::Str(s) if s == "a\nb\"c"));
        assert!(lex(r#""\t""#).is_err());
        assert!(lex("\"open").is_err());
    }

    #[test]
    fn arrow_vs_minus() {
        let toks = lex("a - b -> c").unwrap();
        assert!(matches!(toks[1].kind, TokenKind::Minus));
        assert!(matches!(toks[3].kind, TokenKind::Arrow));
    }
}
