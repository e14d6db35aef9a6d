use super::{Ast, BinOp, ExprError, Func, Node, NodeKind, Span};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(offset: usize, expected: &str, found: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        expected: expected.into(),
        found: found.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            i += 1;
            out.push((tok, start..i));
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(start, "a number", format!("`{text}`")))?;
            out.push((Tok::Num(value), start..i));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start..i));
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(syntax(start, "a token", format!("`{ch}`")));
    }
    out.push((Tok::End, src.len()..src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1.clone()
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Span, ExprError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(syntax(self.span().start, expected, self.peek().describe()))
        }
    }

    fn binary(op: BinOp, lhs: Node, rhs: Node) -> Node {
        let span = lhs.span.start..rhs.span.end;
        Node {
            kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            span,
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.power()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.unary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.power()?;
            return Ok(Self::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if *self.peek() == Tok::Minus {
            let start = self.bump().1.start;
            let inner = self.unary()?;
            let span = start..inner.span.end;
            return Ok(Node {
                kind: NodeKind::Neg(Box::new(inner)),
                span,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let (tok, span) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node {
                kind: NodeKind::Num(v),
                span,
            }),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen, "`)`")?;
                Ok(Node {
                    kind: inner.kind,
                    span: span.start..close.end,
                })
            }
            Tok::Ident(name) if *self.peek() == Tok::LParen => self.call(name, span),
            Tok::Ident(name) => {
                let kind = match name.as_str() {
                    "pi" => NodeKind::Num(std::f64::consts::PI),
                    "e" => NodeKind::Num(std::f64::consts::E),
                    _ => NodeKind::Var(name),
                };
                Ok(Node { kind, span })
            }
            other => Err(syntax(span.start, "an operand", other.describe())),
        }
    }

    fn call(&mut self, name: String, name_span: Span) -> Result<Node, ExprError> {
        let func = Func::from_name(&name).ok_or(ExprError::UnknownIdentifier {
            name: name.clone(),
            offset: name_span.start,
        })?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        let close = self.span();
        if args.len() != func.arity() {
            let expected = format!("{} argument(s) to {name}", func.arity());
            return Err(syntax(close.start, &expected, format!("{}", args.len())));
        }
        let close = self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(Node {
            kind: NodeKind::Call(func, args),
            span: name_span.start..close.end,
        })
    }
}

/// Parse expression text. Unknown function names are rejected here;
/// variable names are checked later against a vocabulary.
pub fn parse(text: &str) -> Result<Ast, ExprError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(
            p.span().start,
            "an operator or end of input",
            p.peek().describe(),
        ));
    }
    Ok(Ast { root })
}
