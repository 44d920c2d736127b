use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::term::{Name, Node, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset}")]
pub struct SyntaxError {
    /// Byte offset into the parsed text.
    pub offset: usize,
    pub message: String,
}

// ---------------------------------------------------------------------------
// printing

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut p = Printer {
            taken: self.free_names().iter().map(|n| n.to_string()).collect(),
            stack: Vec::new(),
        };
        let mut out = String::new();
        p.arrow(self, &mut out);
        f.write_str(&out)
    }
}

/// Prints a term whose loose indices refer to the given binder names,
/// outermost first.
pub fn print_in(t: &Term, bound: &[Name]) -> String {
    let mut taken: BTreeSet<String> = t.free_names().iter().map(|n| n.to_string()).collect();
    taken.extend(bound.iter().map(|n| n.to_string()));
    let mut p = Printer {
        taken,
        stack: bound.iter().map(|n| n.to_string()).collect(),
    };
    let mut out = String::new();
    p.arrow(t, &mut out);
    out
}

struct Printer {
    taken: BTreeSet<String>,
    stack: Vec<String>,
}

impl Printer {
    fn fresh(&self, hint: &str) -> String {
        let base = if hint.is_empty() || hint == "_" {
            "x"
        } else {
            hint
        };
        if !self.taken.contains(base) && !self.stack.iter().any(|s| s == base) {
            return base.to_string();
        }
        let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
        let stem = if stem.is_empty() { "x" } else { stem };
        (0..)
            .map(|i| format!("{stem}{i}"))
            .find(|c| !self.taken.contains(c) && !self.stack.iter().any(|s| s == c))
            .unwrap()
    }

    /// Arrow-level position: binders and arrows print bare.
    fn arrow(&mut self, t: &Term, out: &mut String) {
        match t.node() {
            Node::Prod(n, a, b) if !b.has_loose(0) => {
                // the domain of an arrow is an arrow-level item, so binders
                // and arrows there need parentheses
                let wrap = matches!(a.node(), Node::Lam(..) | Node::Prod(..));
                if wrap {
                    out.push('(');
                }
                self.arrow(a, out);
                if wrap {
                    out.push(')');
                }
                out.push_str(" -> ");
                let name = self.fresh(n);
                self.stack.push(name);
                self.arrow(b, out);
                self.stack.pop();
            }
            Node::Prod(n, a, b) | Node::Lam(n, a, b) => {
                let name = self.fresh(n);
                let (open, close) = if t.is_lam() { ('[', ']') } else { ('(', ')') };
                out.push(open);
                out.push_str(&name);
                out.push(':');
                self.arrow(a, out);
                out.push(close);
                self.stack.push(name);
                self.arrow(b, out);
                self.stack.pop();
            }
            _ => self.atom(t, out),
        }
    }

    /// Item of an application.
    fn item(&mut self, t: &Term, out: &mut String) {
        if matches!(t.node(), Node::Prod(_, _, b) if !b.has_loose(0)) {
            out.push('(');
            self.arrow(t, out);
            out.push(')');
        } else {
            self.arrow(t, out);
        }
    }

    fn atom(&mut self, t: &Term, out: &mut String) {
        match t.node() {
            Node::Sort(s) => out.push_str(&s.to_string()),
            Node::Free(n) => out.push_str(n),
            Node::Var(i) => {
                let i = *i as usize;
                if i < self.stack.len() {
                    out.push_str(&self.stack[self.stack.len() - 1 - i]);
                } else {
                    out.push_str(&format!("#{i}"));
                }
            }
            Node::App(..) => {
                let (h, args) = t.spine();
                out.push('(');
                self.item(h, out);
                for a in args {
                    out.push(' ');
                    self.item(a, out);
                }
                out.push(')');
            }
            Node::Lam(..) | Node::Prod(..) => self.arrow(t, out),
        }
    }
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Colon,
    Arrow,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), SyntaxError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let c = bytes[self.pos] as char;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ':' => Tok::Colon,
            '-' if bytes.get(self.pos + 1) == Some(&b'>') => {
                self.pos += 2;
                return Ok((Tok::Arrow, start));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut end = self.pos;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                self.pos = end;
                return Ok((Tok::Ident(self.src[start..end].to_string()), start));
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap();
                return Err(SyntaxError {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    i: usize,
    bound: Vec<String>,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            offset: self.offset(),
            message: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn arrow(&mut self) -> Result<Term, SyntaxError> {
        let lhs = self.unit()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            // the codomain does not see a binder name
            self.bound.push(String::new());
            let rhs = self.arrow();
            self.bound.pop();
            Ok(Term::prod("_", lhs, rhs?))
        } else {
            Ok(lhs)
        }
    }

    fn binder(&mut self, close: Tok, close_name: &str) -> Result<(String, Term), SyntaxError> {
        let x = self.ident()?;
        self.expect(Tok::Colon, "':'")?;
        let ty = self.arrow()?;
        self.expect(close, close_name)?;
        Ok((x, ty))
    }

    fn body(&mut self, x: String) -> Result<Term, SyntaxError> {
        self.bound.push(x);
        let b = self.arrow();
        self.bound.pop();
        b
    }

    fn unit(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(match s.as_str() {
                    "Prop" => Term::sort(Sort::Prop),
                    "Type" => Term::sort(Sort::Type),
                    "Extern" => Term::sort(Sort::Extern),
                    _ => match self.bound.iter().rposition(|b| *b == s) {
                        Some(p) => Term::var((self.bound.len() - 1 - p) as u32),
                        None => Term::free(s.as_str()),
                    },
                })
            }
            Tok::LBrack => {
                self.bump();
                let (x, ty) = self.binder(Tok::RBrack, "']'")?;
                let b = self.body(x.clone())?;
                Ok(Term::lam(x.as_str(), ty, b))
            }
            Tok::LParen => {
                if matches!(self.peek_at(1), Tok::Ident(s) if !is_keyword(s))
                    && *self.peek_at(2) == Tok::Colon
                {
                    self.bump();
                    let (x, ty) = self.binder(Tok::RParen, "')'")?;
                    let b = self.body(x.clone())?;
                    return Ok(Term::prod(x.as_str(), ty, b));
                }
                self.bump();
                let mut items = vec![self.arrow()?];
                while *self.peek() != Tok::RParen {
                    if *self.peek() == Tok::End {
                        return self.err("expected ')'");
                    }
                    items.push(self.arrow()?);
                }
                self.bump();
                let mut it = items.into_iter();
                let head = it.next().unwrap();
                Ok(Term::apps(head, it))
            }
            Tok::End => self.err("unexpected end of term"),
            t => self.err(format!("unexpected {}", describe(&t))),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "Prop" | "Type" | "Extern")
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Ident(_) => "identifier",
        Tok::LParen => "'('",
        Tok::RParen => "')'",
        Tok::LBrack => "'['",
        Tok::RBrack => "']'",
        Tok::Colon => "':'",
        Tok::Arrow => "'->'",
        Tok::End => "end of input",
    }
}

/// Parses a closed term; unknown identifiers become free names.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    parse_term_in(src, &[])
}

/// Parses a term under the given bound names, outermost first.
pub fn parse_term_in(src: &str, bound: &[Name]) -> Result<Term, SyntaxError> {
    let mut lx = Lexer { src, pos: 0 };
    let mut toks = Vec::new();
    loop {
        let (t, off) = lx.next()?;
        let end = t == Tok::End;
        toks.push((t, off));
        if end {
            break;
        }
    }
    let mut p = Parser {
        toks,
        i: 0,
        bound: bound.iter().map(|n| n.to_string()).collect(),
        _src: src,
    };
    let t = p.arrow()?;
    if *p.peek() != Tok::End {
        return p.err(format!("unexpected {} after term", describe(p.peek())));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(s: &str) {
        let t = parse_term(s).unwrap();
        assert_eq!(t.to_string(), s);
        assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn round_trips() {
        rt("(u (A -> B) v w)");
        rt("[x:T]x");
        rt("(P:Prop)P -> P");
        rt("(x:T)(y:T)(R x y) -> (R y x) -> (Eq x y)");
        rt("(u (B -> C) [x:B](v x))");
        rt("(A -> B) -> C");
        rt("((x:Prop)x) -> Prop");
        rt("([x:A]x) -> B");
    }

    #[test]
    fn arrow_is_right_associative() {
        let t = parse_term("A -> B -> C").unwrap();
        let want = Term::arrow(
            Term::free("A"),
            Term::arrow(Term::free("B"), Term::free("C")),
        );
        assert_eq!(t, want);
    }

    #[test]
    fn application_is_left_associative() {
        let t = parse_term("(f a b)").unwrap();
        let want = Term::app(Term::app(Term::free("f"), Term::free("a")), Term::free("b"));
        assert_eq!(t, want);
    }

    #[test]
    fn bound_names_resolve_to_indices() {
        let t = parse_term("[P:Prop][x:P]x").unwrap();
        let want = Term::lam(
            "P",
            Term::prop(),
            Term::lam("x", Term::var(0), Term::var(0)),
        );
        assert_eq!(t, want);
    }

    #[test]
    fn shadowing_prints_unambiguously() {
        // [x:A][x0:A]x with the outer x referenced under an inner x
        let t = Term::lam(
            "x",
            Term::free("A"),
            Term::lam("x", Term::free("A"), Term::var(1)),
        );
        let s = t.to_string();
        assert_eq!(parse_term(&s).unwrap(), t);
    }

    #[test]
    fn free_name_capture_is_avoided() {
        let t = Term::lam(
            "x",
            Term::free("A"),
            Term::app(Term::free("x"), Term::var(0)),
        );
        assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn errors_report_offsets() {
        let e = parse_term("(f a").unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(parse_term("[x T]x").is_err());
        assert!(parse_term("a $").is_err());
        assert!(parse_term("").is_err());
    }
}
