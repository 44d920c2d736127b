//! Problem files: a system, universal declarations and one task.

use std::fmt;

use thiserror::Error;

use crate::context::{Entry, QContext};
use crate::kernel::{parse_term, Name, Term};
use crate::pts::{cube_system, PtsSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    Goal(Term),
    Unify {
        lhs: Term,
        rhs: Term,
        existentials: Vec<(Name, Term)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub system: String,
    pub declarations: Vec<(Name, Term)>,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Problem {
    pub fn spec(&self) -> PtsSpec {
        cube_system(&self.system).expect("system name checked by the parser")
    }

    /// The universal declarations as a context.
    pub fn context(&self) -> QContext {
        QContext::from_entries(
            self.declarations
                .iter()
                .map(|(n, t)| Entry::universal(n.clone(), t.clone()))
                .collect(),
        )
    }

    /// Universal declarations followed by the existentials of a unify task.
    pub fn full_context(&self) -> QContext {
        let mut c = self.context();
        if let Task::Unify { existentials, .. } = &self.task {
            for (n, t) in existentials {
                c.push(Entry::existential(n.clone(), t.clone()));
            }
        }
        c
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.system)?;
        for (n, t) in &self.declarations {
            writeln!(f, "assume {n} : {t}")?;
        }
        match &self.task {
            Task::Goal(g) => writeln!(f, "goal {g}"),
            Task::Unify {
                lhs,
                rhs,
                existentials,
            } => {
                for (n, t) in existentials {
                    writeln!(f, "exists {n} : {t}")?;
                }
                writeln!(f, "unify {lhs} = {rhs}")
            }
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
        && !matches!(s, "Prop" | "Type" | "Extern")
}

struct Line<'a> {
    no: usize,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn err(&self, at: &str, message: impl Into<String>) -> ParseError {
        let byte = at.as_ptr() as usize - self.text.as_ptr() as usize;
        ParseError {
            line: self.no,
            col: self.text[..byte].chars().count() + 1,
            message: message.into(),
        }
    }

    fn term(&self, src: &'a str) -> Result<Term, ParseError> {
        parse_term(src).map_err(|e| {
            let at = &src[e.offset.min(src.len())..];
            self.err(at, e.message)
        })
    }

    /// `<ident> : <term>`
    fn declaration(&self, rest: &'a str) -> Result<(Name, Term), ParseError> {
        let Some((name, ty)) = rest.split_once(':') else {
            return Err(self.err(rest, "expected `name : type`"));
        };
        let name_t = name.trim();
        if !is_ident(name_t) {
            return Err(self.err(name, format!("invalid identifier `{name_t}`")));
        }
        Ok((Name::from(name_t), self.term(ty)?))
    }
}

pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let mut system: Option<String> = None;
    let mut decls: Vec<(Name, Term)> = Vec::new();
    let mut exists: Vec<(Name, Term)> = Vec::new();
    let mut goal: Option<Term> = None;
    let mut unify: Option<(Term, Term)> = None;
    let mut last = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = Line {
            no: i + 1,
            text: raw,
        };
        last = i + 1;
        let body = raw.split('#').next().unwrap();
        let trimmed = body.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let (kw, rest) = match trimmed.find(char::is_whitespace) {
            Some(k) => (&trimmed[..k], &trimmed[k..]),
            None => (trimmed, &trimmed[trimmed.len()..]),
        };
        match kw {
            "system" => {
                if system.is_some() {
                    return Err(line.err(trimmed, "duplicate `system` line"));
                }
                let name = rest.trim();
                let name = name.strip_prefix("system ").map(str::trim).unwrap_or(name);
                if cube_system(name).is_err() {
                    return Err(line.err(rest.trim_start(), format!("unknown system `{name}`")));
                }
                system = Some(name.to_string());
            }
            "assume" => {
                if goal.is_some() || unify.is_some() || !exists.is_empty() {
                    return Err(line.err(trimmed, "`assume` after the task"));
                }
                decls.push(line.declaration(rest)?);
            }
            "exists" => {
                if goal.is_some() {
                    return Err(line.err(trimmed, "`exists` is only allowed in unification tasks"));
                }
                if unify.is_some() {
                    return Err(line.err(trimmed, "`exists` after `unify`"));
                }
                exists.push(line.declaration(rest)?);
            }
            "goal" => {
                if goal.is_some() || unify.is_some() {
                    return Err(line.err(trimmed, "more than one task"));
                }
                if !exists.is_empty() {
                    return Err(line.err(trimmed, "`exists` is only allowed in unification tasks"));
                }
                if rest.trim().is_empty() {
                    return Err(line.err(trimmed, "empty goal"));
                }
                goal = Some(line.term(rest)?);
            }
            "unify" => {
                if goal.is_some() || unify.is_some() {
                    return Err(line.err(trimmed, "more than one task"));
                }
                let Some((a, b)) = rest.split_once('=') else {
                    return Err(line.err(rest, "expected `unify a = b`"));
                };
                unify = Some((line.term(a)?, line.term(b)?));
            }
            _ => return Err(line.err(trimmed, format!("unknown keyword `{kw}`"))),
        }
    }
    let at_end = |message: &str| ParseError {
        line: last,
        col: 1,
        message: message.to_string(),
    };
    let system = system.ok_or_else(|| at_end("missing `system` line"))?;
    let task = match (goal, unify) {
        (Some(g), None) => Task::Goal(g),
        (None, Some((lhs, rhs))) => Task::Unify {
            lhs,
            rhs,
            existentials: exists,
        },
        _ => return Err(at_end("missing task: expected `goal` or `unify`")),
    };
    Ok(Problem {
        system,
        declarations: decls,
        task,
    })
}
