//! Constrained quantified contexts.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::kernel::{
    eta_long_in, normalize, print_in, Head, KernelError, Locals, Name, Node, Signature, Sort, Term,
};
use crate::pts::{Checker, PtsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quant {
    Universal,
    Existential,
}

/// Equation between two terms under a telescope of universal locals.
/// Local types and both sides use de Bruijn indices for the locals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub locals: Vec<(Name, Term)>,
    pub lhs: Term,
    pub rhs: Term,
}

impl Constraint {
    pub fn new(locals: Vec<(Name, Term)>, lhs: Term, rhs: Term) -> Constraint {
        Constraint { locals, lhs, rhs }
    }

    /// Both sides wrapped in products over the locals.
    pub fn closed(&self) -> (Term, Term) {
        let mut a = self.lhs.clone();
        let mut b = self.rhs.clone();
        for (n, ty) in self.locals.iter().rev() {
            a = Term::prod(n.clone(), ty.clone(), a);
            b = Term::prod(n.clone(), ty.clone(), b);
        }
        (a, b)
    }

    pub fn local_names(&self) -> Vec<Name> {
        self.locals.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.lhs == self.rhs
    }

    pub fn map(&self, f: &mut dyn FnMut(&Term) -> Term) -> Constraint {
        Constraint {
            locals: self.locals.iter().map(|(n, t)| (n.clone(), f(t))).collect(),
            lhs: f(&self.lhs),
            rhs: f(&self.rhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Entry {
    Universal { name: Name, ty: Term },
    Existential { name: Name, ty: Term },
    Constraint(Constraint),
}

impl Entry {
    pub fn universal(name: impl Into<Name>, ty: Term) -> Entry {
        Entry::Universal {
            name: name.into(),
            ty,
        }
    }

    pub fn existential(name: impl Into<Name>, ty: Term) -> Entry {
        Entry::Existential {
            name: name.into(),
            ty,
        }
    }

    pub fn constraint(locals: Vec<(Name, Term)>, lhs: Term, rhs: Term) -> Entry {
        Entry::Constraint(Constraint::new(locals, lhs, rhs))
    }

    pub fn declaration(&self) -> Option<(&Name, &Term)> {
        match self {
            Entry::Universal { name, ty } | Entry::Existential { name, ty } => Some((name, ty)),
            Entry::Constraint(_) => None,
        }
    }

    pub fn quant(&self) -> Option<Quant> {
        match self {
            Entry::Universal { .. } => Some(Quant::Universal),
            Entry::Existential { .. } => Some(Quant::Existential),
            Entry::Constraint(_) => None,
        }
    }

    pub fn name(&self) -> Option<&Name> {
        self.declaration().map(|(n, _)| n)
    }

    /// Applies `f` to every term of the entry.
    pub fn map_terms(&self, f: &mut dyn FnMut(&Term) -> Term) -> Entry {
        match self {
            Entry::Universal { name, ty } => Entry::Universal {
                name: name.clone(),
                ty: f(ty),
            },
            Entry::Existential { name, ty } => Entry::Existential {
                name: name.clone(),
                ty: f(ty),
            },
            Entry::Constraint(c) => Entry::Constraint(c.map(f)),
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Universal { name, ty } => write!(f, "assume {name} : {ty}"),
            Entry::Existential { name, ty } => write!(f, "exists {name} : {ty}"),
            Entry::Constraint(c) => {
                f.write_str("constraint ")?;
                let mut bound = Vec::new();
                for (n, ty) in &c.locals {
                    write!(f, "[{n}:{}]", print_in(ty, &bound))?;
                    bound.push(n.clone());
                }
                write!(
                    f,
                    " {} = {}",
                    print_in(&c.lhs, &bound),
                    print_in(&c.rhs, &bound)
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct QContext {
    entries: Vec<Entry>,
}

impl QContext {
    pub fn new() -> QContext {
        QContext::default()
    }

    pub fn from_entries(entries: Vec<Entry>) -> QContext {
        QContext { entries }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    pub fn extend(&mut self, es: impl IntoIterator<Item = Entry>) {
        self.entries.extend(es);
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.name().is_some_and(|n| &**n == name))
    }

    pub fn lookup(&self, name: &str) -> Option<(Quant, &Term)> {
        self.entries.iter().find_map(|e| match e {
            Entry::Universal { name: n, ty } if &**n == name => Some((Quant::Universal, ty)),
            Entry::Existential { name: n, ty } if &**n == name => Some((Quant::Existential, ty)),
            _ => None,
        })
    }

    pub fn quant_of(&self, name: &str) -> Option<Quant> {
        self.lookup(name).map(|(q, _)| q)
    }

    pub fn existentials(&self) -> Vec<(Name, Term)> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                Entry::Existential { name, ty } => Some((name.clone(), ty.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn universals(&self) -> Vec<(Name, Term)> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                Entry::Universal { name, ty } => Some((name.clone(), ty.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Constraint(c) => Some(c),
            _ => None,
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.entries.iter().filter_map(|e| e.name())
    }

    /// The context without constraints or existentials after position `i`.
    pub fn prefix(&self, i: usize) -> QContext {
        QContext {
            entries: self.entries[..i].to_vec(),
        }
    }

    /// Well-typedness analysis under `spec`.
    pub fn analyze(&self, spec: &PtsSpec, fuel: usize) -> Analysis {
        Analysis::of(self, spec, fuel)
    }
}

impl fmt::Display for QContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// analysis

#[derive(Debug, Clone)]
pub struct DeclInfo {
    pub index: usize,
    pub quant: Quant,
    /// Normal η-long type, present when the declaration is well-typed
    /// without the constraints.
    pub ty: Option<Term>,
    /// Sort of the type.
    pub sort: Option<Sort>,
}

/// Which entries are well-typed without using the constraints. An entry
/// qualifies when it checks against the earlier qualifying declarations.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub ok: Vec<bool>,
    decls: HashMap<Name, DeclInfo>,
}

impl Signature for Analysis {
    fn type_of(&self, name: &Name) -> Option<Term> {
        self.decls.get(name).and_then(|d| d.ty.clone())
    }
}

impl Analysis {
    fn of(ctx: &QContext, spec: &PtsSpec, fuel: usize) -> Analysis {
        let mut an = Analysis {
            ok: Vec::with_capacity(ctx.len()),
            decls: HashMap::new(),
        };
        for (i, e) in ctx.entries.iter().enumerate() {
            let ok = an.check_entry(e, i, spec, fuel);
            an.ok.push(ok);
        }
        an
    }

    /// Extends the analysis with one more entry at position `index`.
    pub fn check_entry(&mut self, e: &Entry, index: usize, spec: &PtsSpec, fuel: usize) -> bool {
        match e {
            Entry::Universal { name, ty } | Entry::Existential { name, ty } => {
                let res = {
                    let ch = Checker::new(spec, self, fuel);
                    ch.infer_sort(&mut Locals::new(), ty).ok().and_then(|s| {
                        let nty = normalize(ty, fuel).ok()?;
                        let long = eta_long_in(self, &mut Locals::new(), &nty, fuel).ok()?;
                        Some((s, long))
                    })
                };
                let ok = res.is_some() && !self.decls.contains_key(name);
                let (sort, ty) = match res {
                    Some((s, t)) if ok => (Some(s), Some(t)),
                    _ => (None, None),
                };
                if !self.decls.contains_key(name) {
                    self.decls.insert(
                        name.clone(),
                        DeclInfo {
                            index,
                            quant: e.quant().unwrap(),
                            ty,
                            sort,
                        },
                    );
                }
                ok
            }
            Entry::Constraint(c) => {
                let ch = Checker::new(spec, self, fuel);
                let mut locals = Locals::new();
                for (_, ty) in &c.locals {
                    if ch.infer_sort(&mut locals, ty).is_err() {
                        return false;
                    }
                    match normalize(ty, fuel) {
                        Ok(t) => locals.push(t),
                        Err(_) => return false,
                    }
                }
                match (ch.infer(&mut locals, &c.lhs), ch.infer(&mut locals, &c.rhs)) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => false,
                }
            }
        }
    }

    /// Recomputes declaration positions after entries were inserted or removed.
    pub fn reindex(&mut self, ctx: &QContext) {
        let mut seen = std::collections::HashSet::new();
        for (i, e) in ctx.entries.iter().enumerate() {
            if let Some(n) = e.name() {
                if seen.insert(n.clone()) {
                    if let Some(d) = self.decls.get_mut(n) {
                        d.index = i;
                    }
                }
            }
        }
    }

    pub fn decl(&self, name: &str) -> Option<&DeclInfo> {
        self.decls.get(name)
    }

    pub fn quant(&self, name: &str) -> Option<Quant> {
        self.decls.get(name).map(|d| d.quant)
    }

    pub fn is_existential(&self, name: &str) -> bool {
        self.quant(name) == Some(Quant::Existential)
    }

    /// Rigidity of a head symbol; locals and sorts are rigid.
    pub fn head_rigidity(&self, t: &Term) -> Rigidity {
        match t.node() {
            Node::Lam(..) | Node::Prod(..) => Rigidity::Rigid,
            _ => match t.head() {
                Some(Head::Sort(_)) | Some(Head::Bound(_)) => Rigidity::Rigid,
                Some(Head::Free(n)) => match self.quant(&n) {
                    Some(Quant::Universal) => Rigidity::Rigid,
                    Some(Quant::Existential) => Rigidity::Flexible,
                    None => Rigidity::Undetermined,
                },
                None => Rigidity::Undetermined,
            },
        }
    }

    pub fn is_ground(&self, t: &Term) -> bool {
        t.free_names().iter().all(|n| !self.is_existential(n))
    }
}

// ---------------------------------------------------------------------------
// classification

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rigidity {
    Rigid,
    Flexible,
    Undetermined,
}

/// Rigidity of a term in a context; `Undetermined` unless the term is normal
/// η-long and well-typed without the constraints.
pub fn classify_term(spec: &PtsSpec, ctx: &QContext, t: &Term, fuel: usize) -> Rigidity {
    let an = ctx.analyze(spec, fuel);
    if Checker::new(spec, &an, fuel)
        .infer(&mut Locals::new(), t)
        .is_err()
    {
        return Rigidity::Undetermined;
    }
    match eta_long_in(&an, &mut Locals::new(), t, fuel) {
        Ok(long) if long == *t => an.head_rigidity(t),
        _ => Rigidity::Undetermined,
    }
}

pub fn is_ground(ctx: &QContext, t: &Term) -> bool {
    t.free_names()
        .iter()
        .all(|n| ctx.quant_of(n) != Some(Quant::Existential))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Failure,
    Open,
}

/// Classification of a normalized context.
pub fn classify_context(ctx: &QContext, an: &Analysis) -> Status {
    let mut open = false;
    for (i, e) in ctx.entries.iter().enumerate() {
        match e {
            Entry::Universal { .. } => {}
            Entry::Existential { .. } => open = true,
            Entry::Constraint(c) => {
                if c.is_trivial() {
                    continue;
                }
                if an.ok[i] && an.is_ground(&c.lhs) && an.is_ground(&c.rhs) {
                    return Status::Failure;
                }
                open = true;
            }
        }
    }
    if open {
        Status::Open
    } else {
        Status::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("no existential variable is eligible for instantiation")]
    NoEligibleVariable,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Normal form of a context: entries well-typed without the constraints
/// are put in normal η-long form and trivial constraints are dropped.
/// Returns the analysis of the result as well.
pub fn normalize_context(
    ctx: &QContext,
    spec: &PtsSpec,
    fuel: usize,
) -> Result<(QContext, Analysis), ContextError> {
    let an = Analysis {
        ok: Vec::with_capacity(ctx.len()),
        decls: HashMap::new(),
    };
    normalize_rest(ctx, 0, an, spec, fuel)
}

/// Like [`normalize_context`] when the first `keep` entries of `ctx` are the
/// already normalized entries analyzed in `base`.
pub fn normalize_context_from(
    ctx: &QContext,
    spec: &PtsSpec,
    fuel: usize,
    base: &Analysis,
    keep: usize,
) -> Result<(QContext, Analysis), ContextError> {
    let mut an = base.clone();
    an.ok.truncate(keep);
    an.decls.retain(|_, d| d.index < keep);
    normalize_rest(ctx, keep, an, spec, fuel)
}

fn normalize_rest(
    ctx: &QContext,
    keep: usize,
    mut an: Analysis,
    spec: &PtsSpec,
    fuel: usize,
) -> Result<(QContext, Analysis), ContextError> {
    let mut out = Vec::with_capacity(ctx.len());
    out.extend(ctx.entries[..keep].iter().cloned());
    for e in &ctx.entries[keep..] {
        let index = out.len();
        let ok = an.check_entry(e, index, spec, fuel);
        let e2 = if ok {
            normal_entry(&an, e, fuel)?
        } else {
            e.clone()
        };
        if let Entry::Constraint(c) = &e2 {
            if c.is_trivial() {
                continue;
            }
        }
        an.ok.push(ok);
        out.push(e2);
    }
    Ok((QContext { entries: out }, an))
}

fn normal_entry(an: &Analysis, e: &Entry, fuel: usize) -> Result<Entry, KernelError> {
    Ok(match e {
        Entry::Universal { name, .. } => Entry::Universal {
            name: name.clone(),
            ty: an.decls[name].ty.clone().unwrap(),
        },
        Entry::Existential { name, .. } => Entry::Existential {
            name: name.clone(),
            ty: an.decls[name].ty.clone().unwrap(),
        },
        Entry::Constraint(c) => {
            let mut locals = Locals::new();
            let mut new_locals = Vec::with_capacity(c.locals.len());
            for (n, ty) in &c.locals {
                let nty = normalize(ty, fuel)?;
                new_locals.push((n.clone(), eta_long_in(an, &mut locals, &nty, fuel)?));
                locals.push(nty);
            }
            let lhs = eta_long_in(an, &mut locals, &normalize(&c.lhs, fuel)?, fuel)?;
            let rhs = eta_long_in(an, &mut locals, &normalize(&c.rhs, fuel)?, fuel)?;
            Entry::Constraint(Constraint::new(new_locals, lhs, rhs))
        }
    })
}

/// An existential chosen for instantiation, with its type split as
/// `(x1:P1)...(xn:Pn)P`.
#[derive(Debug, Clone)]
pub struct Selected {
    pub index: usize,
    pub name: Name,
    pub ty: Term,
    pub binders: Vec<(Name, Term)>,
    pub target: Term,
}

/// Whether the existential at `index` may be instantiated: its type is
/// well-typed without the constraints and ends in a rigid atom.
pub fn eligible(ctx: &QContext, an: &Analysis, index: usize) -> Option<Selected> {
    let Entry::Existential { name, ty } = &ctx.entries[index] else {
        return None;
    };
    if !an.ok[index] {
        return None;
    }
    let (binders, target) = ty.telescope();
    if target.is_lam() || an.head_rigidity(&target) != Rigidity::Rigid {
        return None;
    }
    Some(Selected {
        index,
        name: name.clone(),
        ty: ty.clone(),
        binders,
        target,
    })
}

/// The rightmost eligible existential (leftmost when `rightmost` is false).
pub fn select_existential(
    ctx: &QContext,
    an: &Analysis,
    rightmost: bool,
) -> Result<Selected, ContextError> {
    let n = ctx.len();
    let mut order: Box<dyn Iterator<Item = usize>> = if rightmost {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    };
    order
        .find_map(|i| eligible(ctx, an, i))
        .ok_or(ContextError::NoEligibleVariable)
}
