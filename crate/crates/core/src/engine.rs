//! Substitutions and the generator of elementary substitutions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::context::{Analysis, Entry, QContext, Quant, Rigidity, Selected};
use crate::kernel::{normalize, Locals, Name, Node, Sort, Term};
use crate::pts::{check_context, Checker, Equiv, Mode, PtsSpec, TypeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    /// Existential context introduced in place of the bound variable.
    pub gamma: QContext,
    pub term: Term,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    pub bindings: BTreeMap<Name, Binding>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn single(x: impl Into<Name>, gamma: QContext, term: Term) -> Substitution {
        let mut s = Substitution::new();
        s.bind(x, gamma, term);
        s
    }

    pub fn bind(&mut self, x: impl Into<Name>, gamma: QContext, term: Term) {
        self.bindings.insert(x.into(), Binding { gamma, term });
    }

    pub fn get(&self, x: &str) -> Option<&Binding> {
        self.bindings.get(x)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    /// Keeps only the bindings of the given names.
    pub fn restrict(&self, names: &[Name]) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(n, _)| names.contains(n))
                .map(|(n, b)| (n.clone(), b.clone()))
                .collect(),
        }
    }

    pub fn apply_to_term(&self, t: &Term) -> Term {
        apply_to_term(self, t)
    }

    pub fn apply_to_context(&self, ctx: &QContext) -> QContext {
        apply_to_context(self, ctx)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (n, b)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n} <- {}", b.term)?;
        }
        f.write_str("}")
    }
}

pub fn apply_to_term(sigma: &Substitution, t: &Term) -> Term {
    if sigma.bindings.is_empty() {
        return t.clone();
    }
    t.map_free(&mut |n: &Name, depth| sigma.bindings.get(n).map(|b| b.term.shift(depth as i64, 0)))
}

/// Bound declarations are replaced by their existential context; every
/// other entry has the substitution applied to its terms.
pub fn apply_to_context(sigma: &Substitution, ctx: &QContext) -> QContext {
    let mut out = Vec::with_capacity(ctx.len());
    for e in ctx.entries() {
        if let Some(b) = e.name().and_then(|n| sigma.bindings.get(n)) {
            out.extend(b.gamma.entries().iter().cloned());
        } else {
            out.push(e.map_terms(&mut |t| apply_to_term(sigma, t)));
        }
    }
    QContext::from_entries(out)
}

/// `tau ∘ sigma`: sigma's bindings pushed through tau, plus tau's bindings
/// on the variables sigma leaves alone.
pub fn compose(tau: &Substitution, sigma: &Substitution) -> Substitution {
    let mut out = Substitution::new();
    for (x, b) in &sigma.bindings {
        out.bindings.insert(
            x.clone(),
            Binding {
                gamma: apply_to_context(tau, &b.gamma),
                term: apply_to_term(tau, &b.term),
            },
        );
    }
    for (x, b) in &tau.bindings {
        if !sigma.bindings.contains_key(x) {
            out.bindings.insert(x.clone(), b.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstError {
    #[error("substitution binds universal variable {0}")]
    BindsUniversal(String),
    #[error("binding of {0} is ill-typed: {1}")]
    IllTypedBinding(String, TypeError),
    #[error("substituted context is ill-formed: {0}")]
    IllFormedImage(TypeError),
}

/// Well-typedness of a substitution in a context, using the constraints.
pub fn check_well_typed(
    spec: &PtsSpec,
    ctx: &QContext,
    sigma: &Substitution,
    fuel: usize,
) -> Result<(), SubstError> {
    for e in ctx.entries() {
        if let Entry::Universal { name, .. } = e {
            if sigma.bindings.contains_key(name) {
                return Err(SubstError::BindsUniversal(name.to_string()));
            }
        }
    }
    let image = apply_to_context(sigma, ctx);
    check_context(spec, &image, Mode::WithConstraints, fuel).map_err(SubstError::IllFormedImage)?;
    for (i, e) in ctx.entries().iter().enumerate() {
        let Entry::Existential { name, ty } = e else {
            continue;
        };
        let Some(b) = sigma.bindings.get(name) else {
            continue;
        };
        let mut local = apply_to_context(sigma, &ctx.prefix(i));
        local.extend(b.gamma.entries().iter().cloned());
        let expected = apply_to_term(sigma, ty);
        check_term(spec, &local, &b.term, &expected, fuel)
            .map_err(|err| SubstError::IllTypedBinding(name.to_string(), err))?;
    }
    Ok(())
}

fn check_term(
    spec: &PtsSpec,
    ctx: &QContext,
    t: &Term,
    ty: &Term,
    fuel: usize,
) -> Result<(), TypeError> {
    let mut sig = std::collections::HashMap::new();
    for e in ctx.entries() {
        if let Some((n, ty)) = e.declaration() {
            sig.insert(n.clone(), normalize(ty, fuel)?);
        }
    }
    let eq = Equiv::from_context(ctx, fuel);
    let ch = Checker::new(spec, &sig, fuel).with_equiv(&eq);
    ch.check(&mut Locals::new(), t, &normalize(ty, fuel)?)
}

// ---------------------------------------------------------------------------
// fresh names

/// Source of fresh variable names for elementary substitutions.
pub trait Namer {
    /// A name for an argument variable (`h` family).
    fn arg(&mut self) -> Name;
    /// A pair of splitting variables (`H`/`K` family).
    fn split(&mut self) -> (Name, Name);
    /// A name for a product codomain variable (`k` family).
    fn codomain(&mut self) -> Name;
}

/// Monotone counter scoped to one search run. Names already used in the
/// problem are skipped.
#[derive(Debug, Clone)]
pub struct NameGen {
    next: usize,
    reserved: HashSet<String>,
}

impl NameGen {
    pub fn new<'a>(reserved: impl IntoIterator<Item = &'a Name>) -> NameGen {
        NameGen {
            next: 1,
            reserved: reserved.into_iter().map(|n| n.to_string()).collect(),
        }
    }

    fn bump(&mut self, prefixes: &[&str]) -> usize {
        loop {
            let i = self.next;
            self.next += 1;
            if prefixes
                .iter()
                .all(|p| !self.reserved.contains(&format!("{p}{i}")))
            {
                return i;
            }
        }
    }
}

impl Namer for NameGen {
    fn arg(&mut self) -> Name {
        let i = self.bump(&["h"]);
        Name::from(format!("h{i}"))
    }

    fn split(&mut self) -> (Name, Name) {
        let i = self.bump(&["H", "K"]);
        (Name::from(format!("H{i}")), Name::from(format!("K{i}")))
    }

    fn codomain(&mut self) -> Name {
        let i = self.bump(&["k"]);
        Name::from(format!("k{i}"))
    }
}

/// Replays a recorded list of fresh names in order.
pub struct Recorded<'a> {
    names: &'a [Name],
    pos: usize,
}

impl<'a> Recorded<'a> {
    pub fn new(names: &'a [Name]) -> Recorded<'a> {
        Recorded { names, pos: 0 }
    }

    fn take(&mut self) -> Name {
        let n = self
            .names
            .get(self.pos)
            .cloned()
            .unwrap_or_else(|| Name::from(format!("_missing{}", self.pos)));
        self.pos += 1;
        n
    }
}

impl Namer for Recorded<'_> {
    fn arg(&mut self) -> Name {
        self.take()
    }

    fn split(&mut self) -> (Name, Name) {
        (self.take(), self.take())
    }

    fn codomain(&mut self) -> Name {
        self.take()
    }
}

/// Records every name handed out by the inner namer.
struct Recording<'a> {
    inner: &'a mut dyn Namer,
    seen: Vec<Name>,
}

impl Namer for Recording<'_> {
    fn arg(&mut self) -> Name {
        let n = self.inner.arg();
        self.seen.push(n.clone());
        n
    }

    fn split(&mut self) -> (Name, Name) {
        let (a, b) = self.inner.split();
        self.seen.push(a.clone());
        self.seen.push(b.clone());
        (a, b)
    }

    fn codomain(&mut self) -> Name {
        let n = self.inner.codomain();
        self.seen.push(n.clone());
        n
    }
}

// ---------------------------------------------------------------------------
// elementary substitutions

/// Head of a head substitution: a universal variable of the context or the
/// i-th (1-based) abstracted variable of the instantiated existential.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HeadRef {
    Global(Name),
    Local(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubKind {
    Head {
        head: HeadRef,
        splitting: usize,
        /// Number of leading abstractions; the full arity in strong mode.
        abstractions: usize,
        /// The sequence (s_i, s'_i) of splitting sorts.
        sorts: Vec<(Sort, Sort)>,
    },
    Sort(Sort),
    Prod(Sort, Sort),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElemSub {
    pub target: Name,
    pub kind: SubKind,
    /// Fresh names introduced, in creation order.
    pub fresh: Vec<Name>,
    pub payload: Substitution,
    /// Display name of the head.
    pub head_name: String,
}

impl ElemSub {
    pub fn splitting(&self) -> usize {
        match &self.kind {
            SubKind::Head { splitting, .. } => *splitting,
            _ => 0,
        }
    }

    pub fn binding(&self) -> &Binding {
        &self.payload.bindings[&self.target]
    }
}

impl fmt::Display for ElemSub {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- {}", self.target, self.binding().term)
    }
}

/// `(head #(n-1) ... #0)`: the head applied to the `n` innermost binders,
/// seen from `extra` binders deeper.
fn apply_telescope(head: Term, n: usize, extra: usize) -> Term {
    Term::apps(head, (0..n).map(|i| Term::var((n - 1 - i + extra) as u32)))
}

fn wrap(binders: &[(Name, Term)], body: Term, lam: bool) -> Term {
    binders.iter().rev().fold(body, |acc, (n, ty)| {
        if lam {
            Term::lam(n.clone(), ty.clone(), acc)
        } else {
            Term::prod(n.clone(), ty.clone(), acc)
        }
    })
}

/// Everything the generator needs to know about the instantiated variable.
pub struct Site<'a> {
    pub ctx: &'a QContext,
    pub an: &'a Analysis,
    pub sel: &'a Selected,
    /// Typing system (Meta).
    pub spec: &'a PtsSpec,
    /// System whose axioms and rules drive the enumeration.
    pub rules: &'a PtsSpec,
    pub fuel: usize,
}

impl<'a> Site<'a> {
    /// Binders abstracted when `m` leading abstractions are used.
    fn prefix(&self, m: usize) -> &'a [(Name, Term)] {
        &self.sel.binders[..m]
    }

    /// The result type after `m` abstractions: `(x_{m+1}:P_{m+1})...P`.
    pub fn target(&self, m: usize) -> Term {
        wrap(&self.sel.binders[m..], self.sel.target.clone(), false)
    }

    fn locals(&self, m: usize) -> Locals {
        Locals::from_vec(
            self.prefix(m)
                .iter()
                .map(|(_, t)| normalize(t, self.fuel).unwrap_or_else(|_| t.clone()))
                .collect(),
        )
    }

    fn sort_of(&self, locals: &mut Locals, t: &Term) -> Option<Sort> {
        Checker::new(self.spec, self.an, self.fuel)
            .infer_sort(locals, t)
            .ok()
    }

    /// Candidate heads under `m` abstractions with their types at that
    /// depth: universals left of the variable, then the abstracted variables.
    pub fn heads(&self, m: usize) -> Vec<(HeadRef, Term)> {
        let mut out = Vec::new();
        for e in &self.ctx.entries()[..self.sel.index] {
            if let Entry::Universal { name, .. } = e {
                if let Some(ty) = self.an.decl(name).and_then(|d| d.ty.clone()) {
                    out.push((HeadRef::Global(name.clone()), ty));
                }
            }
        }
        let locals = self.locals(m);
        for i in 1..=m {
            let ty = locals.lookup((m - i) as u32).unwrap();
            out.push((HeadRef::Local(i), ty));
        }
        out
    }

    pub fn head_name(&self, head: &HeadRef) -> String {
        match head {
            HeadRef::Global(n) => n.to_string(),
            HeadRef::Local(i) => self.sel.binders[i - 1].0.to_string(),
        }
    }

    fn head_term(&self, head: &HeadRef, m: usize) -> Term {
        match head {
            HeadRef::Global(n) => Term::free(n.clone()),
            HeadRef::Local(i) => Term::var((m - i) as u32),
        }
    }

    /// Sorts `(s, s')`: the sort of the head's result atom and of the target.
    pub fn head_sorts(&self, head_ty: &Term, m: usize) -> Option<(Sort, Sort)> {
        let mut locals = self.locals(m);
        let s_target = self.sort_of(&mut locals, &self.target(m))?;
        let (ys, q) = head_ty.telescope();
        for (_, ty) in &ys {
            locals.push(normalize(ty, self.fuel).ok()?);
        }
        let s_head = self.sort_of(&mut locals, &q)?;
        Some((s_head, s_target))
    }

    /// Whether the head's result atom, with the arguments filled by fresh
    /// existentials, is rigid (in which case splitting is useless).
    pub fn result_is_rigid(&self, head_ty: &Term) -> bool {
        let (ys, q) = head_ty.telescope();
        let nys = ys.len() as u32;
        match q.head() {
            Some(crate::kernel::Head::Bound(i)) => i >= nys,
            Some(crate::kernel::Head::Free(n)) => self.an.quant(&n) == Some(Quant::Universal),
            Some(crate::kernel::Head::Sort(_)) => true,
            None => false,
        }
    }

    /// Builds a head substitution.
    pub fn head_sub(
        &self,
        head: &HeadRef,
        head_ty: &Term,
        m: usize,
        sorts: &[(Sort, Sort)],
        namer: &mut dyn Namer,
    ) -> Option<ElemSub> {
        let mut rec = Recording {
            inner: namer,
            seen: Vec::new(),
        };
        let xs = self.prefix(m);
        let mut gamma = QContext::new();
        let mut args = Vec::new();
        // φ: one h per product of the head's type
        let mut cur = head_ty.clone();
        while let Node::Prod(_, dom, body) = cur.node() {
            let h = rec.arg();
            gamma.push(Entry::existential(h.clone(), wrap(xs, dom.clone(), false)));
            let hx = apply_telescope(Term::free(h), m, 0);
            let next = body.instantiate(&hx);
            args.push(hx);
            cur = next;
        }
        // χ_1 ... χ_r
        let mut lhs = cur;
        for &(s, s2) in sorts {
            let (hh, kk) = rec.split();
            gamma.push(Entry::existential(
                hh.clone(),
                wrap(xs, Term::sort(s), false),
            ));
            let h_x = apply_telescope(Term::free(hh), m, 0);
            gamma.push(Entry::existential(
                kk.clone(),
                wrap(xs, Term::prod("z", h_x.clone(), Term::sort(s2)), false),
            ));
            let k_xz = Term::app(apply_telescope(Term::free(kk.clone()), m, 1), Term::var(0));
            gamma.push(Entry::constraint(
                vec![],
                wrap(xs, lhs, false),
                wrap(xs, Term::prod("z", h_x.clone(), k_xz), false),
            ));
            let h = rec.arg();
            gamma.push(Entry::existential(h.clone(), wrap(xs, h_x, false)));
            let hx = apply_telescope(Term::free(h), m, 0);
            lhs = Term::app(apply_telescope(Term::free(kk), m, 0), hx.clone());
            args.push(hx);
        }
        // ψ
        gamma.push(Entry::constraint(
            vec![],
            wrap(xs, lhs, false),
            wrap(xs, self.target(m), false),
        ));
        let body = Term::apps(self.head_term(head, m), args);
        let t = wrap(xs, body, true);
        let payload = Substitution::single(self.sel.name.clone(), gamma, t);
        Some(ElemSub {
            target: self.sel.name.clone(),
            kind: SubKind::Head {
                head: head.clone(),
                splitting: sorts.len(),
                abstractions: m,
                sorts: sorts.to_vec(),
            },
            fresh: rec.seen,
            payload,
            head_name: self.head_name(head),
        })
    }

    pub fn sort_sub(&self, s: Sort) -> ElemSub {
        let xs = &self.sel.binders[..];
        let t = wrap(xs, Term::sort(s), true);
        ElemSub {
            target: self.sel.name.clone(),
            kind: SubKind::Sort(s),
            fresh: Vec::new(),
            payload: Substitution::single(self.sel.name.clone(), QContext::new(), t),
            head_name: s.to_string(),
        }
    }

    pub fn prod_sub(&self, s: Sort, s2: Sort, namer: &mut dyn Namer) -> ElemSub {
        let mut rec = Recording {
            inner: namer,
            seen: Vec::new(),
        };
        let xs = &self.sel.binders[..];
        let n = xs.len();
        let h = rec.arg();
        let k = rec.codomain();
        let h_x = apply_telescope(Term::free(h.clone()), n, 0);
        let k_xy = Term::app(apply_telescope(Term::free(k.clone()), n, 1), Term::var(0));
        let mut gamma = QContext::new();
        gamma.push(Entry::existential(h, wrap(xs, Term::sort(s), false)));
        gamma.push(Entry::existential(
            k,
            wrap(xs, Term::prod("y", h_x.clone(), Term::sort(s2)), false),
        ));
        let t = wrap(xs, Term::prod("y", h_x, k_xy), true);
        ElemSub {
            target: self.sel.name.clone(),
            kind: SubKind::Prod(s, s2),
            fresh: rec.seen,
            payload: Substitution::single(self.sel.name.clone(), gamma, t),
            head_name: "->".to_string(),
        }
    }
}

/// Sequences `(s_1,s'_1)...(s_r,s'_r)` with `<s_1,s'_1,s>`, `<s_i,s'_i,s'_{i-1}>`
/// rules of `spec` and `s'_r = s_target`.
pub fn sort_sequences(spec: &PtsSpec, s: Sort, s_target: Sort, r: usize) -> Vec<Vec<(Sort, Sort)>> {
    fn go(
        spec: &PtsSpec,
        prev: Sort,
        left: usize,
        goal: Sort,
        acc: &mut Vec<(Sort, Sort)>,
        out: &mut Vec<Vec<(Sort, Sort)>>,
    ) {
        if left == 0 {
            if prev == goal {
                out.push(acc.clone());
            }
            return;
        }
        for &(a, b, c) in &spec.rules {
            if c == prev {
                acc.push((a, b));
                go(spec, b, left - 1, goal, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(spec, s, r, s_target, &mut Vec::new(), &mut out);
    out
}

/// Options narrowing the generated set.
#[derive(Debug, Clone, Default)]
pub struct Filter {
    /// Only these heads (when set).
    pub heads: Option<Vec<HeadRef>>,
    /// Skip splitting when the head's result atom is rigid.
    pub avoid_rigid_splitting: bool,
    /// Allow sort substitutions.
    pub sorts: bool,
    /// Allow product substitutions.
    pub prods: bool,
}

impl Filter {
    pub fn all() -> Filter {
        Filter {
            heads: None,
            avoid_rigid_splitting: false,
            sorts: true,
            prods: true,
        }
    }
}

/// The elementary substitutions for the selected variable, in order: head
/// substitutions by head, then splitting degree, then sort sequence; then
/// sort and product substitutions when the target is a sort.
pub fn enumerate_elementary(
    site: &Site,
    r_max: usize,
    filter: &Filter,
    namer: &mut dyn Namer,
) -> Vec<ElemSub> {
    let m = site.sel.binders.len();
    let mut out = Vec::new();
    for (head, ty) in site.heads(m) {
        if let Some(hs) = &filter.heads {
            if !hs.contains(&head) {
                continue;
            }
        }
        let Some((s, s2)) = site.head_sorts(&ty, m) else {
            continue;
        };
        let r_top = if filter.avoid_rigid_splitting && site.result_is_rigid(&ty) {
            0
        } else {
            r_max
        };
        for r in 0..=r_top {
            for seq in sort_sequences(site.rules, s, s2, r) {
                if let Some(e) = site.head_sub(&head, &ty, m, &seq, namer) {
                    out.push(e);
                }
            }
        }
    }
    out.extend(sort_and_product_subs(site, filter, namer));
    out
}

fn sort_and_product_subs(site: &Site, filter: &Filter, namer: &mut dyn Namer) -> Vec<ElemSub> {
    let mut out = Vec::new();
    if let Some(p) = site.sel.target.as_sort() {
        if filter.sorts {
            for &(s, t) in &site.rules.axioms {
                if t == p {
                    out.push(site.sort_sub(s));
                }
            }
        }
        if filter.prods {
            for &(s, s2, t) in &site.rules.rules {
                if t == p {
                    out.push(site.prod_sub(s, s2, namer));
                }
            }
        }
    }
    out
}

/// Weak splitting: head substitutions without splitting under every number
/// of leading abstractions, followed by sort and product substitutions.
pub fn enumerate_weak(site: &Site, filter: &Filter, namer: &mut dyn Namer) -> Vec<ElemSub> {
    let n = site.sel.binders.len();
    let mut out = Vec::new();
    for m in 0..=n {
        for (head, ty) in site.heads(m) {
            if let Some(hs) = &filter.heads {
                if !hs.contains(&head) {
                    continue;
                }
            }
            let Some((s, s2)) = site.head_sorts(&ty, m) else {
                continue;
            };
            if s != s2 {
                continue;
            }
            if let Some(e) = site.head_sub(&head, &ty, m, &[], namer) {
                out.push(e);
            }
        }
    }
    out.extend(sort_and_product_subs(site, filter, namer));
    out
}

/// Whether an elementary substitution of this kind belongs to the set
/// generated for the selected variable: its sorts follow the axioms and
/// rules of `site.rules`.
pub fn in_sigma(site: &Site, kind: &SubKind) -> bool {
    match kind {
        SubKind::Head {
            head,
            abstractions,
            sorts,
            ..
        } => {
            let m = *abstractions;
            if m > site.sel.binders.len() {
                return false;
            }
            let Some((_, ty)) = site.heads(m).into_iter().find(|(h, _)| h == head) else {
                return false;
            };
            let Some((s, s2)) = site.head_sorts(&ty, m) else {
                return false;
            };
            sort_sequences(site.rules, s, s2, sorts.len()).contains(sorts)
        }
        SubKind::Sort(s) => site
            .sel
            .target
            .as_sort()
            .is_some_and(|p| site.rules.axioms.contains(&(*s, p))),
        SubKind::Prod(s, s2) => site
            .sel
            .target
            .as_sort()
            .is_some_and(|p| site.rules.rules.contains(&(*s, *s2, p))),
    }
}

/// Rebuilds a recorded elementary substitution with its recorded names.
pub fn rebuild(site: &Site, kind: &SubKind, fresh: &[Name]) -> Option<ElemSub> {
    let mut names = Recorded::new(fresh);
    match kind {
        SubKind::Head {
            head,
            abstractions,
            sorts,
            ..
        } => {
            let m = *abstractions;
            if m > site.sel.binders.len() {
                return None;
            }
            let (_, ty) = site.heads(m).into_iter().find(|(h, _)| h == head)?;
            site.head_sub(head, &ty, m, sorts, &mut names)
        }
        SubKind::Sort(s) => Some(site.sort_sub(*s)),
        SubKind::Prod(s, s2) => Some(site.prod_sub(*s, *s2, &mut names)),
    }
}

/// Rigidity of the target atom of a selected variable.
pub fn target_rigidity(an: &Analysis, sel: &Selected) -> Rigidity {
    an.head_rigidity(&sel.target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{normalize_context, select_existential};
    use crate::kernel::{parse_term, DEFAULT_FUEL};
    use crate::pts::meta_system;

    fn p(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn universals(src: &[(&str, &str)]) -> QContext {
        let mut c = QContext::new();
        for (n, t) in src {
            c.push(Entry::universal(*n, p(t)));
        }
        c
    }

    fn delta() -> QContext {
        universals(&[
            ("T", "Prop"),
            ("R", "T -> T -> Prop"),
            ("Eq", "T -> T -> Prop"),
            ("Antisym", "(x:T)(y:T)(R x y) -> (R y x) -> (Eq x y)"),
            ("a", "T"),
            ("b", "T"),
            ("u", "(R a b)"),
            ("v", "(R b a)"),
        ])
    }

    fn five_two() -> QContext {
        universals(&[
            ("A", "Prop"),
            ("B", "Prop"),
            ("I", "Prop -> Prop"),
            ("u", "(P:Prop)(I P) -> P"),
            ("v", "(I (A -> B))"),
            ("w", "A"),
        ])
    }

    #[test]
    fn apply_examples() {
        let s = Substitution::single("x", QContext::new(), Term::free("a"));
        assert_eq!(s.apply_to_term(&p("(R x z)")), p("(R a z)"));
        assert_eq!(s.apply_to_term(&Term::prop()), Term::prop());
        let mut s2 = Substitution::new();
        s2.bind("h1", QContext::new(), Term::free("a"));
        s2.bind("h2", QContext::new(), Term::free("b"));
        assert_eq!(s2.apply_to_term(&p("(Eq h1 h2)")), p("(Eq a b)"));
        let c = delta();
        assert_eq!(Substitution::new().apply_to_context(&c), c);
        let absent = Substitution::single("zz", QContext::new(), Term::prop());
        assert_eq!(absent.apply_to_context(&c), c);
    }

    #[test]
    fn composition() {
        let tau = Substitution::single("y", QContext::new(), Term::free("b"));
        let sigma = Substitution::single("x", QContext::new(), p("(f y)"));
        let c = compose(&tau, &sigma);
        assert_eq!(c.get("x").unwrap().term, p("(f b)"));
        assert_eq!(c.get("y").unwrap().term, Term::free("b"));
        assert_eq!(compose(&tau, &Substitution::new()), tau);
        let t = p("(g x y)");
        assert_eq!(
            c.apply_to_term(&t),
            tau.apply_to_term(&sigma.apply_to_term(&t))
        );
    }

    fn site_test<R>(ctx: &QContext, f: impl FnOnce(&Site) -> R) -> R {
        let m = meta_system();
        let (ctx, an) = normalize_context(ctx, &m, DEFAULT_FUEL).unwrap();
        let sel = select_existential(&ctx, &an, true).unwrap();
        let site = Site {
            ctx: &ctx,
            an: &an,
            sel: &sel,
            spec: &m,
            rules: &m,
            fuel: DEFAULT_FUEL,
        };
        f(&site)
    }

    #[test]
    fn antisym_head_substitution() {
        let mut g = delta();
        g.push(Entry::existential("x", p("(Eq a b)")));
        let m = meta_system();
        site_test(&g, |site| {
            let mut names = NameGen::new(g.names());
            let subs = enumerate_elementary(site, 0, &Filter::all(), &mut names);
            let anti = subs
                .iter()
                .find(|e| e.head_name == "Antisym")
                .expect("Antisym head");
            assert_eq!(anti.binding().term, p("(Antisym h1 h2 h3 h4)"));
            let want: Vec<Entry> = vec![
                Entry::existential("h1", p("T")),
                Entry::existential("h2", p("T")),
                Entry::existential("h3", p("(R h1 h2)")),
                Entry::existential("h4", p("(R h2 h1)")),
                Entry::constraint(vec![], p("(Eq h1 h2)"), p("(Eq a b)")),
            ];
            assert_eq!(anti.binding().gamma.entries(), &want[..]);
            let image = anti.payload.apply_to_context(&g);
            let mut expect = delta();
            expect.extend(want);
            assert_eq!(image, expect);
            check_well_typed(&m, &g, &anti.payload, DEFAULT_FUEL).unwrap();
            // every generated substitution is well-typed in Meta
            for e in &subs {
                check_well_typed(&m, &g, &e.payload, DEFAULT_FUEL).unwrap();
            }
        });
    }

    #[test]
    fn splitting_substitution() {
        let mut g = five_two();
        g.push(Entry::existential("p", p("B")));
        let m = meta_system();
        site_test(&g, |site| {
            let (_, uty) = site
                .heads(0)
                .into_iter()
                .find(|(h, _)| *h == HeadRef::Global(Name::from("u")))
                .unwrap();
            let mut names = NameGen::new(g.names());
            let e = site
                .head_sub(
                    &HeadRef::Global(Name::from("u")),
                    &uty,
                    0,
                    &[(Sort::Prop, Sort::Prop)],
                    &mut names,
                )
                .unwrap();
            assert_eq!(e.binding().term, p("(u h1 h2 h4)"));
            let want: Vec<Entry> = vec![
                Entry::existential("h1", p("Prop")),
                Entry::existential("h2", p("(I h1)")),
                Entry::existential("H3", p("Prop")),
                Entry::existential("K3", p("H3 -> Prop")),
                Entry::constraint(vec![], p("h1"), p("(z:H3)(K3 z)")),
                Entry::existential("h4", p("H3")),
                Entry::constraint(vec![], p("(K3 h4)"), p("B")),
            ];
            assert_eq!(e.binding().gamma.entries(), &want[..]);
            check_well_typed(&m, &g, &e.payload, DEFAULT_FUEL).unwrap();
            let image = e.payload.apply_to_context(&g);
            check_context(&m, &image, Mode::WithConstraints, DEFAULT_FUEL).unwrap();
        });
    }

    #[test]
    fn sort_sequences_follow_rules() {
        let m = meta_system();
        assert_eq!(sort_sequences(&m, Sort::Prop, Sort::Prop, 0), vec![vec![]]);
        assert!(sort_sequences(&m, Sort::Type, Sort::Prop, 0).is_empty());
        let one = sort_sequences(&m, Sort::Prop, Sort::Prop, 1);
        assert_eq!(
            one,
            vec![
                vec![(Sort::Prop, Sort::Prop)],
                vec![(Sort::Type, Sort::Prop)]
            ]
        );
        assert_eq!(sort_sequences(&m, Sort::Prop, Sort::Prop, 2).len(), 4);
        assert!(sort_sequences(&m, Sort::Type, Sort::Prop, 2).is_empty());
    }

    #[test]
    fn sort_targets() {
        let m = meta_system();
        let mut g = QContext::new();
        g.push(Entry::existential("x", Term::prop()));
        site_test(&g, |site| {
            let mut names = NameGen::new(g.names());
            let subs = enumerate_elementary(site, 2, &Filter::all(), &mut names);
            assert!(subs.iter().all(|e| !matches!(e.kind, SubKind::Sort(_))));
            let prods: Vec<_> = subs
                .iter()
                .filter_map(|e| match e.kind {
                    SubKind::Prod(a, b) => Some((a, b)),
                    _ => None,
                })
                .collect();
            assert_eq!(
                prods,
                vec![(Sort::Prop, Sort::Prop), (Sort::Type, Sort::Prop)]
            );
            for e in &subs {
                check_well_typed(&m, &g, &e.payload, DEFAULT_FUEL).unwrap();
            }
        });
        let mut g = QContext::new();
        g.push(Entry::existential("x", Term::ty()));
        site_test(&g, |site| {
            let mut names = NameGen::new(g.names());
            let subs = enumerate_elementary(site, 0, &Filter::all(), &mut names);
            let sorts: Vec<_> = subs
                .iter()
                .filter_map(|e| match e.kind {
                    SubKind::Sort(s) => Some(s),
                    _ => None,
                })
                .collect();
            assert_eq!(sorts, vec![Sort::Prop]);
            for e in &subs {
                check_well_typed(&m, &g, &e.payload, DEFAULT_FUEL).unwrap();
            }
        });
    }

    #[test]
    fn ill_typed_bindings() {
        let m = meta_system();
        let mut g = delta();
        g.push(Entry::existential("h3", p("(R a b)")));
        let bad = Substitution::single("h3", QContext::new(), Term::free("v"));
        assert!(matches!(
            check_well_typed(&m, &g, &bad, DEFAULT_FUEL),
            Err(SubstError::IllTypedBinding(..))
        ));
        let uni = Substitution::single("a", QContext::new(), Term::free("b"));
        assert!(matches!(
            check_well_typed(&m, &g, &uni, DEFAULT_FUEL),
            Err(SubstError::BindsUniversal(_))
        ));
        let good = Substitution::single("h3", QContext::new(), Term::free("u"));
        check_well_typed(&m, &g, &good, DEFAULT_FUEL).unwrap();
    }

    #[test]
    fn head_count_matches_arity() {
        let mut g = delta();
        g.push(Entry::existential("x", p("(Eq a b)")));
        site_test(&g, |site| {
            let mut names = NameGen::new(g.names());
            let subs = enumerate_elementary(site, 0, &Filter::all(), &mut names);
            let anti: Vec<_> = subs.iter().filter(|e| e.head_name == "Antisym").collect();
            assert_eq!(anti.len(), 1);
            let hs = anti[0]
                .binding()
                .gamma
                .entries()
                .iter()
                .filter(|e| matches!(e, Entry::Existential { .. }))
                .count();
            assert_eq!(hs, 4);
        });
    }

    #[test]
    fn names_skip_reserved() {
        let reserved = [Name::from("h1"), Name::from("H2")];
        let mut g = NameGen::new(reserved.iter());
        assert_eq!(&*g.arg(), "h2");
        let (h, k) = g.split();
        assert_eq!((&*h, &*k), ("H3", "K3"));
        assert_eq!(&*g.codomain(), "k4");
    }
}
