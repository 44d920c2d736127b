use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Global identifier of a context variable.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Sort {
    Prop,
    Type,
    Extern,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Prop => "Prop",
            Sort::Type => "Type",
            Sort::Extern => "Extern",
        })
    }
}

/// Head symbol of an atomic term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    Sort(Sort),
    Free(Name),
    /// de Bruijn index of a bound variable.
    Bound(u32),
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Sort(s) => write!(f, "{s}"),
            Head::Free(n) => write!(f, "{n}"),
            Head::Bound(i) => write!(f, "#{i}"),
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Sort(Sort),
    Var(u32),
    Free(Name),
    App(Term, Term),
    /// Binder name is only a printing hint; it never takes part in equality.
    Lam(Name, Term, Term),
    Prod(Name, Term, Term),
}

struct Inner {
    node: Node,
    /// One more than the largest loose de Bruijn index (0 when locally closed).
    loose: u32,
    size: u32,
}

/// Immutable, cheaply clonable term. Bound variables use de Bruijn indices,
/// context variables use global names.
#[derive(Clone)]
pub struct Term(Arc<Inner>);

impl Term {
    fn mk(node: Node) -> Term {
        let (loose, size) = match &node {
            Node::Sort(_) | Node::Free(_) => (0, 1),
            Node::Var(i) => (i + 1, 1),
            Node::App(f, a) => (
                f.loose().max(a.loose()),
                1 + f.node_count() + a.node_count(),
            ),
            Node::Lam(_, ty, body) | Node::Prod(_, ty, body) => (
                ty.loose().max(body.loose().saturating_sub(1)),
                1 + ty.node_count() + body.node_count(),
            ),
        };
        Term(Arc::new(Inner { node, loose, size }))
    }

    pub fn sort(s: Sort) -> Term {
        Term::mk(Node::Sort(s))
    }

    pub fn prop() -> Term {
        Term::sort(Sort::Prop)
    }

    pub fn ty() -> Term {
        Term::sort(Sort::Type)
    }

    pub fn var(i: u32) -> Term {
        Term::mk(Node::Var(i))
    }

    pub fn free(n: impl Into<Name>) -> Term {
        Term::mk(Node::Free(n.into()))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::mk(Node::App(f, a))
    }

    pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(f, Term::app)
    }

    pub fn lam(n: impl Into<Name>, ty: Term, body: Term) -> Term {
        Term::mk(Node::Lam(n.into(), ty, body))
    }

    pub fn prod(n: impl Into<Name>, ty: Term, body: Term) -> Term {
        Term::mk(Node::Prod(n.into(), ty, body))
    }

    /// Non-dependent product `a -> b`; `b` lives outside the new binder.
    pub fn arrow(a: Term, b: Term) -> Term {
        Term::prod("_", a, b.shift(1, 0))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Number of syntax nodes.
    pub fn node_count(&self) -> u32 {
        self.0.size
    }

    pub fn loose(&self) -> u32 {
        self.0.loose
    }

    pub fn is_closed(&self) -> bool {
        self.0.loose == 0
    }

    pub fn ptr_eq(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_sort(&self) -> Option<Sort> {
        match self.node() {
            Node::Sort(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_free(&self) -> Option<&Name> {
        match self.node() {
            Node::Free(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_lam(&self) -> bool {
        matches!(self.node(), Node::Lam(..))
    }

    pub fn is_prod(&self) -> bool {
        matches!(self.node(), Node::Prod(..))
    }

    /// Splits an application spine into its head and arguments.
    pub fn spine(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Node::App(f, a) = cur.node() {
            args.push(a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    /// Head of an atomic term, `None` for abstractions, products and
    /// spines headed by something that is not a variable or a sort.
    pub fn head(&self) -> Option<Head> {
        let (h, _) = self.spine();
        match h.node() {
            Node::Sort(s) => Some(Head::Sort(*s)),
            Node::Free(n) => Some(Head::Free(n.clone())),
            Node::Var(i) => Some(Head::Bound(*i)),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        let mut n = 0;
        let mut cur = self;
        while let Node::App(f, _) = cur.node() {
            n += 1;
            cur = f;
        }
        n
    }

    /// Peels leading products: returns binder (name, type) pairs and the body.
    pub fn telescope(&self) -> (Vec<(Name, Term)>, Term) {
        let mut binders = Vec::new();
        let mut cur = self.clone();
        while let Node::Prod(n, a, b) = cur.node() {
            binders.push((n.clone(), a.clone()));
            let next = b.clone();
            cur = next;
        }
        (binders, cur)
    }

    /// Peels leading abstractions.
    pub fn lambdas(&self) -> (Vec<(Name, Term)>, Term) {
        let mut binders = Vec::new();
        let mut cur = self.clone();
        while let Node::Lam(n, a, b) = cur.node() {
            binders.push((n.clone(), a.clone()));
            let next = b.clone();
            cur = next;
        }
        (binders, cur)
    }

    /// Shifts loose indices `>= cutoff` by `d`.
    pub fn shift(&self, d: i64, cutoff: u32) -> Term {
        if d == 0 || self.loose() <= cutoff {
            return self.clone();
        }
        match self.node() {
            Node::Var(i) => {
                let j = *i as i64 + d;
                assert!(j >= 0, "negative de Bruijn index after shift");
                Term::var(j as u32)
            }
            Node::Sort(_) | Node::Free(_) => self.clone(),
            Node::App(f, a) => Term::app(f.shift(d, cutoff), a.shift(d, cutoff)),
            Node::Lam(n, t, b) => Term::lam(n.clone(), t.shift(d, cutoff), b.shift(d, cutoff + 1)),
            Node::Prod(n, t, b) => {
                Term::prod(n.clone(), t.shift(d, cutoff), b.shift(d, cutoff + 1))
            }
        }
    }

    /// Replaces index 0 by `arg` and lowers the other loose indices: the
    /// body of a binder applied to `arg`.
    pub fn instantiate(&self, arg: &Term) -> Term {
        self.instantiate_at(arg, 0)
    }

    fn instantiate_at(&self, arg: &Term, depth: u32) -> Term {
        if self.loose() <= depth {
            return self.clone();
        }
        match self.node() {
            Node::Var(i) => {
                if *i == depth {
                    arg.shift(depth as i64, 0)
                } else if *i > depth {
                    Term::var(i - 1)
                } else {
                    self.clone()
                }
            }
            Node::Sort(_) | Node::Free(_) => self.clone(),
            Node::App(f, a) => {
                Term::app(f.instantiate_at(arg, depth), a.instantiate_at(arg, depth))
            }
            Node::Lam(n, t, b) => Term::lam(
                n.clone(),
                t.instantiate_at(arg, depth),
                b.instantiate_at(arg, depth + 1),
            ),
            Node::Prod(n, t, b) => Term::prod(
                n.clone(),
                t.instantiate_at(arg, depth),
                b.instantiate_at(arg, depth + 1),
            ),
        }
    }

    /// Whether index `i` occurs loose.
    pub fn has_loose(&self, i: u32) -> bool {
        if self.loose() <= i {
            return false;
        }
        match self.node() {
            Node::Var(j) => *j == i,
            Node::Sort(_) | Node::Free(_) => false,
            Node::App(f, a) => f.has_loose(i) || a.has_loose(i),
            Node::Lam(_, t, b) | Node::Prod(_, t, b) => t.has_loose(i) || b.has_loose(i + 1),
        }
    }

    /// Replaces the free name `target` by `u`, shifting `u` under binders.
    pub fn subst_free(&self, target: &str, u: &Term) -> Term {
        self.map_free(&mut |n: &Name, depth| {
            if &**n == target {
                Some(u.shift(depth as i64, 0))
            } else {
                None
            }
        })
    }

    /// Rebuilds the term, replacing free names for which `f` returns a term.
    /// `f` receives the binder depth so it can shift its result.
    pub fn map_free(&self, f: &mut dyn FnMut(&Name, u32) -> Option<Term>) -> Term {
        self.map_free_at(f, 0)
    }

    fn map_free_at(&self, f: &mut dyn FnMut(&Name, u32) -> Option<Term>, depth: u32) -> Term {
        match self.node() {
            Node::Free(n) => f(n, depth).unwrap_or_else(|| self.clone()),
            Node::Sort(_) | Node::Var(_) => self.clone(),
            Node::App(a, b) => {
                let a2 = a.map_free_at(f, depth);
                let b2 = b.map_free_at(f, depth);
                if a2.ptr_eq(a) && b2.ptr_eq(b) {
                    self.clone()
                } else {
                    Term::app(a2, b2)
                }
            }
            Node::Lam(n, t, b) | Node::Prod(n, t, b) => {
                let t2 = t.map_free_at(f, depth);
                let b2 = b.map_free_at(f, depth + 1);
                if t2.ptr_eq(t) && b2.ptr_eq(b) {
                    self.clone()
                } else if self.is_lam() {
                    Term::lam(n.clone(), t2, b2)
                } else {
                    Term::prod(n.clone(), t2, b2)
                }
            }
        }
    }

    /// Turns free occurrences of `target` into the bound variable of a new
    /// enclosing binder (index 0 at top level).
    pub fn abstract_free(&self, target: &str) -> Term {
        self.shift(1, 0).map_free(&mut |n: &Name, depth| {
            if &**n == target {
                Some(Term::var(depth))
            } else {
                None
            }
        })
    }

    pub fn mentions(&self, target: &str) -> bool {
        match self.node() {
            Node::Free(n) => &**n == target,
            Node::Sort(_) | Node::Var(_) => false,
            Node::App(a, b) => a.mentions(target) || b.mentions(target),
            Node::Lam(_, t, b) | Node::Prod(_, t, b) => t.mentions(target) || b.mentions(target),
        }
    }

    pub fn free_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Name>) {
        match self.node() {
            Node::Free(n) => {
                out.insert(n.clone());
            }
            Node::Sort(_) | Node::Var(_) => {}
            Node::App(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            Node::Lam(_, t, b) | Node::Prod(_, t, b) => {
                t.collect_free(out);
                b.collect_free(out);
            }
        }
    }

    /// Any β-redex anywhere in the term.
    pub fn has_beta_redex(&self) -> bool {
        match self.node() {
            Node::Sort(_) | Node::Var(_) | Node::Free(_) => false,
            Node::App(f, a) => f.is_lam() || f.has_beta_redex() || a.has_beta_redex(),
            Node::Lam(_, t, b) | Node::Prod(_, t, b) => t.has_beta_redex() || b.has_beta_redex(),
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        if self.0.size != other.0.size || self.0.loose != other.0.loose {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Sort(a), Node::Sort(b)) => a == b,
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Free(a), Node::Free(b)) => a == b,
            (Node::App(f, a), Node::App(g, b)) => f == g && a == b,
            (Node::Lam(_, t, b), Node::Lam(_, u, c)) => t == u && b == c,
            (Node::Prod(_, t, b), Node::Prod(_, u, c)) => t == u && b == c,
            _ => false,
        }
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self.node() {
            Node::Sort(s) => {
                0u8.hash(state);
                s.hash(state);
            }
            Node::Var(i) => {
                1u8.hash(state);
                i.hash(state);
            }
            Node::Free(n) => {
                2u8.hash(state);
                n.hash(state);
            }
            Node::App(f, a) => {
                3u8.hash(state);
                f.hash(state);
                a.hash(state);
            }
            Node::Lam(_, t, b) => {
                4u8.hash(state);
                t.hash(state);
                b.hash(state);
            }
            Node::Prod(_, t, b) => {
                5u8.hash(state);
                t.hash(state);
                b.hash(state);
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
