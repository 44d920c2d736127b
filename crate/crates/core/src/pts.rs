//! Pure type systems: presets, the Meta system and the type checker.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::context::{Entry, QContext};
use crate::kernel::{
    normal_eta_long, normalize, KernelError, Locals, Name, Node, Signature, Sort, Term,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtsSpec {
    pub name: String,
    pub sorts: BTreeSet<Sort>,
    pub axioms: BTreeSet<(Sort, Sort)>,
    pub rules: BTreeSet<(Sort, Sort, Sort)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown system '{0}'")]
pub struct UnknownSystem(pub String);

pub const SYSTEM_NAMES: [&str; 9] = [
    "stlc",
    "lf",
    "f",
    "f2p",
    "omega_weak",
    "omega_weak_p",
    "fomega",
    "cc",
    "meta",
];

/// One of the eight cube systems, or `meta`.
pub fn cube_system(name: &str) -> Result<PtsSpec, UnknownSystem> {
    use Sort::{Prop as P, Type as T};
    // (dependent types, polymorphism, type operators)
    let (dep, poly, ops) = match name {
        "stlc" => (false, false, false),
        "lf" => (true, false, false),
        "f" => (false, true, false),
        "f2p" => (true, true, false),
        "omega_weak" => (false, false, true),
        "omega_weak_p" => (true, false, true),
        "fomega" => (false, true, true),
        "cc" => (true, true, true),
        "meta" => return Ok(meta_system()),
        _ => return Err(UnknownSystem(name.to_string())),
    };
    let mut rules = BTreeSet::from([(P, P, P)]);
    if dep {
        rules.insert((P, T, T));
    }
    if poly {
        rules.insert((T, P, P));
    }
    if ops {
        rules.insert((T, T, T));
    }
    Ok(PtsSpec {
        name: name.to_string(),
        sorts: BTreeSet::from([P, T]),
        axioms: BTreeSet::from([(P, T)]),
        rules,
    })
}

pub fn meta_system() -> PtsSpec {
    use Sort::{Extern as E, Prop as P, Type as T};
    PtsSpec {
        name: "meta".to_string(),
        sorts: BTreeSet::from([P, T, E]),
        axioms: BTreeSet::from([(P, T), (T, E)]),
        rules: BTreeSet::from([
            (P, P, P),
            (P, T, T),
            (T, P, P),
            (T, T, T),
            (P, E, E),
            (T, E, E),
        ]),
    }
}

pub fn is_functional(spec: &PtsSpec) -> bool {
    let mut ax = HashMap::new();
    for (s, t) in &spec.axioms {
        if *ax.entry(*s).or_insert(*t) != *t {
            return false;
        }
    }
    let mut rl = HashMap::new();
    for (s, t, u) in &spec.rules {
        if *rl.entry((*s, *t)).or_insert(*u) != *u {
            return false;
        }
    }
    true
}

impl PtsSpec {
    pub fn axiom(&self, s: Sort) -> Option<Sort> {
        self.axioms.iter().find(|(a, _)| *a == s).map(|(_, b)| *b)
    }

    pub fn rule(&self, s1: Sort, s2: Sort) -> Option<Sort> {
        self.rules
            .iter()
            .find(|(a, b, _)| *a == s1 && *b == s2)
            .map(|(_, _, c)| *c)
    }
}

impl fmt::Display for PtsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    WithoutConstraints,
    WithConstraints,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("no axiom for sort {0}")]
    NoAxiom(Sort),
    #[error("no rule for product ({0}, {1})")]
    NoRule(Sort, Sort),
    #[error("{0} is not a type")]
    NotAType(String),
    #[error("{term} is applied but has type {ty}")]
    NotAFunction { term: String, ty: String },
    #[error("in {term}: argument has type {found}, expected {expected}")]
    ArgumentMismatch {
        term: String,
        expected: String,
        found: String,
    },
    #[error("{0} has type {1}, expected {2}")]
    Mismatch(String, String, String),
    #[error("constraint sides have types {0} and {1}")]
    ConstraintTypeMismatch(String, String),
    #[error("name {0} declared twice")]
    Duplicate(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Syntax-directed type inference over a fixed signature of free names.
/// Types of locals are kept in βη-normal form.
pub struct Checker<'a> {
    pub spec: &'a PtsSpec,
    pub sig: &'a dyn Signature,
    pub equiv: Option<&'a Equiv>,
    pub fuel: usize,
}

impl<'a> Checker<'a> {
    pub fn new(spec: &'a PtsSpec, sig: &'a dyn Signature, fuel: usize) -> Checker<'a> {
        Checker {
            spec,
            sig,
            equiv: None,
            fuel,
        }
    }

    pub fn with_equiv(mut self, equiv: &'a Equiv) -> Checker<'a> {
        self.equiv = Some(equiv);
        self
    }

    fn nf(&self, t: &Term) -> Result<Term, TypeError> {
        Ok(normalize(t, self.fuel)?)
    }

    /// βη-normal type of `t` under `locals`.
    pub fn infer(&self, locals: &mut Locals, t: &Term) -> Result<Term, TypeError> {
        match t.node() {
            Node::Sort(s) => self
                .spec
                .axiom(*s)
                .map(Term::sort)
                .ok_or(TypeError::NoAxiom(*s)),
            Node::Var(i) => locals
                .lookup(*i)
                .ok_or_else(|| TypeError::Unbound(format!("#{i}"))),
            Node::Free(n) => self
                .sig
                .type_of(n)
                .ok_or_else(|| TypeError::Unbound(n.to_string())),
            Node::App(f, a) => {
                let tf = self.infer(locals, f)?;
                let (dom, cod) = match tf.node() {
                    Node::Prod(_, d, c) => (d.clone(), c.clone()),
                    _ => match self.product_of(locals, &tf) {
                        Some(p) => match p.node() {
                            Node::Prod(_, d, c) => (d.clone(), c.clone()),
                            _ => unreachable!(),
                        },
                        None => {
                            return Err(TypeError::NotAFunction {
                                term: t.to_string(),
                                ty: tf.to_string(),
                            })
                        }
                    },
                };
                let ta = self.infer(locals, a)?;
                if !self.convertible(locals, &ta, &dom) {
                    return Err(TypeError::ArgumentMismatch {
                        term: t.to_string(),
                        expected: dom.to_string(),
                        found: ta.to_string(),
                    });
                }
                self.nf(&cod.instantiate(a))
            }
            Node::Lam(n, a, b) => {
                let s1 = self.infer_sort(locals, a)?;
                let a = self.nf(a)?;
                locals.push(a.clone());
                let r = self.infer(locals, b).and_then(|tb| {
                    let s2 = self.infer_sort(locals, &tb)?;
                    Ok((tb, s2))
                });
                locals.pop();
                let (tb, s2) = r?;
                self.spec.rule(s1, s2).ok_or(TypeError::NoRule(s1, s2))?;
                Ok(Term::prod(n.clone(), a, tb))
            }
            Node::Prod(_, a, b) => {
                let s1 = self.infer_sort(locals, a)?;
                let a = self.nf(a)?;
                locals.push(a);
                let s2 = self.infer_sort(locals, b);
                locals.pop();
                let s2 = s2?;
                let s3 = self.spec.rule(s1, s2).ok_or(TypeError::NoRule(s1, s2))?;
                Ok(Term::sort(s3))
            }
        }
    }

    /// Sort of a type.
    pub fn infer_sort(&self, locals: &mut Locals, t: &Term) -> Result<Sort, TypeError> {
        let ty = self.infer(locals, t)?;
        match ty.as_sort().or_else(|| self.sort_in_class(locals, &ty)) {
            Some(s) => Ok(s),
            None => Err(TypeError::NotAType(t.to_string())),
        }
    }

    /// Checks `t` against the normal type `ty`.
    pub fn check(&self, locals: &mut Locals, t: &Term, ty: &Term) -> Result<(), TypeError> {
        let got = self.infer(locals, t)?;
        if self.convertible(locals, &got, ty) {
            Ok(())
        } else {
            Err(TypeError::Mismatch(
                t.to_string(),
                got.to_string(),
                ty.to_string(),
            ))
        }
    }

    /// Conversion of two normal terms, modulo the constraints when present.
    pub fn convertible(&self, locals: &Locals, a: &Term, b: &Term) -> bool {
        if a == b {
            return true;
        }
        let Some(eq) = self.equiv else {
            return false;
        };
        (0..=locals.len()).any(|k| match (close(locals, a, k), close(locals, b, k)) {
            (Some(ca), Some(cb)) => eq.equal(&ca, &cb),
            _ => false,
        })
    }

    fn sort_in_class(&self, locals: &Locals, t: &Term) -> Option<Sort> {
        let eq = self.equiv?;
        (0..=locals.len()).find_map(|k| {
            let ct = close(locals, t, k)?;
            eq.find_sort(&ct, &locals.as_slice()[locals.len() - k..])
        })
    }

    fn product_of(&self, locals: &Locals, t: &Term) -> Option<Term> {
        let eq = self.equiv?;
        for k in 0..=locals.len() {
            let Some(ct) = close(locals, t, k) else {
                continue;
            };
            if let Some(p) = eq.find_product(&ct, &locals.as_slice()[locals.len() - k..]) {
                return Some(p);
            }
        }
        None
    }
}

/// Wraps the innermost `k` locals around `t` as products, if that closes it.
fn close(locals: &Locals, t: &Term, k: usize) -> Option<Term> {
    if t.loose() as usize > k {
        return None;
    }
    let ls = locals.as_slice();
    let mut out = t.clone();
    for ty in ls[ls.len() - k..].iter().rev() {
        out = Term::prod("_", ty.clone(), out);
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// equivalence modulo constraints

const MAX_MERGES: usize = 1000;

/// Approximation of the congruence generated by a set of equations between
/// closed normal terms. The closure over the equations is computed once;
/// queried terms are classified against it without changing it.
#[derive(Debug, Clone, Default)]
pub struct Equiv {
    pairs: Vec<(Term, Term)>,
    closure: OnceLock<Frozen>,
}

#[derive(Debug, Hash, PartialEq, Eq, Clone, Copy)]
enum Shape {
    Leaf(usize),
    App(usize, usize),
    Lam(usize, usize),
    Prod(usize, usize),
}

struct Closure {
    ids: HashMap<Term, usize>,
    terms: Vec<Term>,
    shapes: Vec<Shape>,
    parent: Vec<usize>,
}

impl Closure {
    fn intern(&mut self, t: &Term) -> usize {
        if let Some(&i) = self.ids.get(t) {
            return i;
        }
        let shape = match t.node() {
            Node::App(f, a) => Shape::App(self.intern(f), self.intern(a)),
            Node::Lam(_, a, b) => Shape::Lam(self.intern(a), self.intern(b)),
            Node::Prod(_, a, b) => Shape::Prod(self.intern(a), self.intern(b)),
            _ => Shape::Leaf(self.terms.len()),
        };
        let i = self.terms.len();
        let shape = match shape {
            Shape::Leaf(_) => Shape::Leaf(i),
            s => s,
        };
        self.ids.insert(t.clone(), i);
        self.terms.push(t.clone());
        self.shapes.push(shape);
        self.parent.push(i);
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn canon(&mut self, s: Shape) -> Shape {
        match s {
            Shape::Leaf(i) => Shape::Leaf(self.find(i)),
            Shape::App(a, b) => Shape::App(self.find(a), self.find(b)),
            Shape::Lam(a, b) => Shape::Lam(self.find(a), self.find(b)),
            Shape::Prod(a, b) => Shape::Prod(self.find(a), self.find(b)),
        }
    }

    fn run(&mut self, merges: &[(usize, usize)]) {
        let mut count = 0;
        for &(a, b) in merges {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra != rb {
                if count == MAX_MERGES {
                    return;
                }
                self.parent[ra] = rb;
                count += 1;
            }
        }
        loop {
            let mut table: HashMap<Shape, usize> = HashMap::new();
            let mut changed = false;
            for i in 0..self.shapes.len() {
                if matches!(self.shapes[i], Shape::Leaf(_)) {
                    continue;
                }
                let key = self.canon(self.shapes[i]);
                match table.get(&key) {
                    Some(&j) => {
                        let (ri, rj) = (self.find(i), self.find(j));
                        if ri != rj {
                            if count == MAX_MERGES {
                                return;
                            }
                            self.parent[ri] = rj;
                            count += 1;
                            changed = true;
                        }
                    }
                    None => {
                        table.insert(key, i);
                    }
                }
            }
            if !changed {
                return;
            }
        }
    }

    fn freeze(mut self) -> Frozen {
        let class: Vec<usize> = (0..self.terms.len()).map(|i| self.find(i)).collect();
        let mut table = HashMap::new();
        for (i, &c) in class.iter().enumerate() {
            if !matches!(self.shapes[i], Shape::Leaf(_)) {
                let key = self.canon(self.shapes[i]);
                table.entry(key).or_insert(c);
            }
        }
        Frozen {
            ids: self.ids,
            terms: self.terms,
            class,
            table,
        }
    }
}

/// A congruence closure at its fixed point.
#[derive(Debug, Clone)]
struct Frozen {
    ids: HashMap<Term, usize>,
    terms: Vec<Term>,
    class: Vec<usize>,
    /// Canonical shapes of compound terms, by class.
    table: HashMap<Shape, usize>,
}

/// Classes of terms outside the closure, numbered after its terms.
#[derive(Default)]
struct Query {
    extra: HashMap<Shape, usize>,
    leaves: HashMap<Term, usize>,
}

impl Frozen {
    fn class_of(&self, q: &mut Query, t: &Term) -> usize {
        if let Some(&i) = self.ids.get(t) {
            return self.class[i];
        }
        let shape = match t.node() {
            Node::App(f, a) => Shape::App(self.class_of(q, f), self.class_of(q, a)),
            Node::Lam(_, a, b) => Shape::Lam(self.class_of(q, a), self.class_of(q, b)),
            Node::Prod(_, a, b) => Shape::Prod(self.class_of(q, a), self.class_of(q, b)),
            _ => {
                let next = self.terms.len() + q.extra.len() + q.leaves.len();
                return *q.leaves.entry(t.clone()).or_insert(next);
            }
        };
        if let Some(&c) = self.table.get(&shape) {
            return c;
        }
        let next = self.terms.len() + q.extra.len() + q.leaves.len();
        *q.extra.entry(shape).or_insert(next)
    }

    /// Terms of the closure in the class of `t`, then `t` itself.
    fn members<'a>(&'a self, t: &'a Term) -> impl Iterator<Item = &'a Term> + 'a {
        let c = self.class_of(&mut Query::default(), t);
        self.terms
            .iter()
            .zip(&self.class)
            .filter(move |(_, &k)| k == c)
            .map(|(u, _)| u)
            .chain(std::iter::once(t))
    }
}

/// Strips product binders whose domains are exactly `prefix`.
fn under_prefix<'a>(t: &'a Term, prefix: &[Term]) -> Option<&'a Term> {
    let mut cur = t;
    for ty in prefix {
        match cur.node() {
            Node::Prod(_, a, b) if a == ty => cur = b,
            _ => return None,
        }
    }
    Some(cur)
}

impl Equiv {
    pub fn new(pairs: Vec<(Term, Term)>) -> Equiv {
        Equiv {
            pairs,
            closure: OnceLock::new(),
        }
    }

    /// Equations of a context: each constraint closed over its locals.
    pub fn from_context(ctx: &QContext, fuel: usize) -> Equiv {
        let mut pairs = Vec::new();
        for e in ctx.entries() {
            if let Entry::Constraint(c) = e {
                let (a, b) = c.closed();
                if let (Ok(a), Ok(b)) = (normalize(&a, fuel), normalize(&b, fuel)) {
                    if a != b {
                        pairs.push((a, b));
                    }
                }
            }
        }
        Equiv::new(pairs)
    }

    pub fn pairs(&self) -> &[(Term, Term)] {
        &self.pairs
    }

    fn frozen(&self) -> &Frozen {
        self.closure.get_or_init(|| {
            let mut c = Closure {
                ids: HashMap::new(),
                terms: Vec::new(),
                shapes: Vec::new(),
                parent: Vec::new(),
            };
            let mut merges = Vec::new();
            for (a, b) in &self.pairs {
                let ia = c.intern(a);
                let ib = c.intern(b);
                merges.push((ia, ib));
            }
            c.run(&merges);
            c.freeze()
        })
    }

    pub fn equal(&self, a: &Term, b: &Term) -> bool {
        if a == b {
            return true;
        }
        if self.pairs.is_empty() {
            return false;
        }
        let f = self.frozen();
        let mut q = Query::default();
        f.class_of(&mut q, a) == f.class_of(&mut q, b)
    }

    /// A member of the class of `t` of the form `(prefix)(y:U)V`, where the
    /// prefix products carry exactly the given types; returns `(y:U)V`.
    pub fn find_product(&self, t: &Term, prefix: &[Term]) -> Option<Term> {
        if self.pairs.is_empty() {
            return None;
        }
        self.frozen()
            .members(t)
            .filter_map(|u| under_prefix(u, prefix))
            .find(|u| u.is_prod())
            .cloned()
    }

    /// A sort in the class of `t` under the given prefix products.
    pub fn find_sort(&self, t: &Term, prefix: &[Term]) -> Option<Sort> {
        if self.pairs.is_empty() {
            return None;
        }
        self.frozen()
            .members(t)
            .filter_map(|u| under_prefix(u, prefix))
            .find_map(|u| u.as_sort())
    }
}

// ---------------------------------------------------------------------------
// context-level entry points

struct MapSig<'a>(&'a HashMap<Name, Term>);

impl Signature for MapSig<'_> {
    fn type_of(&self, name: &Name) -> Option<Term> {
        self.0.get(name).cloned()
    }
}

/// Type of `t` in `ctx`, in normal η-long form.
pub fn infer_type(
    spec: &PtsSpec,
    ctx: &QContext,
    t: &Term,
    mode: Mode,
    fuel: usize,
) -> Result<Term, TypeError> {
    match mode {
        Mode::WithoutConstraints => {
            let an = ctx.analyze(spec, fuel);
            let ty = Checker::new(spec, &an, fuel).infer(&mut Locals::new(), t)?;
            Ok(normal_eta_long(&an, &ty, fuel)?)
        }
        Mode::WithConstraints => {
            let sig = all_declarations(ctx, fuel)?;
            let eq = Equiv::from_context(ctx, fuel);
            let ty = Checker::new(spec, &MapSig(&sig), fuel)
                .with_equiv(&eq)
                .infer(&mut Locals::new(), t)?;
            Ok(normal_eta_long(&MapSig(&sig), &ty, fuel)?)
        }
    }
}

fn all_declarations(ctx: &QContext, fuel: usize) -> Result<HashMap<Name, Term>, TypeError> {
    let mut sig = HashMap::new();
    for e in ctx.entries() {
        if let Some((n, ty)) = e.declaration() {
            sig.insert(n.clone(), normalize(ty, fuel)?);
        }
    }
    Ok(sig)
}

/// Well-formedness of a context. Without constraints every entry must
/// check against the earlier declarations alone; with constraints the
/// conversion rule may use the earlier constraints.
pub fn check_context(
    spec: &PtsSpec,
    ctx: &QContext,
    mode: Mode,
    fuel: usize,
) -> Result<(), TypeError> {
    let mut sig: HashMap<Name, Term> = HashMap::new();
    let mut eq = Equiv::default();
    for e in ctx.entries() {
        let checker = Checker {
            spec,
            sig: &MapSig(&sig),
            equiv: match mode {
                Mode::WithConstraints => Some(&eq),
                Mode::WithoutConstraints => None,
            },
            fuel,
        };
        match e {
            Entry::Universal { name, ty } | Entry::Existential { name, ty } => {
                if sig.contains_key(name) {
                    return Err(TypeError::Duplicate(name.to_string()));
                }
                checker.infer_sort(&mut Locals::new(), ty)?;
                let nty = normalize(ty, fuel)?;
                sig.insert(name.clone(), nty);
            }
            Entry::Constraint(c) => {
                let mut locals = Locals::new();
                for (_, ty) in &c.locals {
                    checker.infer_sort(&mut locals, ty)?;
                    locals.push(normalize(ty, fuel)?);
                }
                let ta = checker.infer(&mut locals, &c.lhs)?;
                let tb = checker.infer(&mut locals, &c.rhs)?;
                if !checker.convertible(&locals, &ta, &tb) {
                    return Err(TypeError::ConstraintTypeMismatch(
                        ta.to_string(),
                        tb.to_string(),
                    ));
                }
                if mode == Mode::WithConstraints {
                    let (a, b) = c.closed();
                    let (a, b) = (normalize(&a, fuel)?, normalize(&b, fuel)?);
                    if a != b {
                        let mut pairs = eq.pairs.clone();
                        pairs.push((a, b));
                        eq = Equiv::new(pairs);
                    }
                }
            }
        }
    }
    Ok(())
}
