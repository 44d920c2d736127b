#![allow(dead_code)]

use std::collections::HashMap;

use cube_synth::context::{Entry, QContext};
use cube_synth::kernel::{normal_eta_long, parse_term, Locals, Name, Term, DEFAULT_FUEL};
use cube_synth::problem::{Problem, Task};
use cube_synth::pts::{check_context, cube_system, Checker, Mode};
use cube_synth::search::universal_signature;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn term(s: &str) -> Term {
    parse_term(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Simple types over atoms; atoms are printed verbatim (`A`, `(R a)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Atom(String),
    Arrow(Box<Ty>, Box<Ty>),
}

impl Ty {
    pub fn arrow(a: Ty, b: Ty) -> Ty {
        Ty::Arrow(Box::new(a), Box::new(b))
    }

    pub fn render(&self) -> String {
        match self {
            Ty::Atom(a) => a.clone(),
            Ty::Arrow(a, b) => format!("({} -> {})", a.render(), b.render()),
        }
    }

    /// Argument types and the final atom.
    pub fn split(&self) -> (Vec<&Ty>, &str) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Ty::Arrow(a, b) = cur {
            args.push(&**a);
            cur = b;
        }
        match cur {
            Ty::Atom(s) => (args, s),
            Ty::Arrow(..) => unreachable!(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Ty::Atom(_) => 1,
            Ty::Arrow(a, b) => a.size() + b.size() + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Atoms A, B, C and first-order constants.
    Propositional,
    /// A domain T with individuals and unary predicates.
    Dependent,
    /// Constants quantifying over propositions.
    Polymorphic,
}

impl Family {
    pub fn systems(self) -> &'static [&'static str] {
        match self {
            Family::Propositional => &[
                "stlc",
                "lf",
                "f",
                "f2p",
                "omega_weak",
                "omega_weak_p",
                "fomega",
                "cc",
            ],
            Family::Dependent => &["lf", "f2p", "omega_weak_p", "cc"],
            Family::Polymorphic => &["f", "f2p", "fomega", "cc"],
        }
    }
}

#[derive(Debug, Clone)]
enum Const {
    Simple(String, Ty),
    /// `name : (x:T)(P1 x) -> .. -> (Q x)`
    Dep(String, Vec<String>, String),
    /// `name : (P:Prop)(P -> atom)`
    Poly(String, String),
}

impl Const {
    fn name(&self) -> &str {
        match self {
            Const::Simple(n, _) | Const::Dep(n, _, _) | Const::Poly(n, _) => n,
        }
    }

    fn render_type(&self) -> String {
        match self {
            Const::Simple(_, t) => t.render(),
            Const::Dep(_, ins, out) => {
                let mut s = "(z:T)".to_string();
                for p in ins {
                    s.push_str(&format!("({p} z) -> "));
                }
                s.push_str(&format!("({out} z)"));
                s
            }
            Const::Poly(_, a) => format!("(P:Prop)(P -> {a})"),
        }
    }
}

/// A generated problem with a known normal η-long proof.
#[derive(Debug, Clone)]
pub struct Planted {
    pub system: &'static str,
    pub family: Family,
    pub ctx: QContext,
    pub goal: Term,
    pub proof: Term,
}

impl Planted {
    pub fn problem(&self) -> Problem {
        Problem {
            system: self.system.to_string(),
            declarations: self.ctx.universals(),
            task: Task::Goal(self.goal.clone()),
        }
    }
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    family: Family,
    atoms: Vec<String>,
    preds: Vec<String>,
    individuals: Vec<String>,
    consts: Vec<Const>,
    locals: Vec<(String, Ty)>,
    next_local: usize,
}

impl Gen<'_> {
    fn atom(&mut self) -> String {
        match self.family {
            Family::Dependent => {
                let p = self.preds.choose(self.rng).unwrap().clone();
                let i = self.individuals.choose(self.rng).unwrap().clone();
                format!("({p} {i})")
            }
            _ => self.atoms.choose(self.rng).unwrap().clone(),
        }
    }

    fn small_ty(&mut self, depth: usize) -> Ty {
        if depth == 0 || self.rng.gen_bool(0.7) {
            Ty::Atom(self.atom())
        } else {
            let a = self.small_ty(depth - 1);
            let b = Ty::Atom(self.atom());
            Ty::arrow(a, b)
        }
    }

    fn fresh_const(&mut self, c: impl FnOnce(String) -> Const) -> String {
        let name = format!("c{}", self.consts.len());
        self.consts.push(c(name.clone()));
        name
    }

    /// Normal η-long inhabitant of `ty`, extending the constants as needed.
    fn inhabit(&mut self, ty: &Ty, depth: usize) -> String {
        if let Ty::Arrow(a, b) = ty {
            let y = format!("y{}", self.next_local);
            self.next_local += 1;
            self.locals.push((y.clone(), (**a).clone()));
            let body = self.inhabit(b, depth);
            self.locals.pop();
            return format!("[{y}:{}]{body}", a.render());
        }
        let Ty::Atom(goal) = ty else { unreachable!() };
        // heads already in scope whose result is the goal
        let mut heads: Vec<(String, Ty)> = self
            .locals
            .iter()
            .filter(|(_, t)| t.split().1 == goal)
            .cloned()
            .collect();
        for c in &self.consts {
            if let Const::Simple(n, t) = c {
                if t.split().1 == goal {
                    heads.push((n.clone(), t.clone()));
                }
            }
        }
        if depth == 0 {
            let nullary: Vec<_> = heads
                .iter()
                .filter(|(_, t)| t.split().0.is_empty())
                .collect();
            if let Some((n, _)) = nullary.choose(self.rng) {
                return n.clone();
            }
            let t = ty.clone();
            return self.fresh_const(|n| Const::Simple(n, t));
        }
        let roll = self.rng.gen_range(0..10);
        if roll < 3 && !heads.is_empty() {
            let (n, t) = heads.choose(self.rng).unwrap().clone();
            return self.apply(&n, &t, depth);
        }
        if roll < 5 && self.family == Family::Dependent && goal.starts_with('(') {
            let inner = &goal[1..goal.len() - 1];
            let (p, i) = inner.split_once(' ').unwrap();
            let (p, i) = (p.to_string(), i.to_string());
            let k = self.rng.gen_range(0..=1);
            let ins: Vec<String> = (0..k)
                .map(|_| self.preds.choose(self.rng).unwrap().clone())
                .collect();
            let name = self.fresh_const(|n| Const::Dep(n, ins.clone(), p.clone()));
            let mut s = format!("({name} {i}");
            for q in &ins {
                let arg = self.inhabit(&Ty::Atom(format!("({q} {i})")), depth - 1);
                s.push(' ');
                s.push_str(&arg);
            }
            s.push(')');
            return s;
        }
        if roll < 5 && self.family == Family::Polymorphic {
            let inst = self.small_ty(1);
            let g = goal.clone();
            let name = self.fresh_const(|n| Const::Poly(n, g));
            let arg = self.inhabit(&inst, depth - 1);
            return format!("({name} {} {arg})", inst.render());
        }
        let k = self.rng.gen_range(0..=2);
        let mut t = ty.clone();
        for _ in 0..k {
            let a = self.small_ty(1);
            t = Ty::arrow(a, t);
        }
        let tt = t.clone();
        let name = self.fresh_const(|n| Const::Simple(n, tt));
        self.apply(&name, &t, depth)
    }

    fn apply(&mut self, head: &str, t: &Ty, depth: usize) -> String {
        let (args, _) = t.split();
        if args.is_empty() {
            return head.to_string();
        }
        let args: Vec<Ty> = args.into_iter().cloned().collect();
        let mut s = format!("({head}");
        for a in &args {
            let x = self.inhabit(a, depth - 1);
            s.push(' ');
            s.push_str(&x);
        }
        s.push(')');
        s
    }

    fn context(&self) -> QContext {
        let mut c = QContext::new();
        for a in &self.atoms {
            c.push(Entry::universal(a.as_str(), term("Prop")));
        }
        if self.family == Family::Dependent {
            c.push(Entry::universal("T", term("Prop")));
            for p in &self.preds {
                c.push(Entry::universal(p.as_str(), term("T -> Prop")));
            }
            for i in &self.individuals {
                c.push(Entry::universal(i.as_str(), term("T")));
            }
        }
        for k in &self.consts {
            c.push(Entry::universal(k.name(), term(&k.render_type())));
        }
        c
    }
}

fn new_gen(rng: &mut ChaCha8Rng, family: Family) -> Gen<'_> {
    let (atoms, preds, individuals) = match family {
        Family::Dependent => (
            vec![],
            vec!["R".into(), "S".into(), "U".into()],
            vec!["a".into(), "b".into()],
        ),
        _ => (
            ["A", "B", "C", "D", "E"].map(String::from).to_vec(),
            vec![],
            vec![],
        ),
    };
    Gen {
        rng,
        family,
        atoms,
        preds,
        individuals,
        consts: Vec::new(),
        locals: Vec::new(),
        next_local: 0,
    }
}

fn rng_coin(g: &mut Gen) -> bool {
    g.rng.gen_bool(0.8)
}

fn pick_family(rng: &mut ChaCha8Rng) -> Family {
    *[
        Family::Propositional,
        Family::Dependent,
        Family::Polymorphic,
    ]
    .choose(rng)
    .unwrap()
}

/// A well-formed context with a planted normal η-long proof of at most
/// `max_nodes` kernel nodes.
pub fn planted(rng: &mut ChaCha8Rng, max_nodes: u32) -> Planted {
    loop {
        let family = pick_family(rng);
        let system = *family.systems().choose(rng).unwrap();
        let mut g = new_gen(rng, family);
        let goal_ty = g.small_ty(1);
        let depth = g.rng.gen_range(1..=3);
        let proof_src = g.inhabit(&goal_ty, depth);
        let distractors = g.rng.gen_range(0..=2);
        for _ in 0..distractors {
            let t = g.small_ty(1);
            g.fresh_const(|n| Const::Simple(n, t));
        }
        let ctx = g.context();
        let goal = term(&goal_ty.render());
        let proof = term(&proof_src);
        if proof.node_count() > max_nodes || (proof.node_count() < 3 && rng_coin(&mut g)) {
            continue;
        }
        let spec = cube_system(system).unwrap();
        if check_context(&spec, &ctx, Mode::WithoutConstraints, DEFAULT_FUEL).is_err() {
            continue;
        }
        let sig = universal_signature(&ctx, DEFAULT_FUEL);
        if Checker::new(&spec, &sig, DEFAULT_FUEL)
            .check(&mut Locals::new(), &proof, &goal)
            .is_err()
        {
            continue;
        }
        match normal_eta_long(&sig, &proof, DEFAULT_FUEL) {
            Ok(t) if t == proof => {}
            _ => continue,
        }
        return Planted {
            system,
            family,
            ctx,
            goal,
            proof,
        };
    }
}

/// A problem whose goal may or may not be provable: a planted context with
/// the goal replaced by a random type half of the time.
pub fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let p = planted(rng, 16);
    if rng.gen_bool(0.5) {
        return p.problem();
    }
    let mut g = new_gen(rng, p.family);
    let goal = term(&g.small_ty(2).render());
    Problem {
        system: p.system.to_string(),
        declarations: p.ctx.universals(),
        task: Task::Goal(goal),
    }
}

/// The user system check of a proof against a goal.
pub fn proves(system: &str, ctx: &QContext, proof: &Term, goal: &Term) -> Result<(), String> {
    let spec = cube_system(system).map_err(|e| e.to_string())?;
    let sig = universal_signature(ctx, DEFAULT_FUEL);
    Checker::new(&spec, &sig, DEFAULT_FUEL)
        .check(&mut Locals::new(), proof, goal)
        .map_err(|e| e.to_string())
}

/// βη-equality through normal η-long forms.
pub fn beta_eta_eq(ctx: &QContext, a: &Term, b: &Term) -> bool {
    let sig: HashMap<Name, Term> = universal_signature(ctx, DEFAULT_FUEL);
    match (
        normal_eta_long(&sig, a, DEFAULT_FUEL),
        normal_eta_long(&sig, b, DEFAULT_FUEL),
    ) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Context for raw kernel terms: three atoms and a few constants.
pub fn kernel_context() -> QContext {
    let mut c = QContext::new();
    for (n, t) in [
        ("A", "Prop"),
        ("B", "Prop"),
        ("C", "Prop"),
        ("a", "A"),
        ("b", "B"),
        ("f", "A -> B"),
        ("g", "B -> C"),
        ("k", "(A -> B) -> A"),
        ("m", "A -> A -> C"),
        ("id", "(P:Prop)P -> P"),
    ] {
        c.push(Entry::universal(n, term(t)));
    }
    c
}

const KERNEL_ATOMS: [&str; 3] = ["A", "B", "C"];

fn kernel_ty(rng: &mut ChaCha8Rng, depth: usize) -> Ty {
    let atom = Ty::Atom(KERNEL_ATOMS.choose(rng).unwrap().to_string());
    if depth == 0 || rng.gen_bool(0.6) {
        atom
    } else {
        Ty::arrow(kernel_ty(rng, depth - 1), kernel_ty(rng, depth - 1))
    }
}

struct KernelGen<'r> {
    rng: &'r mut ChaCha8Rng,
    locals: Vec<(String, Ty)>,
    fresh: usize,
}

impl KernelGen<'_> {
    fn constants(ty: &Ty) -> Vec<(&'static str, Vec<Ty>)> {
        let a = || Ty::Atom("A".into());
        let b = || Ty::Atom("B".into());
        let mut out = Vec::new();
        match ty {
            Ty::Atom(x) if x == "A" => {
                out.push(("a", vec![]));
                out.push(("k", vec![Ty::arrow(a(), b())]));
            }
            Ty::Atom(x) if x == "B" => {
                out.push(("b", vec![]));
                out.push(("f", vec![a()]));
            }
            Ty::Atom(x) if x == "C" => {
                out.push(("g", vec![b()]));
                out.push(("m", vec![a(), a()]));
            }
            _ => {}
        }
        if *ty == Ty::arrow(a(), b()) {
            out.push(("f", vec![]));
        }
        out
    }

    /// A possibly non-normal term of type `ty` (closed under the kernel
    /// context) with β-redexes, η-redexes and polymorphic instantiations.
    fn term(&mut self, ty: &Ty, depth: usize) -> String {
        let roll = if depth == 0 {
            9
        } else {
            self.rng.gen_range(0..10)
        };
        if roll < 2 {
            // β-redex
            let s = kernel_ty(self.rng, 1);
            let y = self.local();
            let arg = self.term(&s, depth - 1);
            self.locals.push((y.clone(), s.clone()));
            let body = self.term(ty, depth - 1);
            self.locals.pop();
            return format!("([{y}:{}]{body} {arg})", s.render());
        }
        if roll < 3 {
            // polymorphic identity instantiated at the expected type
            let inner = self.term(ty, depth - 1);
            return format!("(id {} {inner})", ty.render());
        }
        if let Ty::Arrow(a, b) = ty {
            if roll < 4 {
                // η-redex around a function-valued term
                let y = self.local();
                let f = self.term(ty, depth - 1);
                return format!("[{y}:{}]({f} {y})", a.render());
            }
            let y = self.local();
            self.locals.push((y.clone(), (**a).clone()));
            let body = self.term(b, depth.saturating_sub(1));
            self.locals.pop();
            return format!("[{y}:{}]{body}", a.render());
        }
        let mut heads: Vec<(String, Vec<Ty>)> = Self::constants(ty)
            .into_iter()
            .map(|(n, a)| (n.to_string(), a))
            .collect();
        for (n, t) in &self.locals {
            if t == ty {
                heads.push((n.clone(), vec![]));
            }
            if let Ty::Arrow(a, b) = t {
                if **b == *ty {
                    heads.push((n.clone(), vec![(**a).clone()]));
                }
            }
        }
        if depth == 0 {
            if let Some((n, _)) = heads.iter().find(|(_, a)| a.is_empty()) {
                return n.clone();
            }
        }
        let (n, args) = heads.choose(self.rng).unwrap().clone();
        if args.is_empty() {
            return n;
        }
        let mut s = format!("({n}");
        for a in &args {
            let x = self.term(a, depth.saturating_sub(1));
            s.push(' ');
            s.push_str(&x);
        }
        s.push(')');
        s
    }

    fn local(&mut self) -> String {
        self.fresh += 1;
        format!("y{}", self.fresh)
    }
}

/// A well-typed term (in system f over [`kernel_context`]) and its type.
pub fn kernel_term(rng: &mut ChaCha8Rng) -> (Term, Term) {
    let ty = kernel_ty(rng, 2);
    let depth = rng.gen_range(1..=4);
    let mut g = KernelGen {
        rng,
        locals: Vec::new(),
        fresh: 0,
    };
    let src = g.term(&ty, depth);
    (term(&src), term(&ty.render()))
}

/// Terms over the free names x, y1, y2 plus the kernel constants.
pub fn open_term(rng: &mut ChaCha8Rng, depth: usize, bound: usize) -> Term {
    let leaves = ["x", "y1", "y2", "a", "f"];
    let roll = if depth == 0 { 0 } else { rng.gen_range(0..4) };
    match roll {
        0 => {
            if bound > 0 && rng.gen_bool(0.3) {
                Term::var(rng.gen_range(0..bound as u32))
            } else {
                Term::free(leaves[rng.gen_range(0..leaves.len())])
            }
        }
        1 | 2 => Term::app(
            open_term(rng, depth - 1, bound),
            open_term(rng, depth - 1, bound),
        ),
        _ => Term::lam("w", term("A"), open_term(rng, depth - 1, bound + 1)),
    }
}

pub fn closed_image(rng: &mut ChaCha8Rng, depth: usize, bound: usize) -> Term {
    // images never mention x
    loop {
        let t = open_term(rng, depth, bound);
        if !t.mentions("x") {
            return t;
        }
    }
}
