//! Search trees, strong and weak proof synthesis.

mod oracle;
mod simplify;
mod unify;

pub use oracle::{denoted_substitution, derive_from_solution, replay, OracleError, OracleTrace};
pub use simplify::{simplify, Fail};
pub use unify::{ground_unify, Unifier};

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::context::{
    classify_context, eligible, normalize_context, normalize_context_from, select_existential,
    Analysis, Entry, QContext, Rigidity, Selected, Status,
};
use crate::engine::{
    check_well_typed, enumerate_elementary, enumerate_weak, ElemSub, Filter, HeadRef, NameGen,
    Site, SubKind, Substitution,
};
use crate::kernel::{eta_long, normalize, Head, Locals, Name, Node, Term, DEFAULT_FUEL};
use crate::pts::{meta_system, Checker, PtsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_nodes: usize,
    pub max_depth: usize,
    pub max_splitting: usize,
    pub fuel: usize,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget {
            max_nodes: 100_000,
            max_depth: 50,
            max_splitting: 2,
            fuel: DEFAULT_FUEL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heuristics {
    /// Solve flexible-rigid constraints first, restricting the heads.
    pub flex_rigid: bool,
    /// No splitting when the result atom is rigid.
    pub avoid_splitting: bool,
    /// Instantiate the rightmost eligible variable.
    pub rightmost: bool,
}

impl Heuristics {
    pub fn all() -> Heuristics {
        Heuristics {
            flex_rigid: true,
            avoid_splitting: true,
            rightmost: true,
        }
    }

    pub fn none() -> Heuristics {
        Heuristics {
            flex_rigid: false,
            avoid_splitting: false,
            rightmost: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    pub mode: Mode,
    pub budget: Budget,
    pub heuristics: Heuristics,
    pub simplify: bool,
    /// Check every elementary substitution for well-typedness in Meta.
    pub verify_steps: bool,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            mode: Mode::Strong,
            budget: Budget::default(),
            heuristics: Heuristics::all(),
            simplify: true,
            verify_steps: false,
        }
    }
}

impl Options {
    pub fn weak() -> Options {
        Options {
            mode: Mode::Weak,
            ..Options::default()
        }
    }
}

/// A list of elementary substitutions leading to a success context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub steps: Vec<ElemSub>,
    /// Whether contexts were simplified after each step.
    pub simplified: bool,
}

impl Derivation {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let steps: Vec<Value> = self
            .steps
            .iter()
            .map(|e| {
                let (kind, splitting, abstractions, sorts) = match &e.kind {
                    SubKind::Head {
                        splitting,
                        abstractions,
                        sorts,
                        ..
                    } => ("head", *splitting, Some(*abstractions), sorts.clone()),
                    SubKind::Sort(_) => ("sort", 0, None, vec![]),
                    SubKind::Prod(a, b) => ("prod", 0, None, vec![(*a, *b)]),
                };
                json!({
                    "target": e.target.to_string(),
                    "kind": kind,
                    "head": e.head_name,
                    "splitting": splitting,
                    "abstractions": abstractions,
                    "sorts": sorts.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect::<Vec<_>>(),
                    "fresh": e.fresh.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                    "term": e.binding().term.to_string(),
                })
            })
            .collect();
        json!({ "simplified": self.simplified, "steps": steps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("synthesized proof {proof} failed the final check: {reason}")]
    InternalSoundnessFailure { proof: String, reason: String },
    #[error("ill-formed problem: {0}")]
    IllFormed(String),
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub ctx: QContext,
    an: Analysis,
    pub path: Vec<Arc<ElemSub>>,
    pub depth: usize,
    pub delay: usize,
}

impl SearchNode {
    pub fn analysis(&self) -> &Analysis {
        &self.an
    }

    pub fn derivation(&self, simplified: bool) -> Derivation {
        Derivation {
            steps: self.path.iter().map(|e| (**e).clone()).collect(),
            simplified,
        }
    }

    pub fn status(&self) -> Status {
        classify_context(&self.ctx, &self.an)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    Open,
    Fail,
    Success,
}

impl fmt::Display for StepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepResult::Open => "open",
            StepResult::Fail => "fail",
            StepResult::Success => "success",
        })
    }
}

/// One trace event per generated child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub depth: usize,
    pub var: Name,
    pub head: String,
    pub splitting: usize,
    pub result: StepResult,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth={} var={} head={} r={} result={}",
            self.depth, self.var, self.head, self.splitting, self.result
        )
    }
}

pub type TraceSink<'a> = Box<dyn FnMut(&TraceLine) + 'a>;

/// Expands search nodes over the Meta system.
pub struct Expander<'a> {
    pub meta: PtsSpec,
    /// The user's system, whose axioms and rules are enumerated.
    pub user: PtsSpec,
    pub opts: Options,
    pub names: NameGen,
    pub trace: Option<TraceSink<'a>>,
    /// Set when some head had more splitting available than allowed.
    pub r_truncated: bool,
}

pub enum Child {
    Open(SearchNode),
    Success(SearchNode),
}

impl<'a> Expander<'a> {
    pub fn new(user: &PtsSpec, opts: Options, reserved: &QContext) -> Expander<'a> {
        Expander {
            meta: meta_system(),
            user: user.clone(),
            opts,
            names: NameGen::new(reserved.names()),
            trace: None,
            r_truncated: false,
        }
    }

    fn fuel(&self) -> usize {
        self.opts.budget.fuel
    }

    /// The normalized and simplified root node, `None` if it fails.
    pub fn root(&self, ctx: &QContext) -> Result<Option<SearchNode>, SearchError> {
        let (ctx, an) = normalize_context(ctx, &self.meta, self.fuel())
            .map_err(|e| SearchError::IllFormed(e.to_string()))?;
        let (ctx, an) = if self.opts.simplify {
            match simplify(ctx, an, &self.meta, self.fuel()) {
                Ok(x) => x,
                Err(Fail) => return Ok(None),
            }
        } else {
            (ctx, an)
        };
        let node = SearchNode {
            ctx,
            an,
            path: Vec::new(),
            depth: 0,
            delay: 0,
        };
        if node.status() == Status::Failure {
            return Ok(None);
        }
        Ok(Some(node))
    }

    /// The variable to instantiate and the filter restricting its heads.
    pub fn select(&self, node: &SearchNode) -> Option<(Selected, Filter)> {
        let h = self.opts.heuristics;
        let mut filter = Filter::all();
        filter.avoid_rigid_splitting = h.avoid_splitting;
        if h.flex_rigid {
            if let Some(x) = flex_rigid(&node.ctx, &node.an) {
                return Some(x.with_base(filter));
            }
        }
        select_existential(&node.ctx, &node.an, h.rightmost)
            .ok()
            .map(|s| (s, filter))
    }

    /// Children of an open node.
    pub fn expand(&mut self, node: &SearchNode, r_max: usize) -> Vec<Child> {
        let Some((sel, filter)) = self.select(node) else {
            return Vec::new();
        };
        let fuel = self.fuel();
        let subs = {
            let site = Site {
                ctx: &node.ctx,
                an: &node.an,
                sel: &sel,
                spec: &self.meta,
                rules: &self.user,
                fuel,
            };
            match self.opts.mode {
                Mode::Strong => {
                    if !self.r_truncated && splitting_truncated(&site, r_max, &filter) {
                        self.r_truncated = true;
                    }
                    enumerate_elementary(&site, r_max, &filter, &mut self.names)
                }
                Mode::Weak => enumerate_weak(&site, &filter, &mut self.names),
            }
        };
        let mut out = Vec::new();
        for e in subs {
            let res = self.child(node, &sel, e);
            if let Some(trace) = self.trace.as_mut() {
                let (line_e, result) = match &res {
                    Ok(Child::Open(n)) | Ok(Child::Success(n)) => (
                        n.path.last().unwrap().clone(),
                        if matches!(res, Ok(Child::Open(_))) {
                            StepResult::Open
                        } else {
                            StepResult::Success
                        },
                    ),
                    Err(e) => (e.clone(), StepResult::Fail),
                };
                trace(&TraceLine {
                    depth: node.depth + 1,
                    var: line_e.target.clone(),
                    head: line_e.head_name.clone(),
                    splitting: line_e.splitting(),
                    result,
                });
            }
            if let Ok(c) = res {
                out.push(c);
            }
        }
        out
    }

    fn child(&self, node: &SearchNode, sel: &Selected, e: ElemSub) -> Result<Child, Arc<ElemSub>> {
        let e = Arc::new(e);
        let fuel = self.fuel();
        if self.opts.verify_steps {
            if let Err(err) = check_well_typed(&self.meta, &node.ctx, &e.payload, fuel) {
                panic!("generated substitution {e} is ill-typed: {err}");
            }
        }
        let ctx = e.payload.apply_to_context(&node.ctx);
        let Ok((ctx, an)) = normalize_context_from(&ctx, &self.meta, fuel, &node.an, sel.index)
        else {
            return Err(e);
        };
        let (ctx, an) = if self.opts.simplify {
            match simplify(ctx, an, &self.meta, fuel) {
                Ok(x) => x,
                Err(Fail) => return Err(e),
            }
        } else {
            (ctx, an)
        };
        let mut path = node.path.clone();
        path.push(e.clone());
        let n = SearchNode {
            ctx,
            an,
            path,
            depth: node.depth + 1,
            delay: e.splitting(),
        };
        match n.status() {
            Status::Failure => Err(e),
            Status::Success => Ok(Child::Success(n)),
            Status::Open => Ok(Child::Open(n)),
        }
    }
}

struct FlexRigid {
    sel: Selected,
    heads: Vec<HeadRef>,
    sorts: bool,
    prods: bool,
}

impl FlexRigid {
    fn with_base(self, mut f: Filter) -> (Selected, Filter) {
        f.heads = Some(self.heads);
        f.sorts = self.sorts;
        f.prods = self.prods;
        (self.sel, f)
    }
}

/// A flexible-rigid constraint well-typed without the constraints whose
/// flexible head can be instantiated, scanning from the right.
fn flex_rigid(ctx: &QContext, an: &Analysis) -> Option<FlexRigid> {
    for (i, e) in ctx.entries().iter().enumerate().rev() {
        let Entry::Constraint(c) = e else { continue };
        if !an.ok[i] {
            continue;
        }
        for (flex, rig) in [(&c.lhs, &c.rhs), (&c.rhs, &c.lhs)] {
            if an.head_rigidity(flex) != Rigidity::Flexible
                || an.head_rigidity(rig) != Rigidity::Rigid
            {
                continue;
            }
            let Some(Head::Free(x)) = flex.head() else {
                continue;
            };
            let Some(index) = ctx.position(&x) else {
                continue;
            };
            let Some(sel) = eligible(ctx, an, index) else {
                continue;
            };
            let mut heads: Vec<HeadRef> = (1..=sel.binders.len()).map(HeadRef::Local).collect();
            let (mut sorts, mut prods) = (false, false);
            match rig.node() {
                Node::Prod(..) => prods = true,
                Node::Lam(..) => {}
                _ => match rig.head() {
                    Some(Head::Free(g)) => heads.insert(0, HeadRef::Global(g)),
                    Some(Head::Sort(_)) => sorts = true,
                    _ => {}
                },
            }
            return Some(FlexRigid {
                sel,
                heads,
                sorts,
                prods,
            });
        }
    }
    None
}

/// Whether some allowed head admits more splitting than `r_max`.
fn splitting_truncated(site: &Site, r_max: usize, filter: &Filter) -> bool {
    let m = site.sel.binders.len();
    site.heads(m).iter().any(|(h, ty)| {
        if let Some(hs) = &filter.heads {
            if !hs.contains(h) {
                return false;
            }
        }
        if filter.avoid_rigid_splitting && site.result_is_rigid(ty) {
            return false;
        }
        site.head_sorts(ty, m).is_some_and(|(s, s2)| {
            !crate::engine::sort_sequences(site.rules, s, s2, r_max + 1).is_empty()
        })
    })
}

/// The image of `x` under the composition of the path, in normal η-long form.
pub fn image_of(path: &[Arc<ElemSub>], x: &Name, sig: &HashMap<Name, Term>, fuel: usize) -> Term {
    let mut t = Term::free(x.clone());
    for e in path {
        t = e.payload.apply_to_term(&t);
    }
    let nf = normalize(&t, fuel).unwrap_or(t);
    eta_long(sig, &nf, fuel).unwrap_or(nf)
}

/// Normal types of the universal declarations of a context.
pub fn universal_signature(ctx: &QContext, fuel: usize) -> HashMap<Name, Term> {
    ctx.universals()
        .into_iter()
        .map(|(n, t)| {
            let nt = normalize(&t, fuel).unwrap_or(t);
            (n, nt)
        })
        .collect()
}

/// A solution found by the search: the images of the target variables.
#[derive(Debug, Clone)]
pub struct Found {
    pub images: Vec<(Name, Term)>,
    pub derivation: Derivation,
    /// Nodes expanded when the solution was found.
    pub nodes: usize,
}

impl Found {
    /// The image of the first target; the proof for a synthesis problem.
    pub fn proof(&self) -> &Term {
        &self.images[0].1
    }

    pub fn substitution(&self) -> Substitution {
        let mut s = Substitution::new();
        for (n, t) in &self.images {
            s.bind(n.clone(), QContext::new(), t.clone());
        }
        s
    }
}

enum Frontier {
    Strong {
        queue: VecDeque<SearchNode>,
        r_max: usize,
    },
    Weak {
        stack: Vec<SearchNode>,
        limit: usize,
        cutoff: bool,
    },
}

/// Stream of solutions. Iteration stops when the search space is exhausted
/// or the budget runs out (see [`Search::budget_exhausted`]).
pub struct Search<'a> {
    user: PtsSpec,
    targets: Vec<(Name, Term)>,
    equation: Option<(Term, Term)>,
    sig: HashMap<Name, Term>,
    exp: Expander<'a>,
    root: Option<SearchNode>,
    frontier: Frontier,
    pending: VecDeque<Result<Found, SearchError>>,
    seen: HashSet<Vec<Term>>,
    nodes: usize,
    exhausted: bool,
    done: bool,
}

fn fresh_goal_name(ctx: &QContext) -> Name {
    let taken: HashSet<&str> = ctx.names().map(|n| &**n).collect();
    if !taken.contains("x") {
        return Name::from("x");
    }
    (0..)
        .map(|i| format!("x{i}"))
        .find(|n| !taken.contains(n.as_str()))
        .map(Name::from)
        .unwrap()
}

/// Proof search for `goal` in a context of universal declarations.
pub fn synthesize<'a>(
    spec: &PtsSpec,
    ctx: &QContext,
    goal: &Term,
    opts: Options,
) -> Result<Search<'a>, SearchError> {
    let fuel = opts.budget.fuel;
    if ctx
        .entries()
        .iter()
        .any(|e| !matches!(e, Entry::Universal { .. }))
    {
        return Err(SearchError::IllFormed(
            "context must contain only universal declarations".into(),
        ));
    }
    crate::pts::check_context(spec, ctx, crate::pts::Mode::WithoutConstraints, fuel)
        .map_err(|e| SearchError::IllFormed(e.to_string()))?;
    let sig = universal_signature(ctx, fuel);
    Checker::new(spec, &sig, fuel)
        .infer_sort(&mut Locals::new(), goal)
        .map_err(|e| SearchError::IllFormed(format!("goal: {e}")))?;
    let x = fresh_goal_name(ctx);
    let mut root_ctx = ctx.clone();
    root_ctx.push(Entry::existential(x.clone(), goal.clone()));
    Search::new(spec, &root_ctx, vec![(x, goal.clone())], None, opts)
}

impl<'a> Search<'a> {
    /// Search over an arbitrary root context; `targets` are the existentials
    /// whose images are reported.
    pub fn new(
        spec: &PtsSpec,
        root_ctx: &QContext,
        targets: Vec<(Name, Term)>,
        equation: Option<(Term, Term)>,
        opts: Options,
    ) -> Result<Search<'a>, SearchError> {
        let fuel = opts.budget.fuel;
        let sig = universal_signature(root_ctx, fuel);
        let exp = Expander::new(spec, opts, root_ctx);
        let root = exp.root(root_ctx)?;
        let frontier = match opts.mode {
            Mode::Strong => Frontier::Strong {
                queue: root.iter().cloned().collect(),
                r_max: opts.budget.max_splitting,
            },
            Mode::Weak => Frontier::Weak {
                stack: root.iter().cloned().collect(),
                limit: 1,
                cutoff: false,
            },
        };
        let mut s = Search {
            done: root.is_none(),
            user: spec.clone(),
            targets,
            equation,
            sig,
            exp,
            root: root.clone(),
            frontier,
            pending: VecDeque::new(),
            seen: HashSet::new(),
            nodes: 0,
            exhausted: false,
        };
        if let Some(r) = root {
            if r.status() == Status::Success {
                s.on_success(&r);
                s.done = true;
            }
        }
        Ok(s)
    }

    pub fn with_trace(mut self, sink: TraceSink<'a>) -> Search<'a> {
        self.exp.trace = Some(sink);
        self
    }

    /// Number of expanded nodes so far.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// True when the stream ended because of the node or depth budget.
    pub fn budget_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn targets(&self) -> &[(Name, Term)] {
        &self.targets
    }

    fn recheck(&self, images: &[(Name, Term)]) -> Result<(), String> {
        let fuel = self.exp.opts.budget.fuel;
        let ch = Checker::new(&self.user, &self.sig, fuel);
        let mut sub = Substitution::new();
        for ((_, ty), (n, t)) in self.targets.iter().zip(images) {
            let ty = normalize(&sub.apply_to_term(ty), fuel).map_err(|e| e.to_string())?;
            ch.check(&mut Locals::new(), t, &ty)
                .map_err(|e| format!("{n}: {e}"))?;
            sub.bind(n.clone(), QContext::new(), t.clone());
        }
        if let Some((a, b)) = &self.equation {
            let a = normalize(&sub.apply_to_term(a), fuel).map_err(|e| e.to_string())?;
            let b = normalize(&sub.apply_to_term(b), fuel).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("sides differ: {a} and {b}"));
            }
        }
        Ok(())
    }

    fn on_success(&mut self, node: &SearchNode) {
        let fuel = self.exp.opts.budget.fuel;
        let images: Vec<(Name, Term)> = self
            .targets
            .iter()
            .map(|(n, _)| (n.clone(), image_of(&node.path, n, &self.sig, fuel)))
            .collect();
        let key: Vec<Term> = images.iter().map(|(_, t)| t.clone()).collect();
        if !self.seen.insert(key) {
            return;
        }
        let item = match self.recheck(&images) {
            Ok(()) => Ok(Found {
                images,
                derivation: node.derivation(self.exp.opts.simplify),
                nodes: self.nodes,
            }),
            Err(reason) => Err(SearchError::InternalSoundnessFailure {
                proof: images
                    .iter()
                    .map(|(n, t)| format!("{n} <- {t}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                reason,
            }),
        };
        self.pending.push_back(item);
    }

    fn take(&mut self, node: &SearchNode, r_max: usize) -> Vec<SearchNode> {
        self.nodes += 1;
        let mut open = Vec::new();
        for c in self.exp.expand(node, r_max) {
            match c {
                Child::Success(n) => self.on_success(&n),
                Child::Open(n) => open.push(n),
            }
        }
        open
    }

    fn step(&mut self) {
        let budget = self.exp.opts.budget;
        match &mut self.frontier {
            Frontier::Strong { queue, r_max } => {
                let Some(mut node) = queue.pop_front() else {
                    if self.exp.r_truncated && self.nodes < budget.max_nodes {
                        *r_max += 1;
                        self.exp.r_truncated = false;
                        queue.extend(self.root.iter().cloned());
                    } else {
                        self.done = true;
                    }
                    return;
                };
                if node.delay > 0 {
                    node.delay -= 1;
                    queue.push_back(node);
                    return;
                }
                if node.depth >= budget.max_depth {
                    self.exhausted = true;
                    return;
                }
                if self.nodes >= budget.max_nodes {
                    self.exhausted = true;
                    self.done = true;
                    return;
                }
                let r = *r_max;
                let children = self.take(&node, r);
                if let Frontier::Strong { queue, .. } = &mut self.frontier {
                    queue.extend(children);
                }
            }
            Frontier::Weak {
                stack,
                limit,
                cutoff,
            } => {
                let Some(node) = stack.pop() else {
                    if *cutoff && *limit < budget.max_depth && self.nodes < budget.max_nodes {
                        *limit += 1;
                        *cutoff = false;
                        stack.extend(self.root.iter().cloned());
                    } else {
                        self.exhausted |= *cutoff;
                        self.done = true;
                    }
                    return;
                };
                if node.depth >= *limit {
                    *cutoff = true;
                    return;
                }
                if self.nodes >= budget.max_nodes {
                    self.exhausted = true;
                    self.done = true;
                    return;
                }
                let children = self.take(&node, 0);
                if let Frontier::Weak { stack, .. } = &mut self.frontier {
                    stack.extend(children.into_iter().rev());
                }
            }
        }
    }
}

impl Iterator for Search<'_> {
    type Item = Result<Found, SearchError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(x) = self.pending.pop_front() {
                return Some(x);
            }
            if self.done {
                return None;
            }
            self.step();
        }
    }
}
