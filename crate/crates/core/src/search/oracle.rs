//! Replay of derivations and the derivation read off a known solution.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::context::{
    classify_context, eligible, normalize_context, normalize_context_from, select_existential,
    Analysis, QContext, Status,
};
use crate::engine::{in_sigma, rebuild, ElemSub, HeadRef, NameGen, Site, Substitution};
use crate::kernel::{normal_eta_long, normalize, size_of, Head, Locals, Name, Node, Term};
use crate::pts::{meta_system, Checker, PtsSpec};

use super::{image_of, simplify, universal_signature, Derivation, Fail};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("step {0} is not applicable")]
    NotApplicable(usize),
    #[error("derivation does not end in a success context")]
    NotSuccess,
    #[error("not a normal solution: {0}")]
    NotNormalSolution(String),
    #[error("ill-formed context: {0}")]
    IllFormed(String),
}

fn start(
    ctx: &QContext,
    meta: &PtsSpec,
    fuel: usize,
    simpl: bool,
) -> Result<(QContext, Analysis), OracleError> {
    let (c, an) =
        normalize_context(ctx, meta, fuel).map_err(|e| OracleError::IllFormed(e.to_string()))?;
    if simpl {
        simplify(c, an, meta, fuel).map_err(|Fail| OracleError::NotSuccess)
    } else {
        Ok((c, an))
    }
}

/// Applies the steps of `d` in sequence and returns the final context,
/// which must be a success context. Steps must be generated from the axioms
/// and rules of `spec`.
pub fn replay(
    spec: &PtsSpec,
    ctx: &QContext,
    d: &Derivation,
    fuel: usize,
) -> Result<QContext, OracleError> {
    let meta = meta_system();
    let (mut c, mut an) = start(ctx, &meta, fuel, d.simplified)?;
    for (i, e) in d.steps.iter().enumerate() {
        let index = c.position(&e.target).ok_or(OracleError::NotApplicable(i))?;
        let sel = eligible(&c, &an, index).ok_or(OracleError::NotApplicable(i))?;
        if e.fresh.iter().any(|n| c.position(n).is_some()) {
            return Err(OracleError::NotApplicable(i));
        }
        let site = Site {
            ctx: &c,
            an: &an,
            sel: &sel,
            spec: &meta,
            rules: spec,
            fuel,
        };
        if !in_sigma(&site, &e.kind) {
            return Err(OracleError::NotApplicable(i));
        }
        let built = rebuild(&site, &e.kind, &e.fresh).ok_or(OracleError::NotApplicable(i))?;
        if built.payload != e.payload {
            return Err(OracleError::NotApplicable(i));
        }
        let next = e.payload.apply_to_context(&c);
        let (nc, nan) = normalize_context_from(&next, &meta, fuel, &an, index)
            .map_err(|_| OracleError::NotApplicable(i))?;
        let (nc, nan) = if d.simplified {
            simplify(nc, nan, &meta, fuel).map_err(|Fail| OracleError::NotApplicable(i))?
        } else {
            (nc, nan)
        };
        c = nc;
        an = nan;
    }
    match classify_context(&c, &an) {
        Status::Success => Ok(c),
        _ => Err(OracleError::NotSuccess),
    }
}

/// The normal form of the substitution denoted by `d`, restricted to the
/// existential variables of `ctx`.
pub fn denoted_substitution(
    spec: &PtsSpec,
    ctx: &QContext,
    d: &Derivation,
    fuel: usize,
) -> Result<Substitution, OracleError> {
    replay(spec, ctx, d, fuel)?;
    let sig = universal_signature(ctx, fuel);
    let path: Vec<Arc<ElemSub>> = d.steps.iter().cloned().map(Arc::new).collect();
    let mut out = Substitution::new();
    for (x, _) in ctx.existentials() {
        out.bind(x.clone(), QContext::new(), image_of(&path, &x, &sig, fuel));
    }
    Ok(out)
}

/// Size measure of a substitution: the sum of the sizes of its images.
pub fn solution_size(
    sig: &HashMap<Name, Term>,
    theta: &BTreeMap<Name, Term>,
    fuel: usize,
) -> Option<u64> {
    theta.values().map(|t| size_of(sig, t, fuel).ok()).sum()
}

/// Sizes of the residual substitutions seen by [`derive_from_solution`],
/// starting with the size of the input.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleTrace {
    pub sizes: Vec<u64>,
}

fn strip_lambdas(t: &Term, n: usize) -> Option<(Vec<(Name, Term)>, Term)> {
    let mut binders = Vec::new();
    let mut cur = t.clone();
    for _ in 0..n {
        let Node::Lam(x, ty, body) = cur.node() else {
            return None;
        };
        binders.push((x.clone(), ty.clone()));
        let b = body.clone();
        cur = b;
    }
    Some((binders, cur))
}

fn wrap_lams(binders: &[(Name, Term)], body: Term) -> Term {
    binders
        .iter()
        .rev()
        .fold(body, |acc, (n, ty)| Term::lam(n.clone(), ty.clone(), acc))
}

/// The derivation built by the completeness recursion: at each step the
/// shape of the image of an eligible variable fixes the elementary
/// substitution, and the residual solution assigns the pieces of the image
/// to the fresh variables.
pub fn derive_from_solution(
    spec: &PtsSpec,
    ctx: &QContext,
    theta: &Substitution,
    fuel: usize,
) -> Result<(Derivation, OracleTrace), OracleError> {
    let bad = |m: String| OracleError::NotNormalSolution(m);
    let meta = &meta_system();
    let sig = universal_signature(ctx, fuel);
    let exis = ctx.existentials();
    if theta.len() != exis.len() || exis.iter().any(|(x, _)| theta.get(x).is_none()) {
        return Err(bad("must bind exactly the existential variables".into()));
    }
    let mut images: BTreeMap<Name, Term> = BTreeMap::new();
    for (x, b) in &theta.bindings {
        if !b.gamma.is_empty() {
            return Err(bad(format!("{x} has a non-empty context")));
        }
        if b.term.free_names().iter().any(|n| !sig.contains_key(n)) {
            return Err(bad(format!("image of {x} is not ground")));
        }
        match normal_eta_long(&sig, &b.term, fuel) {
            Ok(t) if t == b.term => {}
            _ => return Err(bad(format!("image of {x} is not normal η-long"))),
        }
        images.insert(x.clone(), b.term.clone());
    }
    let mut names = NameGen::new(ctx.names());
    let (mut c, mut an) = start(ctx, meta, fuel, false)?;
    let mut steps = Vec::new();
    let mut trace = OracleTrace::default();
    trace.sizes.push(
        solution_size(&sig, &images, fuel).ok_or_else(|| bad("images are ill-typed".into()))?,
    );
    loop {
        match classify_context(&c, &an) {
            Status::Success => break,
            Status::Failure => return Err(bad("context fails".into())),
            Status::Open => {}
        }
        let sel = select_existential(&c, &an, true).map_err(|e| bad(e.to_string()))?;
        let t = images
            .remove(&sel.name)
            .ok_or_else(|| bad(format!("no image for {}", sel.name)))?;
        let n = sel.binders.len();
        let (lams, u) = strip_lambdas(&t, n)
            .ok_or_else(|| bad(format!("image of {} is too short", sel.name)))?;
        let mut locals = Locals::new();
        for (_, ty) in &lams {
            locals.push(normalize(ty, fuel).map_err(|e| bad(e.to_string()))?);
        }
        let checker = Checker::new(meta, &sig, fuel);
        let sort_in = |locals: &mut Locals, t: &Term| {
            checker
                .infer_sort(locals, t)
                .map_err(|e| bad(format!("{t}: {e}")))
        };
        let site = Site {
            ctx: &c,
            an: &an,
            sel: &sel,
            spec: meta,
            rules: spec,
            fuel,
        };
        let close = |t: Term| -> Result<Term, OracleError> {
            let w = wrap_lams(&lams, t);
            normal_eta_long(&sig, &w, fuel).map_err(|e| bad(e.to_string()))
        };
        let (e, new_images): (ElemSub, Vec<Term>) = match u.node() {
            Node::Sort(s) => (site.sort_sub(*s), vec![]),
            Node::Prod(y, dom, cod) => {
                let s = sort_in(&mut locals, dom)?;
                locals.push(normalize(dom, fuel).map_err(|e| bad(e.to_string()))?);
                let s2 = sort_in(&mut locals, cod)?;
                locals.pop();
                let e = site.prod_sub(s, s2, &mut names);
                let h = close(dom.clone())?;
                let k = close(Term::lam(y.clone(), dom.clone(), cod.clone()))?;
                (e, vec![h, k])
            }
            Node::Lam(..) => return Err(bad("abstraction in head position".into())),
            _ => {
                let (head, args) = u.spine();
                let head_ref = match head.head() {
                    Some(Head::Free(g)) => HeadRef::Global(g),
                    Some(Head::Bound(j)) if (j as usize) < n => HeadRef::Local(n - j as usize),
                    _ => return Err(bad(format!("unexpected head in {u}"))),
                };
                let (_, ty) = site
                    .heads(n)
                    .into_iter()
                    .find(|(h, _)| *h == head_ref)
                    .ok_or_else(|| bad(format!("head {head} is not available")))?;
                let q = ty.telescope().0.len();
                if args.len() < q {
                    return Err(bad(format!("{u} is not fully applied")));
                }
                let mut partial = Term::apps(head.clone(), args[..q].iter().map(|a| (*a).clone()));
                let mut ty_cur = checker
                    .infer(&mut locals, &partial)
                    .map_err(|e| bad(e.to_string()))?;
                let mut sorts = Vec::new();
                let mut splits = Vec::new();
                for a in &args[q..] {
                    let Node::Prod(z, dom, cod) = ty_cur.node() else {
                        return Err(bad(format!("{partial} does not have a product type")));
                    };
                    let s = sort_in(&mut locals, dom)?;
                    locals.push(dom.clone());
                    let s2 = sort_in(&mut locals, cod)?;
                    locals.pop();
                    sorts.push((s, s2));
                    splits.push((z.clone(), dom.clone(), cod.clone()));
                    let next =
                        normalize(&cod.instantiate(a), fuel).map_err(|e| bad(e.to_string()))?;
                    ty_cur = next;
                    partial = Term::app(partial, (*a).clone());
                }
                let e = site
                    .head_sub(&head_ref, &ty, n, &sorts, &mut names)
                    .ok_or_else(|| bad("head substitution".into()))?;
                let mut imgs = Vec::new();
                for a in &args[..q] {
                    imgs.push(close((*a).clone())?);
                }
                for ((z, dom, cod), a) in splits.into_iter().zip(&args[q..]) {
                    imgs.push(close(dom.clone())?);
                    imgs.push(close(Term::lam(z, dom, cod))?);
                    imgs.push(close((*a).clone())?);
                }
                (e, imgs)
            }
        };
        if e.fresh.len() != new_images.len() {
            return Err(bad("fresh variable count mismatch".into()));
        }
        for (n, t) in e.fresh.iter().zip(new_images) {
            images.insert(n.clone(), t);
        }
        trace.sizes.push(
            solution_size(&sig, &images, fuel)
                .ok_or_else(|| bad("residual is ill-typed".into()))?,
        );
        let next = e.payload.apply_to_context(&c);
        let (nc, nan) = normalize_context_from(&next, meta, fuel, &an, sel.index)
            .map_err(|err| bad(err.to_string()))?;
        c = nc;
        an = nan;
        steps.push(e);
    }
    Ok((
        Derivation {
            steps,
            simplified: false,
        },
        trace,
    ))
}
