use std::collections::VecDeque;

use crate::context::{Analysis, Constraint, Entry, QContext, Rigidity};
use crate::kernel::{Locals, Node, Term};
use crate::pts::{Checker, PtsSpec};

/// The context has a rigid-rigid constraint that can never be solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fail;

fn rigid(an: &Analysis, t: &Term) -> bool {
    an.head_rigidity(t) == Rigidity::Rigid
}

fn decompose(
    c: &Constraint,
    an: &Analysis,
    spec: &PtsSpec,
    fuel: usize,
) -> Result<Vec<Constraint>, Fail> {
    match (c.lhs.node(), c.rhs.node()) {
        (Node::Lam(n, t, a), Node::Lam(_, _, b)) => {
            let mut locals = c.locals.clone();
            locals.push((n.clone(), t.clone()));
            Ok(vec![Constraint::new(locals, a.clone(), b.clone())])
        }
        (Node::Prod(n, t, a), Node::Prod(_, u, b)) => {
            let ch = Checker::new(spec, an, fuel);
            let mut ls = Locals::new();
            for (_, ty) in &c.locals {
                let nty = crate::kernel::normalize(ty, fuel).map_err(|_| Fail)?;
                ls.push(nty);
            }
            match (ch.infer(&mut ls, t), ch.infer(&mut ls, u)) {
                (Ok(x), Ok(y)) if x != y => return Err(Fail),
                _ => {}
            }
            let mut locals = c.locals.clone();
            locals.push((n.clone(), t.clone()));
            Ok(vec![
                Constraint::new(c.locals.clone(), t.clone(), u.clone()),
                Constraint::new(locals, a.clone(), b.clone()),
            ])
        }
        (Node::Lam(..) | Node::Prod(..), _) | (_, Node::Lam(..) | Node::Prod(..)) => Err(Fail),
        _ => {
            let (ha, xs) = c.lhs.spine();
            let (hb, ys) = c.rhs.spine();
            if ha != hb || xs.len() != ys.len() {
                return Err(Fail);
            }
            Ok(xs
                .into_iter()
                .zip(ys)
                .map(|(x, y)| Constraint::new(c.locals.clone(), x.clone(), y.clone()))
                .collect())
        }
    }
}

/// Rewrites rigid-rigid constraints that are well-typed without the
/// constraints until none is left; trivial constraints are dropped.
pub fn simplify(
    ctx: QContext,
    mut an: Analysis,
    spec: &PtsSpec,
    fuel: usize,
) -> Result<(QContext, Analysis), Fail> {
    let entries = ctx.into_entries();
    let mut out = Vec::with_capacity(entries.len());
    let mut ok = Vec::with_capacity(entries.len());
    let mut changed = false;
    for (i, e) in entries.into_iter().enumerate() {
        let c = match e {
            Entry::Constraint(c) => c,
            other => {
                out.push(other);
                ok.push(an.ok[i]);
                continue;
            }
        };
        if !an.ok[i] || !rigid(&an, &c.lhs) || !rigid(&an, &c.rhs) {
            out.push(Entry::Constraint(c));
            ok.push(an.ok[i]);
            continue;
        }
        changed = true;
        let mut work: VecDeque<Constraint> = VecDeque::new();
        work.push_back(c);
        let mut first = true;
        while let Some(c) = work.pop_front() {
            if c.is_trivial() {
                first = false;
                continue;
            }
            let e = Entry::Constraint(c);
            let c_ok = first || an.check_entry(&e, out.len(), spec, fuel);
            first = false;
            let Entry::Constraint(c) = e else {
                unreachable!()
            };
            if c_ok && rigid(&an, &c.lhs) && rigid(&an, &c.rhs) {
                for part in decompose(&c, &an, spec, fuel)?.into_iter().rev() {
                    work.push_front(part);
                }
            } else {
                out.push(Entry::Constraint(c));
                ok.push(c_ok);
            }
        }
    }
    let ctx = QContext::from_entries(out);
    an.ok = ok;
    if changed {
        an.reindex(&ctx);
    }
    Ok((ctx, an))
}
