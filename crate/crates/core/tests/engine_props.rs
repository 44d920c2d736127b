mod common;

use common::*;
use cube_synth::context::{
    classify_context, normalize_context, select_existential, Entry, QContext, Rigidity, Status,
};
use cube_synth::engine::{apply_to_context, check_well_typed, compose, Substitution};
use cube_synth::kernel::{Term, DEFAULT_FUEL};
use cube_synth::pts::{check_context, cube_system, meta_system, Mode as CheckMode};
use cube_synth::search::{Child, Expander, Options, SearchNode};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parent/child pairs from the first few generations of a search.
fn edges(p: &Planted, opts: Options, limit: usize) -> Vec<(SearchNode, SearchNode)> {
    let spec = cube_system(p.system).unwrap();
    let mut root_ctx = p.ctx.clone();
    root_ctx.push(Entry::existential("x", p.goal.clone()));
    let mut exp = Expander::new(&spec, opts, &root_ctx);
    let Some(root) = exp.root(&root_ctx).unwrap() else {
        return Vec::new();
    };
    let mut queue = vec![root];
    let mut out = Vec::new();
    while let Some(n) = queue.pop() {
        if out.len() >= limit {
            break;
        }
        for c in exp.expand(&n, 1) {
            let child = match c {
                Child::Open(c) => {
                    queue.insert(0, c.clone());
                    c
                }
                Child::Success(c) => c,
            };
            out.push((n.clone(), child));
        }
    }
    out
}

#[test]
fn elementary_substitutions_are_well_typed_in_meta() {
    let meta = meta_system();
    let mut r = rng(21);
    let mut checked = 0;
    for _ in 0..60 {
        let p = planted(&mut r, 12);
        let opts = Options {
            simplify: false,
            ..Options::default()
        };
        for (parent, child) in edges(&p, opts, 40) {
            let step = child.path.last().unwrap();
            check_well_typed(&meta, &parent.ctx, &step.payload, DEFAULT_FUEL).unwrap_or_else(|e| {
                panic!(
                    "{}\n{:?}\n{}: {e}",
                    parent.ctx,
                    step.kind,
                    step.binding().term
                )
            });
            let image = apply_to_context(&step.payload, &parent.ctx);
            check_context(&meta, &image, CheckMode::WithConstraints, DEFAULT_FUEL).unwrap();
            assert_eq!(step.payload.len(), 1);
            assert!(step.payload.get(&step.target).is_some());
            checked += 1;
        }
    }
    assert!(checked > 500, "{checked}");
}

#[test]
fn fresh_names_are_globally_fresh() {
    let mut r = rng(22);
    for _ in 0..40 {
        let p = planted(&mut r, 12);
        for (parent, child) in edges(&p, Options::default(), 30) {
            let step = child.path.last().unwrap();
            for n in &step.fresh {
                assert!(parent.ctx.position(n).is_none(), "{n} reused");
                assert!(p.ctx.position(n).is_none());
            }
        }
    }
}

#[test]
fn search_nodes_are_normalized_and_select_rigid() {
    let meta = meta_system();
    let mut r = rng(23);
    for _ in 0..40 {
        let p = planted(&mut r, 12);
        for (_, child) in edges(&p, Options::default(), 30) {
            let (again, an) = normalize_context(&child.ctx, &meta, DEFAULT_FUEL).unwrap();
            assert_eq!(again, child.ctx);
            assert_eq!(classify_context(&again, &an), child.status());
            if child.status() == Status::Open {
                if let Ok(sel) = select_existential(&child.ctx, child.analysis(), true) {
                    assert_eq!(child.analysis().head_rigidity(&sel.target), Rigidity::Rigid);
                }
            }
            assert!(child.delay <= child.path.last().unwrap().splitting());
        }
    }
}

#[test]
fn verify_steps_option_accepts_searches() {
    let mut r = rng(24);
    for _ in 0..30 {
        let p = planted(&mut r, 12);
        let spec = cube_system(p.system).unwrap();
        let opts = Options {
            verify_steps: true,
            ..Options::default()
        };
        let mut s = cube_synth::search::synthesize(&spec, &p.ctx, &p.goal, opts).unwrap();
        assert!(s.next().unwrap().is_ok());
    }
}

fn leaf(r: &mut ChaCha8Rng) -> Term {
    let names = ["a", "b", "y1", "y2", "y3"];
    Term::free(names[r.gen_range(0..names.len())])
}

fn small(r: &mut ChaCha8Rng, depth: usize) -> Term {
    if depth == 0 || r.gen_bool(0.4) {
        leaf(r)
    } else if r.gen_bool(0.7) {
        Term::app(small(r, depth - 1), small(r, depth - 1))
    } else {
        Term::lam(
            "w",
            Term::free("A"),
            Term::app(small(r, depth - 1), Term::var(0)),
        )
    }
}

fn random_sub(r: &mut ChaCha8Rng) -> Substitution {
    let mut s = Substitution::new();
    for y in ["y1", "y2", "y3"] {
        if r.gen_bool(0.5) {
            let gamma = if r.gen_bool(0.3) {
                QContext::from_entries(vec![Entry::existential(
                    format!("g{}", r.gen_range(0..3)),
                    Term::free("A"),
                )])
            } else {
                QContext::new()
            };
            s.bind(y, gamma, small(r, 3));
        }
    }
    s
}

#[test]
fn composition_laws() {
    let mut r = rng(25);
    for _ in 0..1000 {
        let sigma = random_sub(&mut r);
        let tau = random_sub(&mut r);
        let t = small(&mut r, 4);
        let comp = compose(&tau, &sigma);
        assert_eq!(
            comp.apply_to_term(&t),
            tau.apply_to_term(&sigma.apply_to_term(&t))
        );
        let mut g = QContext::new();
        for y in ["y1", "y2", "y3"] {
            g.push(Entry::existential(y, Term::free("A")));
        }
        g.push(Entry::constraint(
            vec![],
            small(&mut r, 3),
            small(&mut r, 3),
        ));
        assert_eq!(
            apply_to_context(&comp, &g),
            apply_to_context(&tau, &apply_to_context(&sigma, &g))
        );
    }
}

#[test]
fn failure_is_stable_under_substitution() {
    let meta = meta_system();
    let mut r = rng(26);
    let mut failures = 0;
    for _ in 0..200 {
        let p = planted(&mut r, 12);
        let mut ctx = p.ctx.clone();
        ctx.push(Entry::existential("x", p.goal.clone()));
        // a ground equation between two distinct universals of the same type
        let us = p.ctx.universals();
        let pair = us.iter().enumerate().find_map(|(i, (a, ta))| {
            us[i + 1..]
                .iter()
                .find(|(_, tb)| tb == ta)
                .map(|(b, _)| (a.clone(), b.clone()))
        });
        let Some((a, b)) = pair else { continue };
        ctx.push(Entry::constraint(vec![], Term::free(a), Term::free(b)));
        let (n, an) = normalize_context(&ctx, &meta, DEFAULT_FUEL).unwrap();
        assert_eq!(classify_context(&n, &an), Status::Failure);
        failures += 1;
        let sigma = Substitution::single("x", QContext::new(), p.proof.clone());
        let image = apply_to_context(&sigma, &n);
        let (n2, an2) = normalize_context(&image, &meta, DEFAULT_FUEL).unwrap();
        assert_eq!(classify_context(&n2, &an2), Status::Failure);
    }
    assert!(failures > 20, "{failures}");
}

#[test]
fn normalize_context_is_idempotent_and_typable() {
    let meta = meta_system();
    let mut r = rng(27);
    for _ in 0..200 {
        let p = planted(&mut r, 12);
        let mut ctx = p.ctx.clone();
        ctx.push(Entry::existential("x", p.goal.clone()));
        ctx.push(Entry::constraint(
            vec![],
            Term::app(
                Term::lam("w", p.goal.clone(), Term::var(0)),
                Term::free("x"),
            ),
            p.proof.clone(),
        ));
        let (n, _) = normalize_context(&ctx, &meta, DEFAULT_FUEL).unwrap();
        let (n2, _) = normalize_context(&n, &meta, DEFAULT_FUEL).unwrap();
        assert_eq!(n, n2);
        check_context(&meta, &n, CheckMode::WithConstraints, DEFAULT_FUEL).unwrap();
    }
}
