use super::term::{Node, Term};
use super::KernelError;

/// Default number of reduction steps before giving up.
pub const DEFAULT_FUEL: usize = 100_000;

/// Reduction strategy for the step-wise reducer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    LeftmostOutermost,
    RightmostInnermost,
}

struct Fuel {
    left: usize,
    initial: usize,
}

impl Fuel {
    fn burn(&mut self) -> Result<(), KernelError> {
        if self.left == 0 {
            return Err(KernelError::FuelExhausted(self.initial));
        }
        self.left -= 1;
        Ok(())
    }
}

/// βη-normal form by normal-order reduction.
pub fn normalize(t: &Term, fuel: usize) -> Result<Term, KernelError> {
    let mut fuel = Fuel {
        left: fuel,
        initial: fuel,
    };
    nf(t, &mut fuel)
}

fn nf(t: &Term, fuel: &mut Fuel) -> Result<Term, KernelError> {
    match t.node() {
        Node::Sort(_) | Node::Var(_) | Node::Free(_) => Ok(t.clone()),
        Node::Prod(n, a, b) => {
            let a2 = nf(a, fuel)?;
            let b2 = nf(b, fuel)?;
            if a2.ptr_eq(a) && b2.ptr_eq(b) {
                Ok(t.clone())
            } else {
                Ok(Term::prod(n.clone(), a2, b2))
            }
        }
        Node::Lam(n, a, b) => {
            let b2 = nf(b, fuel)?;
            if let Some(f) = eta_contractum(&b2) {
                fuel.burn()?;
                return Ok(f);
            }
            let a2 = nf(a, fuel)?;
            if a2.ptr_eq(a) && b2.ptr_eq(b) {
                Ok(t.clone())
            } else {
                Ok(Term::lam(n.clone(), a2, b2))
            }
        }
        Node::App(..) => {
            let (head, args) = t.spine();
            let mut head = head.clone();
            let mut args: Vec<Term> = args.into_iter().cloned().collect();
            let mut i = 0;
            loop {
                if i < args.len() {
                    if let Node::Lam(_, _, body) = head.node() {
                        fuel.burn()?;
                        head = body.instantiate(&args[i]);
                        i += 1;
                        continue;
                    }
                    if let Node::App(..) = head.node() {
                        let (h, inner) = head.spine();
                        let h = h.clone();
                        let mut rebuilt: Vec<Term> = inner.into_iter().cloned().collect();
                        rebuilt.extend(args.drain(i..));
                        args = rebuilt;
                        i = 0;
                        head = h;
                        continue;
                    }
                }
                break;
            }
            let rest = &args[i..];
            if rest.is_empty() {
                return nf(&head, fuel);
            }
            let head = nf(&head, fuel)?;
            let mut out = head;
            for a in rest {
                out = Term::app(out, nf(a, fuel)?);
            }
            Ok(out)
        }
    }
}

/// `[x:T](f x)` with `x` not free in `f` contracts to `f`.
fn eta_contractum(body: &Term) -> Option<Term> {
    if let Node::App(f, a) = body.node() {
        if matches!(a.node(), Node::Var(0)) && !f.has_loose(0) {
            return Some(f.shift(-1, 0));
        }
    }
    None
}

fn contract(t: &Term) -> Option<Term> {
    match t.node() {
        Node::App(f, a) => match f.node() {
            Node::Lam(_, _, body) => Some(body.instantiate(a)),
            _ => None,
        },
        Node::Lam(_, _, body) => eta_contractum(body),
        _ => None,
    }
}

/// Performs one reduction step chosen by `strategy`, if any redex exists.
pub fn reduce_step(t: &Term, strategy: Strategy) -> Option<Term> {
    match strategy {
        Strategy::LeftmostOutermost => step_lo(t),
        Strategy::RightmostInnermost => step_ri(t),
    }
}

fn step_lo(t: &Term) -> Option<Term> {
    if let Some(r) = contract(t) {
        return Some(r);
    }
    match t.node() {
        Node::Sort(_) | Node::Var(_) | Node::Free(_) => None,
        Node::App(f, a) => step_lo(f)
            .map(|f2| Term::app(f2, a.clone()))
            .or_else(|| step_lo(a).map(|a2| Term::app(f.clone(), a2))),
        Node::Lam(n, a, b) => step_lo(a)
            .map(|a2| Term::lam(n.clone(), a2, b.clone()))
            .or_else(|| step_lo(b).map(|b2| Term::lam(n.clone(), a.clone(), b2))),
        Node::Prod(n, a, b) => step_lo(a)
            .map(|a2| Term::prod(n.clone(), a2, b.clone()))
            .or_else(|| step_lo(b).map(|b2| Term::prod(n.clone(), a.clone(), b2))),
    }
}

fn step_ri(t: &Term) -> Option<Term> {
    let inner = match t.node() {
        Node::Sort(_) | Node::Var(_) | Node::Free(_) => None,
        Node::App(f, a) => step_ri(a)
            .map(|a2| Term::app(f.clone(), a2))
            .or_else(|| step_ri(f).map(|f2| Term::app(f2, a.clone()))),
        Node::Lam(n, a, b) => step_ri(b)
            .map(|b2| Term::lam(n.clone(), a.clone(), b2))
            .or_else(|| step_ri(a).map(|a2| Term::lam(n.clone(), a2, b.clone()))),
        Node::Prod(n, a, b) => step_ri(b)
            .map(|b2| Term::prod(n.clone(), a.clone(), b2))
            .or_else(|| step_ri(a).map(|a2| Term::prod(n.clone(), a2, b.clone()))),
    };
    inner.or_else(|| contract(t))
}

/// Normal form by iterating single steps of `strategy`.
pub fn normalize_with(t: &Term, strategy: Strategy, fuel: usize) -> Result<Term, KernelError> {
    let mut cur = t.clone();
    for _ in 0..fuel {
        match reduce_step(&cur, strategy) {
            Some(next) => cur = next,
            None => return Ok(cur),
        }
    }
    Err(KernelError::FuelExhausted(fuel))
}

pub fn is_normal(t: &Term) -> bool {
    reduce_step(t, Strategy::LeftmostOutermost).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(ty: Term, body: Term) -> Term {
        Term::lam("x", ty, body)
    }

    #[test]
    fn beta_identity() {
        let t = Term::app(lam(Term::free("T"), Term::var(0)), Term::free("a"));
        assert_eq!(normalize(&t, DEFAULT_FUEL).unwrap(), Term::free("a"));
    }

    #[test]
    fn eta_contracts() {
        let t = lam(Term::free("A"), Term::app(Term::free("f"), Term::var(0)));
        assert_eq!(normalize(&t, DEFAULT_FUEL).unwrap(), Term::free("f"));
    }

    #[test]
    fn eta_needs_variable_not_free() {
        // [x:A](x x) is not an eta redex
        let t = lam(Term::free("A"), Term::app(Term::var(0), Term::var(0)));
        assert_eq!(normalize(&t, DEFAULT_FUEL).unwrap(), t);
    }

    #[test]
    fn polymorphic_identity_instance() {
        // ([P:Prop][x:P]x (A -> B))  ~>  [x:A -> B]x
        let a_to_b = Term::arrow(Term::free("A"), Term::free("B"));
        let poly = Term::lam(
            "P",
            Term::prop(),
            Term::lam("x", Term::var(0), Term::var(0)),
        );
        let t = Term::app(poly, a_to_b.clone());
        let want = Term::lam("x", a_to_b, Term::var(0));
        assert_eq!(normalize(&t, DEFAULT_FUEL).unwrap(), want);
        // the step-wise oracle agrees, in exactly two steps
        let one = reduce_step(&t, Strategy::LeftmostOutermost).unwrap();
        assert!(reduce_step(&one, Strategy::LeftmostOutermost).is_none());
        assert_eq!(one, want);
    }

    #[test]
    fn fuel_exhaustion_on_omega() {
        // (\x. x x)(\x. x x) is ill-typed but must not hang
        let w = lam(Term::prop(), Term::app(Term::var(0), Term::var(0)));
        let omega = Term::app(w.clone(), w);
        assert!(matches!(
            normalize(&omega, 50),
            Err(KernelError::FuelExhausted(50))
        ));
        assert!(normalize_with(&omega, Strategy::RightmostInnermost, 50).is_err());
    }

    #[test]
    fn nested_head_redex() {
        // (([x]([y]y)) a b) ~> b
        let k = lam(Term::prop(), lam(Term::prop(), Term::var(0)));
        let t = Term::apps(k, [Term::free("a"), Term::free("b")]);
        assert_eq!(normalize(&t, DEFAULT_FUEL).unwrap(), Term::free("b"));
    }
}
