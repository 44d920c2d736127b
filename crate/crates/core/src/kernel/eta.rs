use super::reduce::normalize;
use super::term::{Name, Node, Sort, Term};
use super::KernelError;

/// Source of declared types for free names.
pub trait Signature {
    /// Declared type of `name`, in βη-normal form.
    fn type_of(&self, name: &Name) -> Option<Term>;
}

impl Signature for std::collections::HashMap<Name, Term> {
    fn type_of(&self, name: &Name) -> Option<Term> {
        self.get(name).cloned()
    }
}

/// Types of the binders currently in scope, outermost first. Each entry is
/// relative to the binders before it.
#[derive(Debug, Clone, Default)]
pub struct Locals(Vec<Term>);

impl Locals {
    pub fn new() -> Locals {
        Locals(Vec::new())
    }

    pub fn from_vec(v: Vec<Term>) -> Locals {
        Locals(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, t: Term) {
        self.0.push(t);
    }

    pub fn pop(&mut self) -> Option<Term> {
        self.0.pop()
    }

    pub fn as_slice(&self) -> &[Term] {
        &self.0
    }

    /// Type of the bound variable `i`, valid at the current depth.
    pub fn lookup(&self, i: u32) -> Option<Term> {
        let n = self.0.len();
        let i = i as usize;
        if i >= n {
            return None;
        }
        Some(self.0[n - 1 - i].shift(i as i64 + 1, 0))
    }
}

/// Normal type of an atomic term: the head's type instantiated through the
/// arguments. Sorts get `None` (their type is not needed here).
pub fn spine_type(
    sig: &dyn Signature,
    locals: &Locals,
    t: &Term,
    fuel: usize,
) -> Result<Option<Term>, KernelError> {
    let (head, args) = t.spine();
    let mut ty = match head.node() {
        Node::Var(i) => locals
            .lookup(*i)
            .ok_or(KernelError::Unbound(format!("#{i}")))?,
        Node::Free(n) => sig
            .type_of(n)
            .ok_or_else(|| KernelError::Unbound(n.to_string()))?,
        Node::Sort(_) if args.is_empty() => return Ok(None),
        _ => return Err(KernelError::NotAtomic),
    };
    for a in args {
        ty = normalize(&ty, fuel)?;
        match ty.node() {
            Node::Prod(_, _, body) => ty = body.instantiate(a),
            _ => return Err(KernelError::IllTyped(format!("{t} applies a non-function"))),
        }
    }
    Ok(Some(normalize(&ty, fuel)?))
}

/// η-long form of a βη-normal term.
pub fn eta_long(sig: &dyn Signature, t: &Term, fuel: usize) -> Result<Term, KernelError> {
    eta_long_in(sig, &mut Locals::new(), t, fuel)
}

/// η-long form under the given local binders.
pub fn eta_long_in(
    sig: &dyn Signature,
    locals: &mut Locals,
    t: &Term,
    fuel: usize,
) -> Result<Term, KernelError> {
    if t.has_beta_redex() {
        return Err(KernelError::NotNormal(t.to_string()));
    }
    expand(sig, locals, t, fuel)
}

fn expand(
    sig: &dyn Signature,
    locals: &mut Locals,
    t: &Term,
    fuel: usize,
) -> Result<Term, KernelError> {
    match t.node() {
        Node::Lam(n, a, b) | Node::Prod(n, a, b) => {
            let a2 = expand(sig, locals, a, fuel)?;
            locals.push(a.clone());
            let b2 = expand(sig, locals, b, fuel);
            locals.pop();
            let b2 = b2?;
            Ok(if t.is_lam() {
                Term::lam(n.clone(), a2, b2)
            } else {
                Term::prod(n.clone(), a2, b2)
            })
        }
        _ => {
            let Some(ty) = spine_type(sig, locals, t, fuel)? else {
                return Ok(t.clone());
            };
            let (head, args) = t.spine();
            let mut new_args = Vec::with_capacity(args.len());
            for a in &args {
                new_args.push(expand(sig, locals, a, fuel)?);
            }
            let (binders, _) = ty.telescope();
            let n = binders.len();
            if n == 0 {
                return Ok(Term::apps(head.clone(), new_args));
            }
            let mut tys = Vec::with_capacity(n);
            for (_, p) in &binders {
                tys.push(expand(sig, locals, p, fuel)?);
                locals.push(p.clone());
            }
            let mut body = Term::apps(
                head.shift(n as i64, 0),
                new_args.into_iter().map(|a| a.shift(n as i64, 0)),
            );
            let mut res = Ok(());
            for i in 0..n {
                match expand(sig, locals, &Term::var((n - 1 - i) as u32), fuel) {
                    Ok(x) => body = Term::app(body, x),
                    Err(e) => {
                        res = Err(e);
                        break;
                    }
                }
            }
            for _ in 0..n {
                locals.pop();
            }
            res?;
            for ((name, _), ty) in binders.into_iter().zip(tys).rev() {
                body = Term::lam(name, ty, body);
            }
            Ok(body)
        }
    }
}

/// η-long form of the βη-normal form.
pub fn normal_eta_long(sig: &dyn Signature, t: &Term, fuel: usize) -> Result<Term, KernelError> {
    eta_long(sig, &normalize(t, fuel)?, fuel)
}

pub fn normal_eta_long_in(
    sig: &dyn Signature,
    locals: &mut Locals,
    t: &Term,
    fuel: usize,
) -> Result<Term, KernelError> {
    eta_long_in(sig, locals, &normalize(t, fuel)?, fuel)
}

/// Size measure on normal η-long terms: sorts count one, a variable counts
/// as much as its type, applications and products add the size of their
/// type, abstractions count their body.
pub fn size_of(sig: &dyn Signature, t: &Term, fuel: usize) -> Result<u64, KernelError> {
    size_in(sig, &mut Locals::new(), t, fuel)
}

pub fn size_in(
    sig: &dyn Signature,
    locals: &mut Locals,
    t: &Term,
    fuel: usize,
) -> Result<u64, KernelError> {
    if t.has_beta_redex() {
        return Err(KernelError::NotNormal(t.to_string()));
    }
    measure(sig, locals, t, fuel)
}

fn measure(
    sig: &dyn Signature,
    locals: &mut Locals,
    t: &Term,
    fuel: usize,
) -> Result<u64, KernelError> {
    match t.node() {
        Node::Sort(_) => Ok(1),
        Node::Lam(_, a, b) => {
            locals.push(a.clone());
            let r = measure(sig, locals, b, fuel);
            locals.pop();
            r
        }
        Node::Prod(_, a, b) => {
            let sa = measure(sig, locals, a, fuel)?;
            locals.push(a.clone());
            let sb = measure(sig, locals, b, fuel);
            locals.pop();
            // the type of a product is a sort
            Ok(sa + sb? + 1)
        }
        Node::Var(_) | Node::Free(_) => type_size(sig, locals, t, fuel),
        Node::App(u, v) => {
            let su = measure(sig, locals, u, fuel)?;
            let sv = measure(sig, locals, v, fuel)?;
            Ok(su + sv + type_size(sig, locals, t, fuel)?)
        }
    }
}

fn type_size(
    sig: &dyn Signature,
    locals: &mut Locals,
    t: &Term,
    fuel: usize,
) -> Result<u64, KernelError> {
    match spine_type(sig, locals, t, fuel)? {
        None => Ok(1),
        Some(ty) => {
            let long = expand(sig, locals, &ty, fuel)?;
            measure(sig, locals, &long, fuel)
        }
    }
}

/// Sorts occurring in a term, used by callers that scan proof bodies.
pub fn sorts_in(t: &Term, out: &mut Vec<Sort>) {
    match t.node() {
        Node::Sort(s) => out.push(*s),
        Node::Var(_) | Node::Free(_) => {}
        Node::App(a, b) | Node::Lam(_, a, b) | Node::Prod(_, a, b) => {
            sorts_in(a, out);
            sorts_in(b, out);
        }
    }
}
