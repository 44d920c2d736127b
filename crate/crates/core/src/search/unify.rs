use crate::context::{Entry, QContext};
use crate::engine::Substitution;
use crate::kernel::{Locals, Term};
use crate::pts::{Checker, PtsSpec};

use super::{universal_signature, Options, Search, SearchError};

/// Ground unifiers of two terms, as a stream of substitutions on the
/// existential variables of the context.
pub struct Unifier<'a> {
    search: Search<'a>,
}

impl<'a> Unifier<'a> {
    pub fn search(&self) -> &Search<'a> {
        &self.search
    }

    pub fn search_mut(&mut self) -> &mut Search<'a> {
        &mut self.search
    }

    pub fn budget_exhausted(&self) -> bool {
        self.search.budget_exhausted()
    }

    pub fn with_trace(self, sink: super::TraceSink<'a>) -> Unifier<'a> {
        Unifier {
            search: self.search.with_trace(sink),
        }
    }
}

impl Iterator for Unifier<'_> {
    type Item = Result<Substitution, SearchError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.search.next().map(|r| r.map(|f| f.substitution()))
    }
}

/// Searches the context extended with the constraint `a = b`. Universal
/// declarations must precede the existential ones.
pub fn ground_unify<'a>(
    spec: &PtsSpec,
    ctx: &QContext,
    a: &Term,
    b: &Term,
    opts: Options,
) -> Result<Unifier<'a>, SearchError> {
    let fuel = opts.budget.fuel;
    let mut seen_exists = false;
    for e in ctx.entries() {
        match e {
            Entry::Universal { name, .. } if seen_exists => {
                return Err(SearchError::IllFormed(format!(
                    "universal {name} declared after an existential"
                )))
            }
            Entry::Universal { .. } => {}
            Entry::Existential { .. } => seen_exists = true,
            Entry::Constraint(_) => {
                return Err(SearchError::IllFormed("unexpected constraint".into()))
            }
        }
    }
    // existentials are checked like universals for well-formedness
    let as_universals = QContext::from_entries(
        ctx.entries()
            .iter()
            .map(|e| match e {
                Entry::Existential { name, ty } => Entry::universal(name.clone(), ty.clone()),
                other => other.clone(),
            })
            .collect(),
    );
    crate::pts::check_context(
        spec,
        &as_universals,
        crate::pts::Mode::WithoutConstraints,
        fuel,
    )
    .map_err(|e| SearchError::IllFormed(e.to_string()))?;
    let sig = universal_signature(&as_universals, fuel);
    let ch = Checker::new(spec, &sig, fuel);
    let ta = ch
        .infer(&mut Locals::new(), a)
        .map_err(|e| SearchError::IllFormed(format!("{a}: {e}")))?;
    let tb = ch
        .infer(&mut Locals::new(), b)
        .map_err(|e| SearchError::IllFormed(format!("{b}: {e}")))?;
    if ta != tb {
        return Err(SearchError::IllFormed(format!(
            "sides have different types {ta} and {tb}"
        )));
    }
    let mut root = ctx.clone();
    root.push(Entry::constraint(vec![], a.clone(), b.clone()));
    let targets = ctx.existentials();
    let search = Search::new(spec, &root, targets, Some((a.clone(), b.clone())), opts)?;
    Ok(Unifier { search })
}
