use rand::seq::index;

use super::timing::ClientTaskOutcome;
use crate::rng;
use crate::ClientId;

/// Inputs a selection strategy may use.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    /// Clients available now, ascending.
    pub available: &'a [ClientId],
    pub request: usize,
    pub round: usize,
    pub now_s: f64,
    /// Outcomes of the previous round's selected clients.
    pub feedback: &'a [ClientTaskOutcome],
    pub seed: u64,
}

pub trait SelectionStrategy: Send {
    /// Returns at most `ctx.request` distinct ids from `ctx.available`.
    fn select(&mut self, ctx: &SelectionContext<'_>) -> Vec<ClientId>;
}

/// Uniform sampling without replacement.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSelection;

impl SelectionStrategy for UniformSelection {
    fn select(&mut self, ctx: &SelectionContext<'_>) -> Vec<ClientId> {
        let k = ctx.request.min(ctx.available.len());
        let mut rng = rng::stream(ctx.seed, "select", ctx.round as u64, "");
        let mut picked: Vec<usize> = index::sample(&mut rng, ctx.available.len(), k).into_vec();
        picked.sort_unstable();
        picked
            .into_iter()
            .map(|i| ctx.available[i].clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub ids: Vec<ClientId>,
    /// Requested minus selected.
    pub shortfall: usize,
}

/// Runs `strategy` and checks its answer: ids must be distinct, available
/// and no more than requested. Returned ids are sorted.
pub fn select_participants(
    strategy: &mut dyn SelectionStrategy,
    ctx: &SelectionContext<'_>,
) -> crate::Result<Selection> {
    let mut ids = strategy.select(ctx);
    ids.sort();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before || ids.len() > ctx.request {
        return Err(crate::Error::Invalid(format!(
            "selection returned {before} ids ({} distinct) for a request of {}",
            ids.len(),
            ctx.request
        )));
    }
    if let Some(bad) = ids
        .iter()
        .find(|id| ctx.available.binary_search(id).is_err())
    {
        return Err(crate::Error::Invalid(format!(
            "selected client `{bad}` is not available"
        )));
    }
    let shortfall = ctx.request - ids.len();
    Ok(Selection { ids, shortfall })
}
