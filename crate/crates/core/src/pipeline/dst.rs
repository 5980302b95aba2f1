use crate::act::{DialogueAct, Intent};
use crate::belief::BeliefState;
use crate::ontology::Database;

/// Result of folding one turn of user acts into the belief state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DstUpdate {
    pub state: BeliefState,
    /// Acts ignored because they name an unknown domain, slot or value, or
    /// carry an intent the tracker does not handle.
    pub skipped: usize,
}

/// Rule-based tracker. Inform sets a constraint, Request marks a slot as
/// requested; both move the active domain. Greet and Bye are no-ops.
pub fn dst_update(state: &BeliefState, user_acts: &[DialogueAct], db: &Database) -> DstUpdate {
    let mut next = state.clone();
    let mut skipped = 0;
    for act in user_acts {
        let schema = db.schema(act.domain());
        match act.intent() {
            Intent::Inform => {
                let Some(schema) = schema.filter(|s| s.accepts_value(act.slot(), act.value())) else {
                    skipped += 1;
                    continue;
                };
                let belief = next.domain_mut(&schema.name);
                belief.requested.remove(act.slot());
                belief.constraints.insert(act.slot().to_string(), act.value().to_string());
                next.active_domain = Some(schema.name.clone());
            }
            Intent::Request => {
                let Some(schema) = schema.filter(|s| s.has_slot(act.slot())) else {
                    skipped += 1;
                    continue;
                };
                let belief = next.domain_mut(&schema.name);
                belief.constraints.remove(act.slot());
                belief.requested.insert(act.slot().to_string());
                next.active_domain = Some(schema.name.clone());
            }
            Intent::Greet | Intent::Bye => {}
            Intent::Recommend | Intent::NoOffer => skipped += 1,
        }
    }
    DstUpdate { state: next, skipped }
}
