use std::collections::BTreeSet;

use crate::act::{ActError, DialogueAct};
use crate::belief::BeliefState;
use crate::ontology::{Database, OntologyError};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Act(#[from] ActError),
}

/// Output of one policy step: the system acts and the belief state with
/// answered requests cleared and the recommendation recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDecision {
    pub acts: Vec<DialogueAct>,
    pub state: BeliefState,
}

/// Rule-based system policy over the active domain.
///
/// The first entity matching the domain's constraints (database order) is
/// selected. Pending requests are answered from it, preceded by a Recommend
/// of its key slot whenever that entity has not been recommended yet. With
/// nothing to answer the policy acknowledges a prior recommendation, or
/// prompts with Greet. Slots in `withheld` are never answered; they stay
/// pending.
pub fn rule_policy(state: &BeliefState, db: &Database, withheld: &BTreeSet<String>) -> Result<PolicyDecision, PolicyError> {
    let greet = || PolicyDecision {
        acts: vec![DialogueAct::greet()],
        state: state.clone(),
    };
    let Some(domain) = state.active_domain.as_deref() else {
        return Ok(greet());
    };
    let Some(schema) = db.schema(domain) else {
        return Ok(greet());
    };
    let constraints = state.constraints(domain);
    let matches = db.query(domain, &constraints)?;
    let Some(entity) = matches.first() else {
        return Ok(PolicyDecision {
            acts: vec![DialogueAct::no_offer(domain)?],
            state: state.clone(),
        });
    };

    let mut next = state.clone();
    let belief = next.domain_mut(domain);
    let key = schema.key_slot.as_str();
    let key_value = entity[key].as_str();
    let answerable: Vec<String> = belief
        .requested
        .iter()
        .filter(|s| !withheld.contains(*s))
        .cloned()
        .collect();
    let already_recommended = belief.recommended.as_deref() == Some(key_value);

    let mut acts = Vec::new();
    if !answerable.is_empty() {
        if !already_recommended {
            acts.push(DialogueAct::recommend(domain, key, key_value)?);
            belief.recommended = Some(key_value.to_string());
        }
        for slot in answerable {
            if slot != key || already_recommended {
                acts.push(DialogueAct::inform(domain, &slot, &entity[slot.as_str()])?);
            }
            belief.requested.remove(&slot);
        }
    } else if already_recommended {
        acts.push(DialogueAct::inform(domain, key, key_value)?);
    } else if belief.recommended.is_some() {
        // constraints changed since the last recommendation
        acts.push(DialogueAct::recommend(domain, key, key_value)?);
        belief.recommended = Some(key_value.to_string());
    } else {
        acts.push(DialogueAct::greet());
    }
    Ok(PolicyDecision { acts, state: next })
}
