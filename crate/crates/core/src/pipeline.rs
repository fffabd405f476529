//! Net to relation matrix, with every precondition checked on the way.

use thiserror::Error;

use crate::net::{
    check_soundness, free_choice_violation, parse_pnml, NetError, ReachabilityGraph, Soundness,
    StateSpaceExceeded, UnsoundReason, WorkflowNet,
};
use crate::relations::{
    build_matrix, derive_directly_follows, Activity, DirectlyFollowsSet, RelationMatrix,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(
        "not free-choice: place `{place}` feeds `{first}` and `{second}` whose presets differ"
    )]
    NotFreeChoice {
        place: String,
        first: String,
        second: String,
    },
    #[error(transparent)]
    StateSpaceExceeded(#[from] StateSpaceExceeded),
    #[error("unsound net: {description}")]
    Unsound {
        reason: UnsoundReason,
        description: String,
    },
}

#[derive(Debug, Clone)]
pub struct Derivation {
    pub net: WorkflowNet,
    pub graph: ReachabilityGraph,
    pub directly_follows: DirectlyFollowsSet,
    /// Activities in transition declaration order.
    pub matrix: RelationMatrix,
}

pub fn derive(net: WorkflowNet, state_limit: usize) -> Result<Derivation, DeriveError> {
    if let Some((place, first, second)) = free_choice_violation(&net) {
        return Err(DeriveError::NotFreeChoice {
            place: place.to_owned(),
            first: first.to_owned(),
            second: second.to_owned(),
        });
    }
    let verdict = check_soundness(&net, state_limit)?;
    if let Soundness::Unsound(reason) = verdict.soundness {
        let description = reason.describe(&net);
        return Err(DeriveError::Unsound {
            reason,
            description,
        });
    }
    let directly_follows = derive_directly_follows(&net, &verdict.graph);
    let activities: Vec<Activity> = net
        .activity_labels()
        .into_iter()
        .map(Activity::new)
        .collect();
    let matrix =
        build_matrix(&directly_follows, &activities).expect("derived pairs only use net labels");
    Ok(Derivation {
        net,
        graph: verdict.graph,
        directly_follows,
        matrix,
    })
}

pub fn derive_from_pnml(document: &str, state_limit: usize) -> Result<Derivation, DeriveError> {
    derive(parse_pnml(document)?, state_limit)
}
