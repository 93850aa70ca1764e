//! Directed rapid-retweet network: promoter → promoted accounts.
//!
//! An edge survives only if the promoter retweeted the promoted at least
//! `min_weight` times, each strictly less than `time_window` seconds after
//! the ROOT original post. Singleton accounts are disregarded.

use std::collections::BTreeMap;

use crate::ingest::{TweetKind, TweetStream};
use crate::network::{AccountId, CoordinationNetwork, Evidence};

#[derive(Debug, Clone, Copy)]
pub struct RetweetNetParams {
    /// Qualifying Δt values are 0..time_window-1 whole seconds.
    pub time_window: i64,
    pub min_weight: u64,
}

impl Default for RetweetNetParams {
    fn default() -> Self {
        RetweetNetParams {
            time_window: 10,
            min_weight: 2,
        }
    }
}

/// Network plus counters for what the filters discarded.
#[derive(Debug)]
pub struct RetweetNetOutcome {
    pub network: CoordinationNetwork,
    /// Retweet records lacking root provenance; Δt cannot be computed.
    pub skipped_no_provenance: Vec<String>,
    pub self_retweets: u64,
    /// Retweets outside the time window.
    pub slow_retweets: u64,
    /// Promoter/promoted pairs dropped for weight < min_weight.
    pub dropped_edges: u64,
}

/// Builds the filtered promoter → promoted network from a stream.
pub fn build_rapid_retweet_network(
    stream: &TweetStream,
    params: &RetweetNetParams,
) -> RetweetNetOutcome {
    assert!(params.time_window >= 1, "time_window must be >= 1");
    assert!(params.min_weight >= 1, "min_weight must be >= 1");

    let mut candidates: BTreeMap<(AccountId, AccountId), Vec<Evidence>> = BTreeMap::new();
    let mut skipped_no_provenance = Vec::new();
    let mut self_retweets = 0u64;
    let mut slow_retweets = 0u64;

    for rec in stream {
        if rec.kind != TweetKind::Retweet {
            continue;
        }
        let (Some(promoted), Some(root_created)) =
            (&rec.retweeted_author_id, rec.retweeted_created_at)
        else {
            skipped_no_provenance.push(rec.tweet_id.clone());
            continue;
        };
        if promoted == &rec.author_id {
            // Self-promotion via retweet is not inter-account coordination.
            self_retweets += 1;
            continue;
        }
        let delta_t = rec.created_at - root_created;
        if delta_t < 0 || delta_t >= params.time_window {
            slow_retweets += 1;
            continue;
        }
        candidates
            .entry((rec.author_id.clone(), promoted.clone()))
            .or_default()
            .push(Evidence::RapidRetweet {
                retweet_id: rec.tweet_id.clone(),
                delta_t,
                event_at: rec.created_at,
            });
    }

    let mut network = CoordinationNetwork::new(true);
    let mut dropped_edges = 0u64;
    for ((promoter, promoted), evidence) in candidates {
        if (evidence.len() as u64) < params.min_weight {
            dropped_edges += 1;
            continue;
        }
        for ev in evidence {
            network.add_evidence(&promoter, &promoted, ev);
        }
    }

    RetweetNetOutcome {
        network,
        skipped_no_provenance,
        self_retweets,
        slow_retweets,
        dropped_edges,
    }
}
