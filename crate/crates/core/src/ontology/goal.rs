use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Database, Entity, OntologyError};

/// A constraint copied from an earlier sub-goal's entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub source_domain: String,
    pub slot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoal {
    pub domain: String,
    /// Constraints in the order they were generated; the simulator informs
    /// them in this order.
    pub constraints: IndexMap<String, String>,
    pub requests: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependency: Option<Dependency>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub subgoals: Vec<SubGoal>,
}

impl UserGoal {
    pub fn subgoal(&self, domain: &str) -> Option<&SubGoal> {
        self.subgoals.iter().find(|g| g.domain == domain)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.subgoals.iter().map(|g| g.domain.as_str())
    }

    pub fn total_constraints(&self) -> usize {
        self.subgoals.iter().map(|g| g.constraints.len()).sum()
    }

    pub fn total_requests(&self) -> usize {
        self.subgoals.iter().map(|g| g.requests.len()).sum()
    }

    /// Every requested (domain, slot) pair in goal order.
    pub fn requested_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.subgoals
            .iter()
            .flat_map(|g| g.requests.iter().map(move |s| (g.domain.as_str(), s.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub min_domains: usize,
    pub max_domains: usize,
    pub min_constraints: usize,
    pub max_constraints: usize,
    pub min_requests: usize,
    pub max_requests: usize,
    /// Chance that a later sub-goal copies a shared slot from the previous one.
    pub dependency_probability: f64,
    pub shared_slots: Vec<String>,
    /// Restricts the domains goals are drawn from; all domains when absent.
    pub domains: Option<Vec<String>>,
    /// Requestable slots included in every sub-goal that can take them.
    pub forced_requests: Vec<String>,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig {
            min_domains: 1,
            max_domains: 3,
            min_constraints: 1,
            max_constraints: 3,
            min_requests: 1,
            max_requests: 3,
            dependency_probability: 0.6,
            shared_slots: vec!["Area".to_string()],
            domains: None,
            forced_requests: Vec::new(),
        }
    }
}

fn sample_count<R: Rng + ?Sized>(rng: &mut R, min: usize, max: usize, available: usize) -> usize {
    let max = max.max(min).min(available);
    let min = min.min(max);
    rng.gen_range(min..=max)
}

/// Entity-first goal generation: each sub-goal is read off a sampled entity,
/// so every sub-goal has at least one matching entity.
pub fn generate_goal<R: Rng + ?Sized>(
    db: &Database,
    rng: &mut R,
    config: &GoalConfig,
) -> Result<UserGoal, OntologyError> {
    let mut pool: Vec<String> = match &config.domains {
        Some(domains) => domains.clone(),
        None => db.domain_names().map(str::to_string).collect(),
    };
    for domain in &pool {
        if db.entities(domain)?.is_empty() {
            return Err(OntologyError::EmptyDomain(domain.clone()));
        }
    }
    let count = sample_count(rng, config.min_domains.max(1), config.max_domains, pool.len());
    pool.shuffle(rng);
    pool.truncate(count);

    let mut subgoals: Vec<SubGoal> = Vec::with_capacity(count);
    let mut chosen: Vec<&Entity> = Vec::with_capacity(count);
    for domain in &pool {
        let schema = db.schema(domain).expect("checked above");
        let entities = db.entities(domain)?;

        let mut dependency = None;
        let mut entity = None;
        if let (Some(previous), Some(previous_entity)) = (subgoals.last(), chosen.last()) {
            if rng.gen_bool(config.dependency_probability.clamp(0.0, 1.0)) {
                let previous_schema = db.schema(&previous.domain).expect("generated from db");
                let shared: Vec<&String> = config
                    .shared_slots
                    .iter()
                    .filter(|s| schema.is_informable(s) && previous_schema.is_informable(s))
                    .collect();
                for slot in &shared {
                    let value = &previous_entity[slot.as_str()];
                    let matches: Vec<&Entity> = entities.iter().filter(|e| &e[slot.as_str()] == value).collect();
                    if let Some(found) = matches.choose(rng) {
                        entity = Some(*found);
                        dependency = Some(Dependency {
                            source_domain: previous.domain.clone(),
                            slot: (*slot).clone(),
                        });
                        break;
                    }
                }
                if entity.is_none() {
                    if let Some(slot) = shared.first() {
                        return Err(OntologyError::UnsatisfiableDependency {
                            domain: domain.clone(),
                            slot: (*slot).clone(),
                            value: previous_entity[slot.as_str()].clone(),
                        });
                    }
                }
            }
        }
        let entity = match entity {
            Some(e) => e,
            None => entities.choose(rng).expect("non-empty"),
        };

        let mut slots: Vec<&String> = schema
            .informable_slots
            .keys()
            .filter(|s| dependency.as_ref().is_none_or(|d| &d.slot != *s))
            .collect();
        slots.shuffle(rng);
        let available = schema.informable_slots.len();
        let wanted = sample_count(rng, config.min_constraints.max(1), config.max_constraints, available);
        let mut constraints = IndexMap::new();
        if let Some(dep) = &dependency {
            constraints.insert(dep.slot.clone(), entity[dep.slot.as_str()].clone());
        }
        for slot in slots {
            if constraints.len() >= wanted {
                break;
            }
            constraints.insert(slot.clone(), entity[slot.as_str()].clone());
        }

        let candidates: Vec<&String> = schema
            .requestable_slots
            .iter()
            .filter(|s| !constraints.contains_key(*s))
            .collect();
        let mut requests: Vec<String> = config
            .forced_requests
            .iter()
            .filter(|s| candidates.contains(s))
            .cloned()
            .collect();
        let mut rest: Vec<&String> = candidates.into_iter().filter(|s| !requests.contains(s)).collect();
        rest.shuffle(rng);
        let wanted = sample_count(rng, config.min_requests, config.max_requests, rest.len() + requests.len());
        for slot in rest {
            if requests.len() >= wanted {
                break;
            }
            requests.push(slot.clone());
        }

        subgoals.push(SubGoal {
            domain: domain.clone(),
            constraints,
            requests,
            dependency,
        });
        chosen.push(entity);
    }
    Ok(UserGoal { subgoals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pack::DomainPack;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matches_oracle(db: &Database, goal: &SubGoal) -> usize {
        // linear scan independent of Database::query
        db.entities(&goal.domain)
            .unwrap()
            .iter()
            .filter(|e| goal.constraints.iter().all(|(s, v)| e.get(s) == Some(v)))
            .count()
    }

    #[test]
    fn single_domain_goal_is_satisfiable() {
        let pack = DomainPack::bundled();
        let config = GoalConfig {
            min_domains: 1,
            max_domains: 1,
            ..GoalConfig::default()
        };
        for seed in 0..200 {
            let goal = generate_goal(&pack.database, &mut ChaCha8Rng::seed_from_u64(seed), &config).unwrap();
            assert_eq!(goal.subgoals.len(), 1);
            let sub = &goal.subgoals[0];
            assert!(!sub.requests.is_empty());
            assert!(!sub.constraints.is_empty());
            assert!(sub.requests.iter().all(|r| !sub.constraints.contains_key(r)));
            assert!(matches_oracle(&pack.database, sub) > 0);
        }
    }

    #[test]
    fn forced_dependency_copies_shared_slot() {
        let pack = DomainPack::bundled();
        let config = GoalConfig {
            min_domains: 2,
            max_domains: 2,
            dependency_probability: 1.0,
            ..GoalConfig::default()
        };
        for seed in 0..100 {
            let goal = generate_goal(&pack.database, &mut ChaCha8Rng::seed_from_u64(seed), &config).unwrap();
            let (first, second) = (&goal.subgoals[0], &goal.subgoals[1]);
            let dep = second.dependency.as_ref().expect("dependency forced");
            assert_eq!(dep.source_domain, first.domain);
            assert_eq!(dep.slot, "Area");
            assert!(second.constraints.contains_key("Area"));
            assert!(matches_oracle(&pack.database, second) > 0);
            // the copied value comes from an entity satisfying the first sub-goal
            let area = &second.constraints["Area"];
            let source_ok = pack.database.entities(&first.domain).unwrap().iter().any(|e| {
                first.constraints.iter().all(|(s, v)| &e[s.as_str()] == v) && &e["Area"] == area
            });
            assert!(source_ok);
        }
    }

    #[test]
    fn dependency_rate_matches_probability() {
        let pack = DomainPack::bundled();
        let config = GoalConfig {
            min_domains: 2,
            max_domains: 2,
            ..GoalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let with_dep = (0..n)
            .filter(|_| {
                let goal = generate_goal(&pack.database, &mut rng, &config).unwrap();
                goal.subgoals[1].dependency.is_some()
            })
            .count();
        let rate = with_dep as f64 / n as f64;
        assert!((rate - 0.6).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn same_seed_same_goal() {
        let pack = DomainPack::bundled();
        let config = GoalConfig::default();
        for seed in 0..20 {
            let a = generate_goal(&pack.database, &mut ChaCha8Rng::seed_from_u64(seed), &config).unwrap();
            let b = generate_goal(&pack.database, &mut ChaCha8Rng::seed_from_u64(seed), &config).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn forced_requests_are_included() {
        let pack = DomainPack::bundled();
        let config = GoalConfig {
            forced_requests: vec!["Phone".into()],
            ..GoalConfig::default()
        };
        for seed in 0..50 {
            let goal = generate_goal(&pack.database, &mut ChaCha8Rng::seed_from_u64(seed), &config).unwrap();
            assert!(goal.subgoals.iter().all(|g| g.requests.first().map(String::as_str) == Some("Phone")));
        }
    }

    #[test]
    fn unsatisfiable_dependency_is_reported() {
        let schema = r#"[
          {"name": "A", "informable_slots": {"Area": ["north", "south"]}, "requestable_slots": ["Name"], "key_slot": "Name"},
          {"name": "B", "informable_slots": {"Area": ["north", "south"]}, "requestable_slots": ["Name"], "key_slot": "Name"}
        ]"#;
        let database = r#"{
          "A": [{"Area": "north", "Name": "a1"}],
          "B": [{"Area": "south", "Name": "b1"}]
        }"#;
        let (_, db) = crate::ontology::parse_domain_pack(schema, database).unwrap();
        let config = GoalConfig {
            min_domains: 2,
            max_domains: 2,
            dependency_probability: 1.0,
            ..GoalConfig::default()
        };
        let err = generate_goal(&db, &mut ChaCha8Rng::seed_from_u64(0), &config).unwrap_err();
        assert!(matches!(err, OntologyError::UnsatisfiableDependency { .. }));
    }
}
