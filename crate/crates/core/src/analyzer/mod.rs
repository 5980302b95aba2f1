//! Corpus analysis: overall and per-domain metrics, user and system act
//! confusion, audit of system informs, loop attribution, and comparison of
//! systems run against the same simulated users.

mod html;
mod tally;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dialogue::{DialogueLog, Outcome};
use crate::ontology::Database;
use crate::session::{domain_inform_scores, domain_requests_answered, evaluate_success, inform_f1};

pub use html::{render_comparison, render_report};
pub use tally::{
    align, audit_system_acts, classify_inform, loop_cause, loop_causes, nlg_confusion, nlu_confusion, Alignment,
    AuditLabel, AuditRow, ConfusionRow, ConfusionTable, DomainLoops, LoopTable, MissingRow, SystemActAudit,
    DEFAULT_LOOP_WINDOW,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("{count} labels given for {reports} reports")]
    LabelCount { count: usize, reports: usize },
    #[error("corpus mismatch: {label} differs from {baseline} in {what}")]
    CorpusMismatch {
        baseline: String,
        label: String,
        what: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dialogues: u64,
    pub success_rate: f64,
    pub inform_f1: f64,
    pub avg_turns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMetrics {
    pub dialogues: u64,
    /// Dialogues where every request of this domain was answered correctly.
    pub success_rate: f64,
    pub inform_f1: f64,
    pub avg_turns: f64,
    pub loop_proportion: f64,
}

/// What a report was computed from; compare refuses to pair reports whose
/// fingerprints differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFingerprint {
    pub seeds: Vec<u64>,
    /// SHA-256 over the serialized goal sequence.
    pub goals_digest: String,
}

impl CorpusFingerprint {
    pub fn of(corpus: &[DialogueLog]) -> Self {
        let mut hasher = Sha256::new();
        for log in corpus {
            hasher.update(serde_json::to_vec(&log.goal).expect("goals serialize"));
            hasher.update(b"\n");
        }
        CorpusFingerprint {
            seeds: corpus.iter().map(|l| l.seed).collect(),
            goals_digest: hex::encode(hasher.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub success: u64,
    pub failure_max_turns: u64,
    pub failure_other: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub episode_count: u64,
    pub overall: Metrics,
    pub outcomes: OutcomeCounts,
    pub per_domain: IndexMap<String, DomainMetrics>,
    pub nlu_confusion: ConfusionTable,
    pub system_act_audit: SystemActAudit,
    pub nlg_confusion: ConfusionTable,
    pub loop_causes: LoopTable,
    pub corpus: CorpusFingerprint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub loop_window: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            loop_window: DEFAULT_LOOP_WINDOW,
        }
    }
}

fn mean(sum: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Computes every report category. Success and inform F1 are recomputed
/// from the turns against `db` rather than read from the stored scores.
pub fn analyze(corpus: &[DialogueLog], db: &Database, config: &AnalysisConfig) -> Result<AnalysisReport, AnalysisError> {
    if corpus.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    let n = corpus.len() as u64;
    let mut successes = 0u64;
    let mut f1_sum = 0.0;
    let mut turn_sum = 0u64;
    let mut outcomes = OutcomeCounts {
        success: 0,
        failure_max_turns: 0,
        failure_other: 0,
    };
    // domain → (dialogues, successes, f1 sum, turn sum); database order
    let mut domains: IndexMap<String, (u64, u64, f64, u64)> =
        db.domain_names().map(|d| (d.to_string(), (0, 0, 0.0, 0))).collect();
    for log in corpus {
        let turns = log.user_turn_count() as u64;
        successes += u64::from(evaluate_success(log, db));
        f1_sum += inform_f1(log, db).2;
        turn_sum += turns;
        match log.outcome {
            Outcome::Success => outcomes.success += 1,
            Outcome::FailureMaxTurns => outcomes.failure_max_turns += 1,
            Outcome::FailureOther => outcomes.failure_other += 1,
        }
        for domain in log.goal.domains() {
            let entry = domains.entry(domain.to_string()).or_insert((0, 0, 0.0, 0));
            entry.0 += 1;
            entry.1 += u64::from(domain_requests_answered(&log.goal, &log.turns, db, domain));
            entry.2 += domain_inform_scores(&log.goal, &log.turns, db, domain).2;
            entry.3 += turns;
        }
    }
    let loops = loop_causes(corpus, config.loop_window);
    let per_domain = domains
        .into_iter()
        .map(|(d, (count, ok, f1, turns))| {
            let loop_proportion = loops.per_domain.get(&d).map(DomainLoops::proportion).unwrap_or(0.0);
            let metrics = DomainMetrics {
                dialogues: count,
                success_rate: mean(ok as f64, count),
                inform_f1: mean(f1, count),
                avg_turns: mean(turns as f64, count),
                loop_proportion,
            };
            (d, metrics)
        })
        .collect();
    Ok(AnalysisReport {
        episode_count: n,
        overall: Metrics {
            dialogues: n,
            success_rate: mean(successes as f64, n),
            inform_f1: mean(f1_sum, n),
            avg_turns: mean(turn_sum as f64, n),
        },
        outcomes,
        per_domain,
        nlu_confusion: nlu_confusion(corpus),
        system_act_audit: audit_system_acts(corpus, db),
        nlg_confusion: nlg_confusion(corpus),
        loop_causes: loops,
        corpus: CorpusFingerprint::of(corpus),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub success_rate: f64,
    pub inform_f1: f64,
    pub avg_turns: f64,
}

impl MetricDelta {
    fn between(base: (f64, f64, f64), other: (f64, f64, f64)) -> Self {
        MetricDelta {
            success_rate: other.0 - base.0,
            inform_f1: other.1 - base.1,
            avg_turns: other.2 - base.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub label: String,
    pub overall: Metrics,
    pub per_domain: IndexMap<String, DomainMetrics>,
    pub nlu_error_share: f64,
    pub invalid: u64,
    pub redundant: u64,
    pub missing: u64,
    pub looped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDelta {
    pub label: String,
    pub overall: MetricDelta,
    pub per_domain: IndexMap<String, MetricDelta>,
}

/// Side-by-side comparison. Deltas are each system minus the baseline
/// (the first report).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub episode_count: u64,
    pub corpus: CorpusFingerprint,
    pub systems: Vec<SystemSummary>,
    pub deltas: Vec<SystemDelta>,
}

pub fn compare(reports: &[AnalysisReport], labels: &[String]) -> Result<Comparison, AnalysisError> {
    if reports.len() < 2 {
        return Err(AnalysisError::TooFewReports(reports.len()));
    }
    if labels.len() != reports.len() {
        return Err(AnalysisError::LabelCount {
            count: labels.len(),
            reports: reports.len(),
        });
    }
    let base = &reports[0];
    for (report, label) in reports.iter().zip(labels).skip(1) {
        let mismatch = |what| AnalysisError::CorpusMismatch {
            baseline: labels[0].clone(),
            label: label.clone(),
            what,
        };
        if report.episode_count != base.episode_count {
            return Err(mismatch("episode count"));
        }
        if report.corpus.seeds != base.corpus.seeds {
            return Err(mismatch("seeds"));
        }
        if report.corpus.goals_digest != base.corpus.goals_digest {
            return Err(mismatch("user goals"));
        }
    }
    let triple = |m: &Metrics| (m.success_rate, m.inform_f1, m.avg_turns);
    let dtriple = |m: &DomainMetrics| (m.success_rate, m.inform_f1, m.avg_turns);
    let systems = reports
        .iter()
        .zip(labels)
        .map(|(r, label)| SystemSummary {
            label: label.clone(),
            overall: r.overall.clone(),
            per_domain: r.per_domain.clone(),
            nlu_error_share: r.nlu_confusion.error_share(),
            invalid: r.system_act_audit.total_invalid(),
            redundant: r.system_act_audit.total_redundant(),
            missing: r.system_act_audit.total_missing(),
            looped: r.loop_causes.looped,
        })
        .collect();
    let deltas = reports
        .iter()
        .zip(labels)
        .skip(1)
        .map(|(r, label)| SystemDelta {
            label: label.clone(),
            overall: MetricDelta::between(triple(&base.overall), triple(&r.overall)),
            per_domain: base
                .per_domain
                .iter()
                .filter_map(|(d, m)| {
                    let other = r.per_domain.get(d)?;
                    Some((d.clone(), MetricDelta::between(dtriple(m), dtriple(other))))
                })
                .collect(),
        })
        .collect();
    Ok(Comparison {
        baseline: labels[0].clone(),
        episode_count: base.episode_count,
        corpus: base.corpus.clone(),
        systems,
        deltas,
    })
}

/// Per-pattern audit totals partition the informs; a helper for checks.
pub fn audit_partitions(audit: &SystemActAudit) -> bool {
    audit
        .informs
        .values()
        .all(|r| r.valid + r.invalid + r.redundant == r.informs)
}

/// Loop shares sum to one whenever a loop was observed.
pub fn loop_shares_sum(table: &LoopTable) -> f64 {
    table.shares().iter().map(|(_, s)| s).sum()
}

/// Aggregates counts from several tables of the same kind. Useful when a
/// corpus is analyzed in shards.
pub fn merge_confusion(tables: &[ConfusionTable]) -> ConfusionTable {
    let mut out = ConfusionTable::default();
    for table in tables {
        for (act, row) in &table.rows {
            let acc = out.rows.entry(act.clone()).or_default();
            acc.occurrences += row.occurrences;
            acc.correct += row.correct;
            acc.dropped += row.dropped;
            for (p, c) in &row.confused {
                *acc.confused.entry(p.clone()).or_default() += c;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pack::DomainPack;
    use crate::pipeline::NoiseConfig;
    use crate::session::{run_episodes, SimulationConfig};

    fn corpus(config: &SimulationConfig, n: usize, seed: u64) -> (DomainPack, Vec<DialogueLog>) {
        let pack = DomainPack::bundled();
        let logs = run_episodes(pack.clone().shared(), config, n, seed, 1).unwrap();
        (pack, logs)
    }

    #[test]
    fn noiseless_corpus_is_clean() {
        let (pack, logs) = corpus(&SimulationConfig::default(), 60, 3);
        let report = analyze(&logs, &pack.database, &AnalysisConfig::default()).unwrap();
        assert_eq!(report.overall.success_rate, 1.0);
        assert_eq!(report.overall.inform_f1, 1.0);
        assert_eq!(report.system_act_audit.total_invalid(), 0);
        assert_eq!(report.system_act_audit.total_redundant(), 0);
        assert_eq!(report.system_act_audit.total_missing(), 0);
        assert_eq!(report.nlu_confusion.errors(), 0);
        assert_eq!(report.nlg_confusion.errors(), 0);
        assert_eq!(report.loop_causes.looped, 0);
        assert!(report.loop_causes.causes.is_empty());
        // pure function of the corpus
        assert_eq!(analyze(&logs, &pack.database, &AnalysisConfig::default()).unwrap(), report);
    }

    #[test]
    fn single_dialogue_averages_are_its_values() {
        let (pack, logs) = corpus(&SimulationConfig::default(), 1, 11);
        let report = analyze(&logs, &pack.database, &AnalysisConfig::default()).unwrap();
        assert_eq!(report.overall.avg_turns, logs[0].user_turn_count() as f64);
        assert_eq!(report.overall.inform_f1, logs[0].evaluation.inform_f1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let pack = DomainPack::bundled();
        assert_eq!(
            analyze(&[], &pack.database, &AnalysisConfig::default()),
            Err(AnalysisError::EmptyCorpus)
        );
    }

    #[test]
    fn compare_checks_corpora() {
        let (pack, a) = corpus(&SimulationConfig::default(), 20, 1);
        let mut noisy = SimulationConfig::default();
        noisy.system.noise = NoiseConfig::domain_confusion(0.3);
        let (_, b) = corpus(&noisy, 20, 1);
        let (_, c) = corpus(&SimulationConfig::default(), 20, 2);
        let cfg = AnalysisConfig::default();
        let ra = analyze(&a, &pack.database, &cfg).unwrap();
        let rb = analyze(&b, &pack.database, &cfg).unwrap();
        let rc = analyze(&c, &pack.database, &cfg).unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];

        let same = compare(&[ra.clone(), ra.clone()], &labels).unwrap();
        assert_eq!(same.deltas[0].overall.success_rate, 0.0);
        assert!(same.deltas[0].per_domain.values().all(|d| d.success_rate == 0.0 && d.inform_f1 == 0.0));

        let worse = compare(&[ra.clone(), rb], &labels).unwrap();
        assert!(worse.deltas[0].overall.success_rate < 0.0);

        assert!(matches!(
            compare(&[ra.clone(), rc], &labels),
            Err(AnalysisError::CorpusMismatch { what: "seeds", .. })
        ));
        assert_eq!(compare(&[ra], &labels[..1]), Err(AnalysisError::TooFewReports(1)));
    }

    #[test]
    fn merged_shards_equal_the_whole() {
        let mut noisy = SimulationConfig::default();
        noisy.system.noise = NoiseConfig::domain_confusion(0.3);
        let (_, logs) = corpus(&noisy, 30, 5);
        let whole = nlu_confusion(&logs);
        let shards: Vec<_> = logs.chunks(7).map(nlu_confusion).collect();
        assert_eq!(merge_confusion(&shards), whole);
    }
}
