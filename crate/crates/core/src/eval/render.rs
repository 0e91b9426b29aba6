//! Text outputs of a sweep: per-fold trial records, the summary CSV,
//! upper-triangular markdown tables and accuracy histograms.
//!
//! Trial records carry every number the summaries are computed from, so
//! [`parse_trials_csv`] followed by the renderers reproduces the other files.

use std::collections::BTreeMap;

use super::{
    ConfusionCounts, ExperimentReport, FoldRecord, Histogram, PairInfo, Scheme, SchemeSummary,
    SweepReport, TrialRecord,
};
use crate::error::{Error, Result};

const TRIAL_COLUMNS: [&str; 26] = [
    "positive_id",
    "positive_name",
    "negative_id",
    "negative_name",
    "scheme",
    "trial",
    "trial_seed",
    "d_prime",
    "k",
    "fold",
    "pool_seed",
    "train_assign_seed",
    "test_assign_seed",
    "tp",
    "tn",
    "fp",
    "fn",
    "accuracy",
    "recovery",
    "gt_tp",
    "gt_tn",
    "gt_fp",
    "gt_fn",
    "gt_accuracy",
    "converged",
    "iterations",
];

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

/// One row per fold of every trial.
pub fn trials_csv(sweep: &SweepReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_COLUMNS).expect("in-memory write");
    for e in &sweep.entries {
        for r in e.records.iter().flatten() {
            for (f, fold) in r.folds.iter().enumerate() {
                let row = [
                    e.pair.positive_id.to_string(),
                    e.pair.positive_name.clone(),
                    e.pair.negative_id.to_string(),
                    e.pair.negative_name.clone(),
                    r.scheme.to_string(),
                    r.trial_index.to_string(),
                    r.trial_seed.to_string(),
                    r.d_prime.to_string(),
                    r.k.to_string(),
                    f.to_string(),
                    fold.pool_seed.to_string(),
                    fold.train_assign_seed.to_string(),
                    fold.test_assign_seed.to_string(),
                    fold.counts.tp.to_string(),
                    fold.counts.tn.to_string(),
                    fold.counts.fp.to_string(),
                    fold.counts.fn_.to_string(),
                    fold.accuracy.to_string(),
                    fold.recovery.to_string(),
                    fold.ground_truth_counts.tp.to_string(),
                    fold.ground_truth_counts.tn.to_string(),
                    fold.ground_truth_counts.fp.to_string(),
                    fold.ground_truth_counts.fn_.to_string(),
                    fold.ground_truth_accuracy.to_string(),
                    fold.converged.to_string(),
                    fold.iterations.to_string(),
                ];
                w.write_record(&row).expect("in-memory write");
            }
        }
    }
    finish(w)
}

/// Rebuilds a sweep from [`trials_csv`] output.
pub fn parse_trials_csv(text: &str) -> Result<SweepReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(TRIAL_COLUMNS) {
        return Err(Error::InvalidArgument(
            "trial records have unexpected columns".into(),
        ));
    }
    // pair -> scheme -> trial -> record, kept in first-seen order
    let mut pairs: Vec<(PairInfo, Vec<(Scheme, Vec<TrialRecord>)>)> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let bad = |col: &str| {
            Error::InvalidArgument(format!("trial records row {}: bad {col}", line + 2))
        };
        let get = |i: usize| row.get(i).unwrap_or("");
        macro_rules! num {
            ($i:expr) => {
                get($i).parse().map_err(|_| bad(TRIAL_COLUMNS[$i]))?
            };
        }
        let pair = PairInfo {
            positive_id: num!(0),
            positive_name: get(1).to_owned(),
            negative_id: num!(2),
            negative_name: get(3).to_owned(),
        };
        let scheme: Scheme = get(4).parse().map_err(|_| bad("scheme"))?;
        let trial_index: usize = num!(5);
        let fold = FoldRecord {
            pool_seed: num!(10),
            train_assign_seed: num!(11),
            test_assign_seed: num!(12),
            counts: ConfusionCounts {
                tp: num!(13),
                tn: num!(14),
                fp: num!(15),
                fn_: num!(16),
            },
            accuracy: num!(17),
            recovery: num!(18),
            ground_truth_counts: ConfusionCounts {
                tp: num!(19),
                tn: num!(20),
                fp: num!(21),
                fn_: num!(22),
            },
            ground_truth_accuracy: num!(23),
            converged: num!(24),
            iterations: num!(25),
        };

        let pi = match pairs.iter().position(|(p, _)| *p == pair) {
            Some(i) => i,
            None => {
                pairs.push((pair, Vec::new()));
                pairs.len() - 1
            }
        };
        let schemes = &mut pairs[pi].1;
        let si = match schemes.iter().position(|(s, _)| *s == scheme) {
            Some(i) => i,
            None => {
                schemes.push((scheme, Vec::new()));
                schemes.len() - 1
            }
        };
        let trials = &mut schemes[si].1;
        match trials.last_mut() {
            Some(t) if t.trial_index == trial_index => t.folds.push(fold),
            _ => trials.push(TrialRecord {
                trial_index,
                trial_seed: num!(6),
                scheme,
                d_prime: num!(7),
                k: num!(8),
                folds: vec![fold],
            }),
        }
    }
    let mut classes: Vec<(i32, String)> = Vec::new();
    let mut entries = Vec::new();
    for (pair, schemes) in pairs {
        for (id, name) in [
            (pair.positive_id, &pair.positive_name),
            (pair.negative_id, &pair.negative_name),
        ] {
            if !classes.iter().any(|(c, _)| *c == id) {
                classes.push((id, name.clone()));
            }
        }
        let records = schemes.into_iter().map(|(_, r)| r).collect();
        entries.push(ExperimentReport::from_records(pair, records)?);
    }
    Ok(SweepReport { classes, entries })
}

/// One row per class pair per scheme.
pub fn report_csv(sweep: &SweepReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "positive_id",
        "positive_name",
        "negative_id",
        "negative_name",
        "scheme",
        "d_prime",
        "k",
        "trials",
        "worst_case_accuracy",
        "mean_accuracy",
        "accuracy_variance",
        "worst_case_mean_of_folds",
        "mean_of_folds_variance",
        "worst_case_pooled",
        "mean_recovery",
        "ground_truth_mean_accuracy",
        "ground_truth_worst_accuracy",
        "non_converged",
    ])
    .expect("in-memory write");
    for e in &sweep.entries {
        for s in &e.schemes {
            w.write_record(&[
                e.pair.positive_id.to_string(),
                e.pair.positive_name.clone(),
                e.pair.negative_id.to_string(),
                e.pair.negative_name.clone(),
                s.scheme.to_string(),
                s.d_prime.to_string(),
                s.k.to_string(),
                s.trials.to_string(),
                s.worst_case_accuracy.to_string(),
                s.mean_accuracy.to_string(),
                s.accuracy_variance.to_string(),
                s.worst_case_mean_of_folds.to_string(),
                s.mean_of_folds_variance.to_string(),
                s.worst_case_pooled.to_string(),
                s.mean_recovery.to_string(),
                s.ground_truth_mean_accuracy.to_string(),
                s.ground_truth_worst_accuracy.to_string(),
                s.non_converged.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

/// `bin_left,count` rows.
pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_left,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{:.2},{c}\n", Histogram::bin_left(i)));
    }
    out
}

fn upper_triangle(
    sweep: &SweepReport,
    title: &str,
    cell: impl Fn(&ExperimentReport) -> Option<String>,
) -> String {
    let names: Vec<&str> = sweep.classes.iter().map(|(_, n)| n.as_str()).collect();
    let mut out = format!("### {title}\n\n| Classes |");
    for n in &names[1..] {
        out.push_str(&format!(" {n} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(names.len() - 1));
    out.push('\n');
    for (i, (a, name)) in sweep.classes[..sweep.classes.len() - 1].iter().enumerate() {
        out.push_str(&format!("| {name} |"));
        for (j, (b, _)) in sweep.classes[1..].iter().enumerate() {
            let text = if j >= i {
                sweep.entry(*a, *b).and_then(&cell).unwrap_or_else(|| "-".into())
            } else {
                String::new()
            };
            out.push_str(&format!(" {text} |"));
        }
        out.push('\n');
    }
    out.push('\n');
    out
}

fn schemes_of(sweep: &SweepReport) -> Vec<Scheme> {
    let mut seen: BTreeMap<Scheme, ()> = BTreeMap::new();
    for e in &sweep.entries {
        for s in &e.schemes {
            seen.insert(s.scheme, ());
        }
    }
    seen.into_keys().collect()
}

/// Pairwise tables: worst-case accuracy, worst-case mean-of-folds accuracy
/// and mean recovery per scheme, then the full-spectrum accuracy.
pub fn markdown_tables(sweep: &SweepReport) -> String {
    let mut out = String::from("# Pairwise results\n\n");
    let lookup = |e: &ExperimentReport, s: Scheme| -> Option<SchemeSummary> { e.scheme(s).cloned() };
    for scheme in schemes_of(sweep) {
        let info = sweep
            .entries
            .iter()
            .find_map(|e| e.scheme(scheme))
            .map(|s| format!("d'={}, k={}, {} trials", s.d_prime, s.k, s.trials))
            .unwrap_or_default();
        out.push_str(&upper_triangle(
            sweep,
            &format!("{scheme}: worst-case accuracy, min over trials and folds ({info})"),
            |e| lookup(e, scheme).map(|s| format!("{:.2}", s.worst_case_accuracy)),
        ));
        out.push_str(&upper_triangle(
            sweep,
            &format!("{scheme}: worst-case accuracy, mean of folds ({info})"),
            |e| lookup(e, scheme).map(|s| format!("{:.2}", s.worst_case_mean_of_folds)),
        ));
        out.push_str(&upper_triangle(
            sweep,
            &format!("{scheme}: average recovery accuracy ({info})"),
            |e| lookup(e, scheme).map(|s| format!("{:.3}", s.mean_recovery)),
        ));
    }
    out.push_str(&upper_triangle(
        sweep,
        "Full-spectrum accuracy, mean over trials and folds",
        |e| e.schemes.first().map(|s| format!("{:.2}", s.ground_truth_mean_accuracy)),
    ));
    let flagged: usize = sweep.entries.iter().map(ExperimentReport::non_converged).sum();
    if flagged > 0 {
        out.push_str(&format!(
            "**{flagged} trial(s) did not converge within max_iterations; see the converged column of trials.csv.**\n"
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{run_experiment, TrialConfig};
    use crate::sensing::MeasurementKind;
    use crate::sketchsvm::LossConfig;
    use crate::solver::SolverConfig;
    use crate::specdata::{synth_gaussian_pair, SplitBalance};

    fn sweep() -> SweepReport {
        let data = synth_gaussian_pair(5, 30, 3.0, 1.0, 4).unwrap();
        let cfg = TrialConfig {
            d_prime: 1,
            k: 5,
            n_train: 20,
            n_test: 20,
            balance: SplitBalance::Balanced,
            kind: MeasurementKind::OrthonormalRows,
            loss: LossConfig::default(),
            loss_ground_truth: LossConfig::default(),
            solver: SolverConfig::default(),
        };
        let e = run_experiment(&data, &[Scheme::Fca, Scheme::Dmd], &cfg, 3, 8).unwrap();
        SweepReport {
            classes: vec![(1, "cloud_a".into()), (2, "cloud_b".into())],
            entries: vec![e],
        }
    }

    #[test]
    fn trials_round_trip_rebuilds_summaries() {
        let s = sweep();
        let text = trials_csv(&s);
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
        let back = parse_trials_csv(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(report_csv(&back), report_csv(&s));
    }

    #[test]
    fn two_class_markdown_is_one_by_one() {
        let md = markdown_tables(&sweep());
        assert!(md.contains("| Classes | cloud_b |"));
        assert!(md.contains("### FCA: worst-case accuracy"));
        assert!(md.contains("### DMD: average recovery accuracy"));
        let rows = md.lines().filter(|l| l.starts_with("| cloud_a |")).count();
        assert_eq!(rows, 7);
    }

    #[test]
    fn histogram_csv_has_all_bins() {
        let h = Histogram::new([0.5, 1.0]);
        let text = histogram_csv(&h);
        assert_eq!(text.lines().count(), 51);
        assert!(text.contains("0.50,1\n"));
        assert!(text.ends_with("0.98,1\n"));
    }
}
