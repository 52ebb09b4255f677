//! Accuracy metrics for a parse against ground truth.
//!
//! Every metric compares two partitions of the same set of line ids. Truth
//! groups are keyed by their template text; parsed groups by cluster id.
//! Template texts are compared after collapsing whitespace runs and trimming.
//!
//! GGD (group granularity distance) is the fewest merge/split operations
//! turning the parsed partition into the truth partition, where a merge
//! unites two groups and a split cuts one group in two. Each operation moves
//! `|Q| + |T| - 2|Q ∨ T|` by exactly one, and merging up to the join then
//! splitting down reaches that bound, so
//!
//! ```text
//! GGD = |P| + |T| - 2 |P ∨ T|
//! ```
//!
//! where `P ∨ T` is the finest partition that both refine. PGD (parse
//! granularity distance) adds one template fix for each truth group whose
//! members do not all carry its template.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::pipeline::{OutcomeLine, ParseOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("line {0} is in the parse but not in the truth")]
    NotInTruth(u64),
    #[error("line {0} is in the truth but was not parsed")]
    NotParsed(u64),
    #[error("line {0} appears more than once in the parse")]
    Duplicate(u64),
    #[error("line {0} has no parsed template")]
    NoTemplate(u64),
    #[error("dataset carries no ground truth")]
    NoTruth,
}

/// Assignment of each line id to a group key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grouping {
    pub assignment: BTreeMap<u64, String>,
}

impl Grouping {
    pub fn from_pairs<K: Into<String>>(pairs: impl IntoIterator<Item = (u64, K)>) -> Self {
        Grouping {
            assignment: pairs.into_iter().map(|(id, k)| (id, k.into())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Member sets, keyed by group.
    pub fn groups(&self) -> BTreeMap<&str, BTreeSet<u64>> {
        let mut out: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
        for (id, key) in &self.assignment {
            out.entry(key.as_str()).or_default().insert(*id);
        }
        out
    }
}

pub fn canonical(template: &str) -> String {
    template.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn check_cover<V>(parsed: &BTreeMap<u64, V>, truth: &Grouping) -> Result<(), CoverageError> {
    if let Some(id) = parsed.keys().find(|id| !truth.assignment.contains_key(id)) {
        return Err(CoverageError::NotInTruth(*id));
    }
    if let Some(id) = truth.assignment.keys().find(|id| !parsed.contains_key(id)) {
        return Err(CoverageError::NotParsed(*id));
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2pr / (p + r)`, or 0 when both are 0.
pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Share of lines whose parsed group has exactly the members of their truth group.
pub fn grouping_accuracy(parsed: &Grouping, truth: &Grouping) -> Result<f64, CoverageError> {
    check_cover(&parsed.assignment, truth)?;
    let pg = parsed.groups();
    let tg = truth.groups();
    let correct = parsed
        .assignment
        .iter()
        .filter(|(id, key)| pg[key.as_str()] == tg[truth.assignment[*id].as_str()])
        .count();
    Ok(ratio(correct, parsed.len()))
}

/// Share of lines whose parsed template equals their truth template.
/// Truth keys are the templates themselves.
pub fn parsing_accuracy(parsed_templates: &BTreeMap<u64, String>, truth: &Grouping) -> Result<f64, CoverageError> {
    check_cover(parsed_templates, truth)?;
    let correct = parsed_templates
        .iter()
        .filter(|(id, t)| canonical(t) == canonical(&truth.assignment[*id]))
        .count();
    Ok(ratio(correct, parsed_templates.len()))
}

/// Group counts behind FGA: truth groups, parsed groups, exact matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub n_g: usize,
    pub n_p: usize,
    pub n_c: usize,
}

pub fn group_counts(parsed: &Grouping, truth: &Grouping) -> Result<GroupCounts, CoverageError> {
    check_cover(&parsed.assignment, truth)?;
    let truth_sets: BTreeSet<BTreeSet<u64>> = truth.groups().into_values().collect();
    let pg = parsed.groups();
    Ok(GroupCounts {
        n_g: truth_sets.len(),
        n_p: pg.len(),
        n_c: pg.values().filter(|s| truth_sets.contains(*s)).count(),
    })
}

/// `(precision, recall, f1)` over groups.
pub fn fga(parsed: &Grouping, truth: &Grouping) -> Result<(f64, f64, f64), CoverageError> {
    let c = group_counts(parsed, truth)?;
    let p = ratio(c.n_c, c.n_p);
    let r = ratio(c.n_c, c.n_g);
    Ok((p, r, harmonic_mean(p, r)))
}

/// Parsed groups whose members and template both match a truth group.
fn correct_templates(
    parsed_templates: &BTreeMap<String, String>,
    parsed: &Grouping,
    truth: &Grouping,
) -> Result<usize, CoverageError> {
    check_cover(&parsed.assignment, truth)?;
    let tg = truth.groups();
    let truth_by_set: BTreeMap<&BTreeSet<u64>, &str> = tg.iter().map(|(k, s)| (s, *k)).collect();
    let mut correct = 0;
    for (key, members) in parsed.groups() {
        let Some(truth_template) = truth_by_set.get(&members) else {
            continue;
        };
        let template = parsed_templates
            .get(key)
            .ok_or_else(|| CoverageError::NoTemplate(*members.first().expect("groups are non-empty")))?;
        if canonical(template) == canonical(truth_template) {
            correct += 1;
        }
    }
    Ok(correct)
}

/// `(pta, rta, fta)`. `parsed_templates` maps each parsed group key to its template.
pub fn fta_pta_rta(
    parsed_templates: &BTreeMap<String, String>,
    parsed: &Grouping,
    truth: &Grouping,
) -> Result<(f64, f64, f64), CoverageError> {
    let correct = correct_templates(parsed_templates, parsed, truth)?;
    let c = group_counts(parsed, truth)?;
    let pta = ratio(correct, c.n_p);
    let rta = ratio(correct, c.n_g);
    Ok((pta, rta, harmonic_mean(pta, rta)))
}

/// Number of blocks in the join of two partitions over the same ids.
fn join_size(parsed: &Grouping, truth: &Grouping) -> usize {
    // union-find over group keys; parsed and truth keys live in separate ranges
    let pkeys: BTreeMap<&str, usize> = parsed.groups().keys().enumerate().map(|(i, k)| (*k, i)).collect();
    let tkeys: BTreeMap<&str, usize> = truth
        .groups()
        .keys()
        .enumerate()
        .map(|(i, k)| (*k, i + pkeys.len()))
        .collect();
    let mut parent: Vec<usize> = (0..pkeys.len() + tkeys.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut blocks = parent.len();
    for (id, pk) in &parsed.assignment {
        let a = find(&mut parent, pkeys[pk.as_str()]);
        let b = find(&mut parent, tkeys[truth.assignment[id].as_str()]);
        if a != b {
            parent[a] = b;
            blocks -= 1;
        }
    }
    blocks
}

/// `(ggd, pgd)`. `parsed_templates` maps each line to its parsed template.
pub fn granularity_distances(
    parsed: &Grouping,
    parsed_templates: &BTreeMap<u64, String>,
    truth: &Grouping,
) -> Result<(usize, usize), CoverageError> {
    check_cover(&parsed.assignment, truth)?;
    check_cover(parsed_templates, truth)?;
    let n_p = parsed.groups().len();
    let tg = truth.groups();
    let ggd = n_p + tg.len() - 2 * join_size(parsed, truth);
    let fixes = tg
        .iter()
        .filter(|(template, members)| {
            let want = canonical(template);
            members.iter().any(|id| canonical(&parsed_templates[id]) != want)
        })
        .count();
    Ok((ggd, ggd + fixes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ga: f64,
    pub pa: f64,
    pub fga: f64,
    pub fta: f64,
    pub pta: f64,
    pub rta: f64,
    pub ggd: usize,
    pub pgd: usize,
    pub n_g: usize,
    pub n_p: usize,
    pub n_c: usize,
}

impl MetricsReport {
    /// Clustering accuracy, the same quantity as GA.
    pub fn ca(&self) -> f64 {
        self.ga
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table: GA, PA, FGA, FTA, GGD, PGD.
    pub fn table(&self, dataset: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "Dataset", "GA", "PA", "FGA", "FTA", "GGD", "PGD"
        );
        let _ = writeln!(
            out,
            "{:<16} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7} {:>7}",
            dataset, self.ga, self.pa, self.fga, self.fta, self.ggd, self.pgd
        );
        out
    }
}

/// Builds the groupings for a parse and scores it.
///
/// Each cluster is judged by the template of its last outcome, which is the
/// template it carried when the stream ended.
pub fn evaluate(outcomes: &[OutcomeLine], dataset: &Dataset) -> Result<MetricsReport, CoverageError> {
    let truth_entries = dataset.truth.as_ref().ok_or(CoverageError::NoTruth)?;
    let truth = Grouping::from_pairs(truth_entries.iter().map(|e| (e.line_id, canonical(&e.event_template))));

    let mut parsed = Grouping::default();
    let mut cluster_templates: BTreeMap<String, String> = BTreeMap::new();
    for o in outcomes {
        let key = o.cluster_id.0.to_string();
        if parsed.assignment.insert(o.line_id, key.clone()).is_some() {
            return Err(CoverageError::Duplicate(o.line_id));
        }
        cluster_templates.insert(key, o.template.clone());
    }
    let line_templates: BTreeMap<u64, String> = parsed
        .assignment
        .iter()
        .map(|(id, key)| (*id, cluster_templates[key].clone()))
        .collect();

    let ga = grouping_accuracy(&parsed, &truth)?;
    let pa = parsing_accuracy(&line_templates, &truth)?;
    let counts = group_counts(&parsed, &truth)?;
    let (_, _, fga) = fga(&parsed, &truth)?;
    let (pta, rta, fta) = fta_pta_rta(&cluster_templates, &parsed, &truth)?;
    let (ggd, pgd) = granularity_distances(&parsed, &line_templates, &truth)?;
    Ok(MetricsReport {
        ga,
        pa,
        fga,
        fta,
        pta,
        rta,
        ggd,
        pgd,
        n_g: counts.n_g,
        n_p: counts.n_p,
        n_c: counts.n_c,
    })
}

pub fn evaluate_outcomes(outcomes: &[ParseOutcome], dataset: &Dataset) -> Result<MetricsReport, CoverageError> {
    let lines: Vec<OutcomeLine> = outcomes.iter().map(OutcomeLine::from).collect();
    evaluate(&lines, dataset)
}

#[cfg(test)]
mod tests {
    use std::collections::{HashSet, VecDeque};

    use super::*;
    use crate::ingest::{GroundTruthEntry, LogRecord};

    fn grouping(groups: &[&[u64]]) -> Grouping {
        Grouping::from_pairs(
            groups
                .iter()
                .enumerate()
                .flat_map(|(g, ids)| ids.iter().map(move |id| (*id, format!("g{g}")))),
        )
    }

    fn templates_by_line(g: &Grouping, t: &[&str]) -> BTreeMap<u64, String> {
        g.assignment
            .iter()
            .map(|(id, k)| (*id, t[k[1..].parse::<usize>().unwrap()].to_owned()))
            .collect()
    }

    #[test]
    fn ga_examples() {
        let truth = grouping(&[&[1, 2], &[3, 4]]);
        assert_eq!(grouping_accuracy(&truth, &truth).unwrap(), 1.0);
        assert_eq!(grouping_accuracy(&grouping(&[&[1, 2], &[3], &[4]]), &truth).unwrap(), 0.5);
        assert_eq!(grouping_accuracy(&grouping(&[&[1, 2, 3, 4]]), &truth).unwrap(), 0.0);
    }

    #[test]
    fn coverage_mismatch() {
        let truth = grouping(&[&[1, 2]]);
        assert_eq!(
            grouping_accuracy(&grouping(&[&[1]]), &truth),
            Err(CoverageError::NotParsed(2))
        );
        assert_eq!(
            grouping_accuracy(&grouping(&[&[1, 2, 7]]), &truth),
            Err(CoverageError::NotInTruth(7))
        );
    }

    #[test]
    fn pa_examples() {
        let truth = Grouping::from_pairs([(1, "a <*>"), (2, "a <*>"), (3, "b"), (4, "c")]);
        let exact: BTreeMap<u64, String> = truth.assignment.clone();
        assert_eq!(parsing_accuracy(&exact, &truth).unwrap(), 1.0);
        let mut three = exact.clone();
        three.insert(4, "d".into());
        assert_eq!(parsing_accuracy(&three, &truth).unwrap(), 0.75);
        let mut spaced = exact;
        spaced.insert(1, "a  <*>".into());
        assert_eq!(parsing_accuracy(&spaced, &truth).unwrap(), 1.0);
    }

    #[test]
    fn fga_examples() {
        let truth = grouping(&[&[1, 2], &[3, 4]]);
        let parsed = grouping(&[&[1, 2], &[3], &[4]]);
        let (p, r, f) = fga(&parsed, &truth).unwrap();
        assert_eq!((p, r), (1.0 / 3.0, 0.5));
        assert!((f - 0.4).abs() < 1e-12);
        assert_eq!(fga(&truth, &truth).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(fga(&grouping(&[&[1, 3], &[2, 4]]), &truth).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fta_examples() {
        let truth = Grouping::from_pairs([(1, "A"), (2, "A"), (3, "B"), (4, "B")]);
        let parsed = grouping(&[&[1, 2], &[3, 4]]);
        let good: BTreeMap<String, String> = [("g0".into(), "A".into()), ("g1".into(), "B".into())].into();
        assert_eq!(fta_pta_rta(&good, &parsed, &truth).unwrap(), (1.0, 1.0, 1.0));
        let one_wrong: BTreeMap<String, String> = [("g0".into(), "A".into()), ("g1".into(), "X".into())].into();
        assert_eq!(fta_pta_rta(&one_wrong, &parsed, &truth).unwrap(), (0.5, 0.5, 0.5));
        let swapped = grouping(&[&[1, 3], &[2, 4]]);
        assert_eq!(fta_pta_rta(&good, &swapped, &truth).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn granularity_examples() {
        let truth = Grouping::from_pairs([(1, "A"), (2, "A"), (3, "B"), (4, "B")]);
        let same = grouping(&[&[1, 2], &[3, 4]]);
        let exact = templates_by_line(&same, &["A", "B"]);
        assert_eq!(granularity_distances(&same, &exact, &truth).unwrap(), (0, 0));

        // one split, and each half already carries its template
        let whole = grouping(&[&[1, 2, 3, 4]]);
        assert_eq!(granularity_distances(&whole, &exact, &truth).unwrap(), (1, 1));

        let truth = Grouping::from_pairs([(1, "A"), (2, "A")]);
        let parts = grouping(&[&[1], &[2]]);
        let wrong = templates_by_line(&parts, &["A", "Z"]);
        // one merge plus one template fix
        assert_eq!(granularity_distances(&parts, &wrong, &truth).unwrap(), (1, 2));
    }

    #[test]
    fn crossing_partitions_go_through_the_join() {
        // refining to singletons would take 4 steps; merge then split takes 2
        let truth = grouping(&[&[1, 3], &[2, 4]]);
        let parsed = grouping(&[&[1, 2], &[3, 4]]);
        let t = templates_by_line(&parsed, &["g0", "g1"]);
        assert_eq!(granularity_distances(&parsed, &t, &truth).unwrap().0, 2);
    }

    /// Breadth-first search over merge/split moves.
    fn bfs_distance(from: &[BTreeSet<u64>], to: &[BTreeSet<u64>]) -> usize {
        type P = BTreeSet<BTreeSet<u64>>;
        let start: P = from.iter().cloned().collect();
        let goal: P = to.iter().cloned().collect();
        let mut seen: HashSet<P> = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([(start, 0)]);
        while let Some((p, d)) = queue.pop_front() {
            if p == goal {
                return d;
            }
            let blocks: Vec<&BTreeSet<u64>> = p.iter().collect();
            let mut next = Vec::new();
            for i in 0..blocks.len() {
                for j in i + 1..blocks.len() {
                    let mut q = p.clone();
                    q.remove(blocks[i]);
                    q.remove(blocks[j]);
                    q.insert(blocks[i] | blocks[j]);
                    next.push(q);
                }
                let members: Vec<u64> = blocks[i].iter().copied().collect();
                // proper non-empty subsets containing the first member
                for mask in 0..(1u32 << (members.len() - 1)) {
                    let mut a = BTreeSet::from([members[0]]);
                    for (bit, m) in members[1..].iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            a.insert(*m);
                        }
                    }
                    if a.len() == members.len() {
                        continue;
                    }
                    let b: BTreeSet<u64> = blocks[i] - &a;
                    let mut q = p.clone();
                    q.remove(blocks[i]);
                    q.insert(a);
                    q.insert(b);
                    next.push(q);
                }
            }
            for q in next {
                if seen.insert(q.clone()) {
                    queue.push_back((q, d + 1));
                }
            }
        }
        unreachable!("partitions of the same set are connected")
    }

    /// Every set partition of `1..=n` as a restricted growth string.
    fn partitions(n: usize) -> Vec<Vec<usize>> {
        fn go(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                out.push(cur.clone());
                return;
            }
            for b in 0..=max + 1 {
                cur.push(b);
                go(i + 1, n, cur, max.max(b), out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            out.push(Vec::new());
        } else {
            go(1, n, &mut vec![0], 0, &mut out);
        }
        out
    }

    #[test]
    fn ggd_matches_search_on_four_elements() {
        let all = partitions(4);
        assert_eq!(all.len(), 15);
        for p in &all {
            for t in &all {
                let pg = Grouping::from_pairs(p.iter().enumerate().map(|(i, b)| (i as u64 + 1, b.to_string())));
                let tg = Grouping::from_pairs(t.iter().enumerate().map(|(i, b)| (i as u64 + 1, b.to_string())));
                let tpl: BTreeMap<u64, String> = tg.assignment.clone();
                let (ggd, pgd) = granularity_distances(&pg, &tpl, &tg).unwrap();
                let sets = |g: &Grouping| g.groups().into_values().collect::<Vec<_>>();
                assert_eq!(ggd, bfs_distance(&sets(&pg), &sets(&tg)), "{p:?} -> {t:?}");
                assert_eq!(pgd, ggd);
            }
        }
    }

    fn dataset(truth: &[(u64, &str)]) -> Dataset {
        Dataset {
            name: "t".into(),
            records: truth
                .iter()
                .map(|(id, t)| LogRecord::new(*id, "t", *t).unwrap())
                .collect(),
            truth: Some(
                truth
                    .iter()
                    .map(|(id, t)| GroundTruthEntry {
                        line_id: *id,
                        content: (*t).into(),
                        event_id: String::new(),
                        event_template: (*t).into(),
                    })
                    .collect(),
            ),
        }
    }

    fn outcome(line_id: u64, cluster: u64, template: &str) -> OutcomeLine {
        OutcomeLine {
            line_id,
            cluster_id: crate::parse_core::ClusterId(cluster),
            template: template.into(),
            action: crate::pipeline::Action::Created,
        }
    }

    #[test]
    fn evaluate_fixture() {
        let ds = dataset(&[(1, "A"), (2, "A"), (3, "B"), (4, "B")]);
        let outcomes = vec![outcome(1, 1, "A"), outcome(2, 1, "A"), outcome(3, 2, "B"), outcome(4, 3, "B")];
        let r = evaluate(&outcomes, &ds).unwrap();
        assert_eq!(r.ga, 0.5);
        assert!((r.fga - 0.4).abs() < 1e-12);
        assert_eq!((r.n_g, r.n_p, r.n_c), (2, 3, 1));
        assert_eq!(r.ca(), r.ga);
        assert_eq!(r.ggd, 1);

        let table = r.table("fixture");
        let header = table.lines().next().unwrap();
        let cols: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(cols, ["Dataset", "GA", "PA", "FGA", "FTA", "GGD", "PGD"]);
    }

    #[test]
    fn evaluate_uses_final_cluster_template() {
        let ds = dataset(&[(1, "User <*> login"), (2, "User <*> login")]);
        let outcomes = vec![outcome(1, 1, "User alice login"), outcome(2, 1, "User <*> login")];
        let r = evaluate(&outcomes, &ds).unwrap();
        assert_eq!((r.ga, r.pa, r.fta, r.pgd), (1.0, 1.0, 1.0, 0));
    }

    #[test]
    fn evaluate_empty_and_errors() {
        let r = evaluate(&[], &dataset(&[])).unwrap();
        assert_eq!((r.ga, r.fga, r.n_g, r.n_p, r.n_c, r.ggd), (0.0, 0.0, 0, 0, 0, 0));
        let ds = dataset(&[(1, "A")]);
        assert_eq!(
            evaluate(&[outcome(1, 1, "A"), outcome(1, 1, "A")], &ds),
            Err(CoverageError::Duplicate(1))
        );
        let mut no_truth = ds;
        no_truth.truth = None;
        assert_eq!(evaluate(&[], &no_truth), Err(CoverageError::NoTruth));
    }
}
