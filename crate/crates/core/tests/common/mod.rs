//! Helpers shared by the integration tests: corpora, a brute-force cluster
//! scan, and reference metric implementations written from the definitions.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::{Path, PathBuf};

use babylon::ingest::{Dataset, LogRecord};
use babylon::metrics::{
    fga, fta_pta_rta, granularity_distances, group_counts, grouping_accuracy, parsing_accuracy, Grouping,
};
use babylon::parse_core::{ClusterId, MatchResult, ParserState, SyntaxToken};
use proptest::prelude::*;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Structured CSVs shipped with the crate, plus any `*_structured.csv` under
/// `$LOGHUB_DIR`.
pub fn structured_files() -> Vec<PathBuf> {
    let mut out = Vec::new();
    collect(&data_dir(), false, &mut out);
    if let Some(dir) = std::env::var_os("LOGHUB_DIR") {
        collect(Path::new(&dir), true, &mut out);
    }
    out.sort();
    out
}

fn collect(dir: &Path, recurse: bool, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            if recurse {
                collect(&path, true, out);
            }
        } else if path.to_string_lossy().ends_with("_structured.csv") {
            out.push(path);
        }
    }
}

/// Cluster classification by scanning every cluster, no tree involved.
pub fn scan_classify(state: &ParserState, tokens: &[String]) -> MatchResult {
    let mut loose: Vec<(ClusterId, usize)> = Vec::new();
    for cluster in state.clusters() {
        let mut best: Option<usize> = None;
        for syntax in cluster.all_syntax() {
            let toks = syntax.tokens();
            if toks.len() != tokens.len() {
                continue;
            }
            let literals = toks.iter().filter(|t| matches!(t, SyntaxToken::Literal(_))).count();
            let agree = toks
                .iter()
                .zip(tokens)
                .filter(|(t, q)| matches!(t, SyntaxToken::Literal(s) if s == *q))
                .count();
            if agree == literals {
                return MatchResult::Strict(cluster.id);
            }
            if agree >= 1 && 2 * agree >= tokens.len() {
                best = best.max(Some(agree));
            }
        }
        if let Some(b) = best {
            loose.push((cluster.id, b));
        }
    }
    if loose.is_empty() {
        return MatchResult::NoMatch;
    }
    loose.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    MatchResult::Loose(loose.into_iter().map(|(id, _)| id).collect())
}

/// Small random corpus: up to `max_templates` templates over a tiny
/// vocabulary, so clusters collide, merge and overlap often.
pub fn corpus_strategy(max_logs: usize, max_templates: usize) -> impl Strategy<Value = Vec<String>> {
    let slot = prop_oneof![
        Just("a".to_string()),
        Just("b".to_string()),
        Just("c".to_string()),
        Just("d".to_string()),
        Just("<v>".to_string()),
    ];
    let template = prop::collection::vec(slot, 1..6);
    let value = prop_oneof![
        Just("7"),
        Just("42"),
        Just("x1"),
        Just("k=v"),
        Just("/tmp"),
        Just("a"),
        Just("e"),
        Just("f"),
    ];
    (
        prop::collection::vec(template, 1..=max_templates),
        prop::collection::vec((any::<prop::sample::Index>(), prop::collection::vec(value, 6)), 1..=max_logs),
    )
        .prop_map(|(templates, picks)| {
            picks
                .into_iter()
                .map(|(which, values)| {
                    let t = which.get(&templates);
                    t.iter()
                        .zip(values)
                        .map(|(w, v)| if w == "<v>" { v.to_string() } else { w.clone() })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect()
        })
}

pub fn dataset_from_lines(name: &str, lines: &[String]) -> Dataset {
    Dataset {
        name: name.into(),
        records: lines
            .iter()
            .enumerate()
            .map(|(i, l)| LogRecord::new(i as u64 + 1, name, l.as_str()).expect("non-blank line"))
            .collect(),
        truth: None,
    }
}

/// Every set partition of `n` elements as a restricted growth string.
pub fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, groups: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=groups {
            cur.push(b);
            go(n, cur, groups.max(b + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), 0, &mut out);
    out
}

/// Relabels a partition into restricted growth form.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// All-pairs merge/split distances between partitions of `n` elements,
/// by breadth-first search over the move graph.
pub struct MoveDistances {
    index: HashMap<Vec<usize>, usize>,
    dist: Vec<Vec<u32>>,
}

impl MoveDistances {
    pub fn new(n: usize) -> Self {
        let all = partitions(n);
        let index: HashMap<Vec<usize>, usize> = all.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let neighbours: Vec<Vec<usize>> = all
            .iter()
            .map(|p| moves(p).into_iter().map(|q| index[&q]).collect())
            .collect();
        let dist = (0..all.len())
            .map(|start| {
                let mut d = vec![u32::MAX; all.len()];
                d[start] = 0;
                let mut queue = VecDeque::from([start]);
                while let Some(u) = queue.pop_front() {
                    for &v in &neighbours[u] {
                        if d[v] == u32::MAX {
                            d[v] = d[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                d
            })
            .collect();
        MoveDistances { index, dist }
    }

    pub fn distance(&self, a: &[usize], b: &[usize]) -> usize {
        self.dist[self.index[&canonical_labels(a)]][self.index[&canonical_labels(b)]] as usize
    }
}

/// Partitions one merge or one split away.
fn moves(p: &[usize]) -> Vec<Vec<usize>> {
    let groups = p.iter().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for a in 0..groups {
        for b in a + 1..groups {
            out.push(canonical_labels(&p.iter().map(|&x| if x == b { a } else { x }).collect::<Vec<_>>()));
        }
        let members: Vec<usize> = (0..p.len()).filter(|&i| p[i] == a).collect();
        for mask in 1..(1u32 << members.len()) - 1 {
            let mut q = p.to_vec();
            for (bit, &m) in members.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    q[m] = groups;
                }
            }
            out.push(canonical_labels(&q));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Reference metrics straight from the definitions, over message indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub ga: f64,
    pub pa: f64,
    pub p_ga: f64,
    pub r_ga: f64,
    pub fga: f64,
    pub pta: f64,
    pub rta: f64,
    pub fta: f64,
    pub ggd: usize,
    pub pgd: usize,
    pub n_g: usize,
    pub n_p: usize,
    pub n_c: usize,
}

fn members(labels: &[usize], label: usize) -> BTreeSet<usize> {
    (0..labels.len()).filter(|&i| labels[i] == label).collect()
}

fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// `parsed_template[g]` is the template of parsed group label `g`; truth
/// group `t` has template `format!("T{t}")`. `ggd` supplies the distance.
pub fn reference(
    parsed: &[usize],
    truth: &[usize],
    parsed_template: &HashMap<usize, String>,
    ggd: usize,
) -> Reference {
    let n = parsed.len();
    let ga_correct = (0..n)
        .filter(|&i| members(parsed, parsed[i]) == members(truth, truth[i]))
        .count();
    let pa_correct = (0..n)
        .filter(|&i| parsed_template[&parsed[i]] == format!("T{}", truth[i]))
        .count();
    let p_labels: BTreeSet<usize> = parsed.iter().copied().collect();
    let t_labels: BTreeSet<usize> = truth.iter().copied().collect();
    let mut n_c = 0;
    let mut templ_correct = 0;
    for &pl in &p_labels {
        let set = members(parsed, pl);
        if let Some(&tl) = t_labels.iter().find(|&&tl| members(truth, tl) == set) {
            n_c += 1;
            if parsed_template[&pl] == format!("T{tl}") {
                templ_correct += 1;
            }
        }
    }
    let fixes = t_labels
        .iter()
        .filter(|&&tl| {
            members(truth, tl)
                .iter()
                .any(|&i| parsed_template[&parsed[i]] != format!("T{tl}"))
        })
        .count();
    let (n_p, n_g) = (p_labels.len(), t_labels.len());
    let (p_ga, r_ga) = (div(n_c, n_p), div(n_c, n_g));
    let (pta, rta) = (div(templ_correct, n_p), div(templ_correct, n_g));
    Reference {
        ga: div(ga_correct, n),
        pa: div(pa_correct, n),
        p_ga,
        r_ga,
        fga: f1(p_ga, r_ga),
        pta,
        rta,
        fta: f1(pta, rta),
        ggd,
        pgd: ggd + fixes,
        n_g,
        n_p,
        n_c,
    }
}

/// Merge/split distance counted from connected components of the
/// "shares a parsed or a truth group" relation.
pub fn component_distance(parsed: &[usize], truth: &[usize]) -> usize {
    let n = parsed.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && (parsed[v] == parsed[u] || truth[v] == truth[u]) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    let groups = |l: &[usize]| l.iter().collect::<BTreeSet<_>>().len();
    groups(parsed) + groups(truth) - 2 * components
}

/// Scores `parsed` against `truth` through the library API.
pub fn library(parsed: &[usize], truth: &[usize], templates: &HashMap<usize, String>) -> Reference {
    let ids = |i: usize| i as u64 + 1;
    let pg = Grouping::from_pairs(parsed.iter().enumerate().map(|(i, l)| (ids(i), format!("p{l}"))));
    let tg = Grouping::from_pairs(truth.iter().enumerate().map(|(i, l)| (ids(i), format!("T{l}"))));
    let by_group: BTreeMap<String, String> = templates.iter().map(|(l, t)| (format!("p{l}"), t.clone())).collect();
    let by_line: BTreeMap<u64, String> = parsed
        .iter()
        .enumerate()
        .map(|(i, l)| (ids(i), templates[l].clone()))
        .collect();
    let (p_ga, r_ga, f) = fga(&pg, &tg).unwrap();
    let (pta, rta, fta) = fta_pta_rta(&by_group, &pg, &tg).unwrap();
    let (ggd, pgd) = granularity_distances(&pg, &by_line, &tg).unwrap();
    let counts = group_counts(&pg, &tg).unwrap();
    Reference {
        ga: grouping_accuracy(&pg, &tg).unwrap(),
        pa: parsing_accuracy(&by_line, &tg).unwrap(),
        p_ga,
        r_ga,
        fga: f,
        pta,
        rta,
        fta,
        ggd,
        pgd,
        n_g: counts.n_g,
        n_p: counts.n_p,
        n_c: counts.n_c,
    }
}

/// Template choices: every parsed group right, or every odd group wrong.
pub fn template_variants(parsed: &[usize], truth: &[usize]) -> Vec<HashMap<usize, String>> {
    let mut right = HashMap::new();
    let mut some_wrong = HashMap::new();
    for (i, &p) in parsed.iter().enumerate() {
        right.entry(p).or_insert_with(|| format!("T{}", truth[i]));
        some_wrong
            .entry(p)
            .or_insert_with(|| if p % 2 == 1 { format!("W{p}") } else { format!("T{}", truth[i]) });
    }
    vec![right, some_wrong]
}

