//! Title normalization and institute-name resolution.
//!
//! Resolution runs a fixed cascade: exact match on a canonical name or
//! alias, then a cache of earlier resolutions, then the best candidate by
//! the quadratic mean of several Levenshtein ratios.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Cell, InstituteEntry, PaperRecord, Table};

/// Lowercases, replaces every non-alphanumeric character with a space and
/// collapses whitespace. Letters from any script are kept.
pub fn normalize_title(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn ratio_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len()).max(1);
    1.0 - levenshtein_chars(a, b) as f64 / longest as f64
}

fn sorted_tokens(s: &str) -> String {
    let mut tokens: Vec<&str> = s.split(' ').filter(|t| !t.is_empty()).collect();
    tokens.sort_unstable();
    tokens.join(" ")
}

/// Similarity of the two strings after sorting their space-separated tokens.
pub fn token_sort_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = sorted_tokens(a).chars().collect();
    let b: Vec<char> = sorted_tokens(b).chars().collect();
    ratio_chars(&a, &b)
}

/// Best similarity of the shorter string against every equal-length window
/// of the longer one. An empty pattern scores 1.
pub fn partial_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    if short.is_empty() {
        return 1.0;
    }
    let n = short.len() as f64;
    let mut best_dist = usize::MAX;
    for window in long.windows(short.len()) {
        best_dist = best_dist.min(levenshtein_chars(short, window));
        if best_dist == 0 {
            break;
        }
    }
    1.0 - best_dist as f64 / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioAlgorithm {
    TokenSortRatio,
    PartialRatio,
}

impl RatioAlgorithm {
    pub fn score(self, a: &str, b: &str) -> f64 {
        match self {
            RatioAlgorithm::TokenSortRatio => token_sort_ratio(a, b),
            RatioAlgorithm::PartialRatio => partial_ratio(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Equal scores go to the lexicographically smallest registry id.
    #[default]
    SmallestRegistryId,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkageError {
    #[error("fuzzy matching needs at least one ratio algorithm")]
    NoAlgorithms,
    #[error("min_accept_score {0} is outside [0, 1]")]
    AcceptScore(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzyMatchConfig {
    pub algorithms: Vec<RatioAlgorithm>,
    pub min_accept_score: f64,
    pub tie_break: TieBreak,
}

impl Default for FuzzyMatchConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![RatioAlgorithm::TokenSortRatio, RatioAlgorithm::PartialRatio],
            min_accept_score: 0.75,
            tie_break: TieBreak::SmallestRegistryId,
        }
    }
}

impl FuzzyMatchConfig {
    pub fn validate(&self) -> Result<(), LinkageError> {
        if self.algorithms.is_empty() {
            return Err(LinkageError::NoAlgorithms);
        }
        if !(0.0..=1.0).contains(&self.min_accept_score) {
            return Err(LinkageError::AcceptScore(self.min_accept_score));
        }
        Ok(())
    }
}

/// Quadratic mean of the individual ratio scores: sqrt(Σ F²) / sqrt(N).
pub fn combine_scores(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = scores.iter().map(|f| f * f).sum();
    (sum_sq / scores.len() as f64).sqrt()
}

pub fn convolved_score(query: &str, candidate: &str, cfg: &FuzzyMatchConfig) -> f64 {
    let scores: Vec<f64> = cfg.algorithms.iter().map(|a| a.score(query, candidate)).collect();
    combine_scores(&scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Exact,
    Cached,
    Fuzzy,
    None,
}

impl MatchMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMethod::Exact => "exact",
            MatchMethod::Cached => "cached",
            MatchMethod::Fuzzy => "fuzzy",
            MatchMethod::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub query_name: String,
    pub matched_id: Option<String>,
    /// For `None` results this is the best score seen, kept for diagnostics.
    pub score: f64,
    pub method: MatchMethod,
}

/// Earlier resolutions keyed by normalized query.
#[derive(Debug, Clone, Default)]
pub struct MatchCache {
    entries: HashMap<String, MatchResult>,
}

impl MatchCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, normalized: &str) -> Option<&MatchResult> {
        self.entries.get(normalized)
    }

    /// First write wins.
    fn insert(&mut self, normalized: String, result: MatchResult) {
        self.entries.entry(normalized).or_insert(result);
    }
}

/// Registry with pre-normalized names, sorted by registry id.
#[derive(Debug, Clone)]
pub struct RegistryIndex<'a> {
    entries: Vec<(&'a InstituteEntry, Vec<String>)>,
    exact: HashMap<String, usize>,
}

impl<'a> RegistryIndex<'a> {
    pub fn new(registry: &'a [InstituteEntry]) -> Self {
        let mut entries: Vec<_> = registry
            .iter()
            .map(|e| (e, e.names().map(normalize_title).filter(|n| !n.is_empty()).collect::<Vec<_>>()))
            .collect();
        entries.sort_by(|a, b| a.0.registry_id.cmp(&b.0.registry_id));
        let mut exact = HashMap::new();
        for (idx, (_, names)) in entries.iter().enumerate() {
            for n in names {
                // entries are id-sorted, so the first insert is the smallest id
                exact.entry(n.clone()).or_insert(idx);
            }
        }
        Self { entries, exact }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, registry_id: &str) -> Option<&'a InstituteEntry> {
        self.entries
            .binary_search_by(|(e, _)| e.registry_id.as_str().cmp(registry_id))
            .ok()
            .map(|i| self.entries[i].0)
    }

    fn exact(&self, normalized: &str) -> Option<&'a InstituteEntry> {
        self.exact.get(normalized).map(|&i| self.entries[i].0)
    }

    /// Highest-scoring entry over all names; ties keep the earlier (smaller)
    /// id because only strictly greater scores replace the incumbent.
    fn best_fuzzy(&self, normalized: &str, cfg: &FuzzyMatchConfig) -> Option<(&'a InstituteEntry, f64)> {
        let mut best: Option<(&InstituteEntry, f64)> = None;
        for (entry, names) in &self.entries {
            let score = names
                .iter()
                .map(|n| convolved_score(normalized, n, cfg))
                .fold(f64::NEG_INFINITY, f64::max);
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((entry, score));
            }
        }
        best
    }
}

pub fn match_institute(
    name: &str,
    registry: &RegistryIndex<'_>,
    cache: &mut MatchCache,
    cfg: &FuzzyMatchConfig,
) -> MatchResult {
    let normalized = normalize_title(name);
    if let Some(entry) = registry.exact(&normalized) {
        return MatchResult {
            query_name: name.to_string(),
            matched_id: Some(entry.registry_id.clone()),
            score: 1.0,
            method: MatchMethod::Exact,
        };
    }
    if let Some(hit) = cache.get(&normalized) {
        return MatchResult {
            query_name: name.to_string(),
            matched_id: hit.matched_id.clone(),
            score: hit.score,
            method: if hit.matched_id.is_some() { MatchMethod::Cached } else { MatchMethod::None },
        };
    }
    let result = match registry.best_fuzzy(&normalized, cfg) {
        Some((entry, score)) if score >= cfg.min_accept_score => MatchResult {
            query_name: name.to_string(),
            matched_id: Some(entry.registry_id.clone()),
            score,
            method: MatchMethod::Fuzzy,
        },
        best => MatchResult {
            query_name: name.to_string(),
            matched_id: None,
            score: best.map_or(0.0, |(_, s)| s.max(0.0)),
            method: MatchMethod::None,
        },
    };
    cache.insert(normalized, result.clone());
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedPaper {
    pub paper: PaperRecord,
    /// Distinct matched registry ids, sorted.
    pub registry_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    /// Matched affiliations / all affiliations; `None` with no affiliations.
    pub match_rate: Option<f64>,
    pub counts_by_method: BTreeMap<String, usize>,
    /// Ten equal-width score bins over [0, 1]; the last bin includes 1.
    pub score_histogram: Vec<usize>,
    /// Distinct (paper, institute) pairs.
    pub paper_institute_pairs: usize,
    pub min_accept_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutput {
    pub papers: Vec<LinkedPaper>,
    /// One result per affiliation occurrence, in corpus order.
    pub matches: Vec<MatchResult>,
    pub report: LinkReport,
}

pub fn link_corpus(papers: &[PaperRecord], registry: &[InstituteEntry], cfg: &FuzzyMatchConfig) -> LinkOutput {
    let index = RegistryIndex::new(registry);
    let mut cache = MatchCache::new();
    let mut matches = Vec::new();
    let mut linked = Vec::with_capacity(papers.len());
    for paper in papers {
        let mut ids = Vec::new();
        for aff in &paper.affiliations {
            let m = match_institute(aff, &index, &mut cache, cfg);
            if let Some(id) = &m.matched_id {
                ids.push(id.clone());
            }
            matches.push(m);
        }
        ids.sort();
        ids.dedup();
        linked.push(LinkedPaper {
            paper: paper.clone(),
            registry_ids: ids,
        });
    }

    let mut counts_by_method: BTreeMap<String, usize> =
        [MatchMethod::Exact, MatchMethod::Cached, MatchMethod::Fuzzy, MatchMethod::None]
            .iter()
            .map(|m| (m.as_str().to_string(), 0))
            .collect();
    let mut histogram = vec![0usize; 10];
    for m in &matches {
        *counts_by_method.get_mut(m.method.as_str()).unwrap() += 1;
        let bin = ((m.score * 10.0).floor() as usize).min(9);
        histogram[bin] += 1;
    }
    let matched = matches.iter().filter(|m| m.matched_id.is_some()).count();
    let match_rate = (!matches.is_empty()).then(|| matched as f64 / matches.len() as f64);
    let report = LinkReport {
        match_rate,
        counts_by_method,
        score_histogram: histogram,
        paper_institute_pairs: linked.iter().map(|p| p.registry_ids.len()).sum(),
        min_accept_score: cfg.min_accept_score,
    };
    LinkOutput {
        papers: linked,
        matches,
        report,
    }
}

/// Link report rows: query_name, matched_id, score, method.
pub fn match_table(matches: &[MatchResult]) -> Table {
    let mut t = Table::new(&["query_name", "matched_id", "score", "method"]);
    for m in matches {
        t.push(vec![
            Cell::text(&m.query_name),
            m.matched_id.as_ref().map_or(Cell::Null, Cell::text),
            Cell::Float(m.score),
            Cell::text(m.method.as_str()),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use proptest::prelude::*;

    /// Full-matrix recursion, independent of the two-row implementation.
    fn lev_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    fn inst(id: &str, name: &str, aliases: &[&str]) -> InstituteEntry {
        InstituteEntry {
            registry_id: id.into(),
            canonical_name: name.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
            location: GeoPoint::new(0.0, 0.0),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_title("Playing Atari, with Deep-RL!"), "playing atari with deep rl");
        assert_eq!(normalize_title(""), "");
        assert_eq!(normalize_title("α—β   Pruning"), "α β pruning");
        assert_eq!(normalize_title("  --  "), "");
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(lev_oracle("kitten", "sitting"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
    }

    #[test]
    fn token_sort_examples() {
        assert_eq!(token_sort_ratio("mit media lab", "media lab mit"), 1.0);
        assert_eq!(token_sort_ratio("oxford", "oxford"), 1.0);
        let expected = 1.0 - lev_oracle("oxford uni", "oxford university") as f64 / 17.0;
        assert_eq!(token_sort_ratio("oxford uni", "oxford university"), expected);
        assert_eq!(expected, 1.0 - 7.0 / 17.0);
    }

    #[test]
    fn partial_ratio_examples() {
        assert_eq!(partial_ratio("oxford", "university of oxford"), 1.0);
        assert_eq!(partial_ratio("university of oxford", "oxford"), 1.0);
        assert_eq!(partial_ratio("abc", "abc"), 1.0);
        assert!((partial_ratio("abc", "axc") - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(partial_ratio("", "anything"), 1.0);
    }

    #[test]
    fn convolved_examples() {
        assert!((combine_scores(&[0.6, 0.8]) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(combine_scores(&[1.0, 1.0]), 1.0);
        assert_eq!(combine_scores(&[0.0, 0.0]), 0.0);
        let cfg = FuzzyMatchConfig::default();
        assert_eq!(convolved_score("imperial college", "imperial college", &cfg), 1.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FuzzyMatchConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.min_accept_score = 1.5;
        assert_eq!(cfg.validate(), Err(LinkageError::AcceptScore(1.5)));
        cfg.algorithms.clear();
        assert_eq!(cfg.validate(), Err(LinkageError::NoAlgorithms));
    }

    #[test]
    fn alias_is_exact_match() {
        let reg = [inst("grid.2", "Massachusetts Institute of Technology", &["MIT"])];
        let index = RegistryIndex::new(&reg);
        let mut cache = MatchCache::new();
        let r = match_institute("M.I.T", &index, &mut cache, &FuzzyMatchConfig::default());
        // "m i t" is not "mit"
        assert_ne!(r.method, MatchMethod::Exact);
        let r = match_institute("mit", &index, &mut cache, &FuzzyMatchConfig::default());
        assert_eq!(r.method, MatchMethod::Exact);
        assert_eq!(r.score, 1.0);
        assert_eq!(r.matched_id.as_deref(), Some("grid.2"));
    }

    #[test]
    fn second_lookup_is_cached() {
        let reg = [inst("g1", "University of Oxford", &[]), inst("g2", "Oxford Brookes University", &[])];
        let index = RegistryIndex::new(&reg);
        let mut cache = MatchCache::new();
        let cfg = FuzzyMatchConfig::default();
        let first = match_institute("University of Oxfrod", &index, &mut cache, &cfg);
        assert_eq!(first.method, MatchMethod::Fuzzy);
        assert_eq!(first.matched_id.as_deref(), Some("g1"));
        let second = match_institute("university  of oxfrod", &index, &mut cache, &cfg);
        assert_eq!(second.method, MatchMethod::Cached);
        assert_eq!(second.matched_id, first.matched_id);
        assert_eq!(second.score, first.score);
    }

    #[test]
    fn fuzzy_argmax_matches_exhaustive_scoring() {
        let reg = [inst("g1", "University of Oxford", &[]), inst("g2", "Oxford Brookes University", &[])];
        // accept anything so the argmax itself is observable
        let cfg = FuzzyMatchConfig {
            min_accept_score: 0.0,
            ..Default::default()
        };
        let q = "oxford university";
        let oracle: Vec<(f64, &str)> = reg
            .iter()
            .map(|e| {
                let n = normalize_title(&e.canonical_name);
                let f = [token_sort_ratio(q, &n), partial_ratio(q, &n)];
                (((f[0] * f[0] + f[1] * f[1]) / 2.0).sqrt(), e.registry_id.as_str())
            })
            .collect();
        let best = oracle.iter().cloned().fold((f64::NEG_INFINITY, ""), |acc, x| if x.0 > acc.0 { x } else { acc });
        let index = RegistryIndex::new(&reg);
        let r = match_institute(q, &index, &mut MatchCache::new(), &cfg);
        assert_eq!(r.matched_id.as_deref(), Some(best.1));
        assert_eq!(r.score, best.0);
        // the short query is a poor window of "university of oxford"
        assert_eq!(best.1, "g2");
        let strict = match_institute(q, &index, &mut MatchCache::new(), &FuzzyMatchConfig::default());
        assert_eq!(strict.method, MatchMethod::None);
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let reg = [inst("b", "Alpha Institute", &[]), inst("a", "Alpha Institute", &[])];
        let index = RegistryIndex::new(&reg);
        let cfg = FuzzyMatchConfig::default();
        let exact = match_institute("alpha institute", &index, &mut MatchCache::new(), &cfg);
        assert_eq!(exact.matched_id.as_deref(), Some("a"));
        let fuzzy = match_institute("alpha institut", &index, &mut MatchCache::new(), &cfg);
        assert_eq!(fuzzy.method, MatchMethod::Fuzzy);
        assert_eq!(fuzzy.matched_id.as_deref(), Some("a"));
    }

    #[test]
    fn unmatchable_is_none() {
        let reg = [inst("g1", "University of Oxford", &[])];
        let index = RegistryIndex::new(&reg);
        let r = match_institute("Zzyzx Qwerty Labs", &index, &mut MatchCache::new(), &FuzzyMatchConfig::default());
        assert_eq!(r.method, MatchMethod::None);
        assert!(r.matched_id.is_none());
        assert!(r.score < 0.75);
    }

    fn paper(id: &str, affs: &[&str]) -> PaperRecord {
        PaperRecord {
            id: id.into(),
            title: String::new(),
            abstract_text: String::new(),
            subjects: ["cs.LG".to_string()].into(),
            pub_year: 2015,
            citations: 0,
            affiliations: affs.iter().map(|s| s.to_string()).collect(),
            resolved_regions: None,
        }
    }

    #[test]
    fn link_rates() {
        let reg = [inst("g1", "University of Oxford", &["Oxford"]), inst("g2", "Stanford University", &[])];
        let all_exact: Vec<_> = (0..3).map(|i| paper(&i.to_string(), &["Stanford University"])).collect();
        let out = link_corpus(&all_exact, &reg, &FuzzyMatchConfig::default());
        assert_eq!(out.report.match_rate, Some(1.0));

        let out = link_corpus(&[], &reg, &FuzzyMatchConfig::default());
        assert_eq!(out.report.match_rate, None);
        assert!(out.papers.is_empty());

        let mut ten: Vec<_> = (0..8).map(|i| paper(&i.to_string(), &["university of oxford"])).collect();
        ten.push(paper("8", &["Qqqq Zzzz Xxxx"]));
        ten.push(paper("9", &["Wwww Jjjj Kkkk"]));
        let out = link_corpus(&ten, &reg, &FuzzyMatchConfig::default());
        assert_eq!(out.report.match_rate, Some(0.8));
        assert_eq!(out.report.counts_by_method["none"], 2);
        assert_eq!(out.report.counts_by_method["exact"], 8);
        assert_eq!(out.report.score_histogram.iter().sum::<usize>(), 10);
        assert_eq!(match_table(&out.matches).len(), 10);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_title(&s);
            prop_assert_eq!(normalize_title(&once), once.clone());
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
        }

        #[test]
        fn levenshtein_matches_oracle_and_is_a_metric(a in "[abc ]{0,8}", b in "[abc ]{0,8}", c in "[abc ]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), lev_oracle(&a, &b));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn ratios_in_unit_interval(a in "[a-e ]{0,12}", b in "[a-e ]{0,12}") {
            for f in [token_sort_ratio(&a, &b), partial_ratio(&a, &b)] {
                prop_assert!((0.0..=1.0).contains(&f));
            }
            prop_assert_eq!(token_sort_ratio(&a, &b), token_sort_ratio(&b, &a));
        }

        #[test]
        fn combine_bounds_and_monotonicity(f in prop::collection::vec(0.0f64..=1.0, 1..5)) {
            let s = combine_scores(&f);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&s));
            let mut with_one = f.clone();
            with_one.push(1.0);
            prop_assert!(combine_scores(&with_one) >= s - 1e-15);
            let mut with_zero = f.clone();
            with_zero.push(0.0);
            prop_assert!(combine_scores(&with_zero) <= s + 1e-15);
            prop_assert_eq!(s == 1.0, f.iter().all(|&x| x == 1.0));
        }

        #[test]
        fn warm_and_cold_cache_agree(q in "[a-z ]{1,20}") {
            let reg = [
                inst("g1", "University of Oxford", &["Oxford"]),
                inst("g2", "Oxford Brookes University", &[]),
                inst("g3", "Imperial College London", &["Imperial"]),
            ];
            let index = RegistryIndex::new(&reg);
            let cfg = FuzzyMatchConfig::default();
            let mut warm = MatchCache::new();
            let cold = match_institute(&q, &index, &mut warm, &cfg);
            let again = match_institute(&q, &index, &mut warm, &cfg);
            prop_assert_eq!(&cold.matched_id, &again.matched_id);
            prop_assert_eq!(cold.score, again.score);
        }
    }
}
