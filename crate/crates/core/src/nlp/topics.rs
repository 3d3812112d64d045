use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::TokenDocument;
use crate::corpus::{Cell, Table};

#[derive(Debug, thiserror::Error)]
pub enum TopicError {
    #[error("topic {topic}: weight for `{word}` must be positive and finite, got {weight}")]
    Weight { topic: u32, word: String, weight: f64 },
    #[error("topic {topic}: word `{word}` listed twice")]
    DuplicateWord { topic: u32, word: String },
    #[error("topic {0} has no terms")]
    Empty(u32),
    #[error("topic model csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("gamma must be non-negative, got {0}")]
    Gamma(f64),
    #[error("no DL topic ids configured")]
    NoDlTopics,
    #[error("DL topic {0} is not in the model")]
    UnknownDlTopic(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    topic_id: u32,
    terms: Vec<(String, f64)>,
    max_weight: f64,
}

impl Topic {
    /// Terms are re-sorted by descending weight (ties by word).
    pub fn new(topic_id: u32, mut terms: Vec<(String, f64)>) -> Result<Self, TopicError> {
        if terms.is_empty() {
            return Err(TopicError::Empty(topic_id));
        }
        let mut seen = BTreeSet::new();
        for (word, weight) in &terms {
            if !(weight.is_finite() && *weight > 0.0) {
                return Err(TopicError::Weight {
                    topic: topic_id,
                    word: word.clone(),
                    weight: *weight,
                });
            }
            if !seen.insert(word.as_str()) {
                return Err(TopicError::DuplicateWord {
                    topic: topic_id,
                    word: word.clone(),
                });
            }
        }
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let max_weight = terms[0].1;
        Ok(Self {
            topic_id,
            terms,
            max_weight,
        })
    }

    pub fn id(&self) -> u32 {
        self.topic_id
    }

    pub fn terms(&self) -> &[(String, f64)] {
        &self.terms
    }

    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    topics: Vec<Topic>,
}

impl TopicModel {
    pub fn new(mut topics: Vec<Topic>) -> Self {
        topics.sort_by_key(|t| t.topic_id);
        Self { topics }
    }

    /// Reads `topic_id,word,weight` rows (with header).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TopicError> {
        #[derive(Deserialize)]
        struct Row {
            topic_id: u32,
            word: String,
            weight: f64,
        }
        let mut grouped: BTreeMap<u32, Vec<(String, f64)>> = BTreeMap::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            grouped.entry(row.topic_id).or_default().push((row.word, row.weight));
        }
        let topics = grouped
            .into_iter()
            .map(|(id, terms)| Topic::new(id, terms))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(topics))
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn get(&self, id: u32) -> Option<&Topic> {
        self.topics.iter().find(|t| t.topic_id == id)
    }
}

/// Sum of the weights of topic terms present in the document.
pub fn topic_score(tokens: &BTreeSet<String>, topic: &Topic) -> f64 {
    topic
        .terms
        .iter()
        .filter(|(w, _)| tokens.contains(w))
        .map(|(_, weight)| weight)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlRule {
    /// Any DL topic assigned.
    #[default]
    Any,
    /// Every DL topic assigned (the restrictive variant).
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicAssignmentConfig {
    pub gamma: f64,
    pub dl_topic_ids: BTreeSet<u32>,
    pub require_positive_score: bool,
    pub dl_rule: DlRule,
}

impl Default for TopicAssignmentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            dl_topic_ids: BTreeSet::new(),
            require_positive_score: true,
            dl_rule: DlRule::Any,
        }
    }
}

impl TopicAssignmentConfig {
    pub fn validate(&self, model: &TopicModel) -> Result<(), TopicError> {
        if !(self.gamma >= 0.0) {
            return Err(TopicError::Gamma(self.gamma));
        }
        if self.dl_topic_ids.is_empty() {
            return Err(TopicError::NoDlTopics);
        }
        if let Some(&id) = self.dl_topic_ids.iter().find(|id| model.get(**id).is_none()) {
            return Err(TopicError::UnknownDlTopic(id));
        }
        Ok(())
    }
}

/// A topic is assigned when its score reaches `gamma` times its largest
/// term weight (and, with the guard on, is positive).
pub fn assigned(score: f64, topic: &Topic, gamma: f64, require_positive_score: bool) -> bool {
    score >= gamma * topic.max_weight && (!require_positive_score || score > 0.0)
}

pub fn assign_topics(tokens: &BTreeSet<String>, model: &TopicModel, cfg: &TopicAssignmentConfig) -> BTreeSet<u32> {
    model
        .topics
        .iter()
        .filter(|t| assigned(topic_score(tokens, t), t, cfg.gamma, cfg.require_positive_score))
        .map(|t| t.topic_id)
        .collect()
}

pub fn is_dl(assigned_topics: &BTreeSet<u32>, cfg: &TopicAssignmentConfig) -> bool {
    match cfg.dl_rule {
        DlRule::Any => cfg.dl_topic_ids.iter().any(|id| assigned_topics.contains(id)),
        DlRule::All => {
            !cfg.dl_topic_ids.is_empty() && cfg.dl_topic_ids.iter().all(|id| assigned_topics.contains(id))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentLabel {
    pub paper_id: String,
    pub dl_flag: bool,
    pub assigned_topics: BTreeSet<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub documents: usize,
    pub dl_count: usize,
    /// `None` for an empty corpus.
    pub dl_share: Option<f64>,
    pub gamma: f64,
    pub dl_rule: DlRule,
}

pub fn label_dl(
    docs: &[TokenDocument],
    model: &TopicModel,
    cfg: &TopicAssignmentConfig,
) -> Result<(Vec<DocumentLabel>, LabelSummary), TopicError> {
    cfg.validate(model)?;
    let labels: Vec<DocumentLabel> = docs
        .iter()
        .map(|d| {
            let topics = assign_topics(&d.tokens, model, cfg);
            DocumentLabel {
                paper_id: d.paper_id.clone(),
                dl_flag: is_dl(&topics, cfg),
                assigned_topics: topics,
            }
        })
        .collect();
    let dl_count = labels.iter().filter(|l| l.dl_flag).count();
    let summary = LabelSummary {
        documents: labels.len(),
        dl_count,
        dl_share: (!labels.is_empty()).then(|| dl_count as f64 / labels.len() as f64),
        gamma: cfg.gamma,
        dl_rule: cfg.dl_rule,
    };
    Ok((labels, summary))
}

/// Label output rows: paper_id, dl_flag, assigned_topics.
pub fn label_table(labels: &[DocumentLabel]) -> Table {
    let mut t = Table::new(&["paper_id", "dl_flag", "assigned_topics"]);
    for l in labels {
        t.push(vec![
            Cell::text(&l.paper_id),
            Cell::Bool(l.dl_flag),
            Cell::List(l.assigned_topics.iter().map(u32::to_string).collect()),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dl_topic() -> Topic {
        Topic::new(
            0,
            vec![
                ("deep_learning".into(), 0.3),
                ("neural_network".into(), 0.5),
                ("convolutional".into(), 0.2),
            ],
        )
        .unwrap()
    }

    fn tokens(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn cfg(gamma: f64) -> TopicAssignmentConfig {
        TopicAssignmentConfig {
            gamma,
            dl_topic_ids: [0].into(),
            ..Default::default()
        }
    }

    #[test]
    fn topic_is_sorted_and_max_tracked() {
        let t = dl_topic();
        assert_eq!(t.max_weight(), 0.5);
        assert_eq!(t.terms()[0].0, "neural_network");
        assert!(Topic::new(1, vec![("x".into(), 0.0)]).is_err());
        assert!(Topic::new(1, vec![("x".into(), 0.1), ("x".into(), 0.2)]).is_err());
    }

    #[test]
    fn score_examples() {
        let t = dl_topic();
        assert_eq!(topic_score(&tokens(&["deep_learning", "neural_network", "convolutional"]), &t), 0.3 + 0.5 + 0.2);
        assert_eq!(topic_score(&tokens(&["graph"]), &t), 0.0);
        assert_eq!(topic_score(&tokens(&["deep_learning", "graph"]), &t), 0.3);
    }

    #[test]
    fn threshold_examples() {
        let model = TopicModel::new(vec![dl_topic()]);
        let doc = tokens(&["deep_learning"]);
        assert_eq!(assign_topics(&doc, &model, &cfg(0.5)), [0].into());
        assert!(assign_topics(&doc, &model, &cfg(1.0)).is_empty());
        assert!(assign_topics(&tokens(&["graph"]), &model, &cfg(0.0)).is_empty());
        let unguarded = TopicAssignmentConfig {
            require_positive_score: false,
            ..cfg(0.0)
        };
        assert_eq!(assign_topics(&tokens(&["graph"]), &model, &unguarded), [0].into());
    }

    #[test]
    fn csv_loading() {
        let csv = "topic_id,word,weight\n1,graph,0.2\n0,neural_network,0.5\n0,deep_learning,0.3\n";
        let model = TopicModel::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(model.topics().len(), 2);
        assert_eq!(model.topics()[0].id(), 0);
        assert_eq!(model.get(1).unwrap().max_weight(), 0.2);
        assert!(TopicModel::from_csv("topic_id,word,weight\n0,x,-1\n".as_bytes()).is_err());
    }

    fn doc(id: &str, words: &[&str]) -> TokenDocument {
        TokenDocument {
            paper_id: id.into(),
            tokens: tokens(words),
            token_count: words.len(),
        }
    }

    #[test]
    fn label_fixture_counts() {
        let model = TopicModel::new(vec![dl_topic(), Topic::new(1, vec![("graph".into(), 1.0)]).unwrap()]);
        let mut docs: Vec<_> = (0..7).map(|i| doc(&i.to_string(), &["graph", "convolutional"])).collect();
        docs.extend((7..10).map(|i| doc(&i.to_string(), &["neural_network"])));
        let (labels, summary) = label_dl(&docs, &model, &cfg(0.5)).unwrap();
        assert_eq!(summary.dl_count, 3);
        assert_eq!(summary.dl_share, Some(0.3));
        assert!(labels[9].dl_flag && !labels[0].dl_flag);
        assert_eq!(label_table(&labels).len(), 10);
    }

    #[test]
    fn saturated_and_empty_corpora() {
        let model = TopicModel::new(vec![dl_topic()]);
        let docs: Vec<_> =
            (0..4).map(|i| doc(&i.to_string(), &["deep_learning", "neural_network", "convolutional"])).collect();
        assert_eq!(label_dl(&docs, &model, &cfg(0.5)).unwrap().1.dl_share, Some(1.0));
        assert_eq!(label_dl(&[], &model, &cfg(0.5)).unwrap().1.dl_share, None);
    }

    #[test]
    fn restrictive_rule_needs_all_topics() {
        let model = TopicModel::new(vec![dl_topic(), Topic::new(1, vec![("cnn".into(), 1.0)]).unwrap()]);
        let c = TopicAssignmentConfig {
            dl_topic_ids: [0, 1].into(),
            dl_rule: DlRule::All,
            ..cfg(0.5)
        };
        let one = assign_topics(&tokens(&["neural_network"]), &model, &c);
        assert!(!is_dl(&one, &c));
        let both = assign_topics(&tokens(&["neural_network", "cnn"]), &model, &c);
        assert!(is_dl(&both, &c));
    }

    #[test]
    fn config_errors() {
        let model = TopicModel::new(vec![dl_topic()]);
        assert!(matches!(TopicAssignmentConfig::default().validate(&model), Err(TopicError::NoDlTopics)));
        let c = TopicAssignmentConfig {
            dl_topic_ids: [9].into(),
            ..Default::default()
        };
        assert!(matches!(c.validate(&model), Err(TopicError::UnknownDlTopic(9))));
    }

    proptest! {
        #[test]
        fn gamma_monotone(mask in 0u8..8, g1 in 0.0f64..2.0, g2 in 0.0f64..2.0) {
            let model = TopicModel::new(vec![dl_topic()]);
            let words = ["deep_learning", "neural_network", "convolutional"];
            let doc: BTreeSet<String> = words.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, w)| w.to_string()).collect();
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let a_hi = assign_topics(&doc, &model, &cfg(hi));
            let a_lo = assign_topics(&doc, &model, &cfg(lo));
            prop_assert!(a_hi.is_subset(&a_lo));
        }

        #[test]
        fn score_additivity(mask in 0u8..8, extra in "[a-z]{3,6}") {
            let t = dl_topic();
            let words = ["deep_learning", "neural_network", "convolutional"];
            let mut doc: BTreeSet<String> = words.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, w)| w.to_string()).collect();
            let before = topic_score(&doc, &t);
            doc.insert(extra);
            prop_assert_eq!(topic_score(&doc, &t), before);
            if let Some((w, weight)) = t.terms().iter().find(|(w, _)| !doc.contains(w)) {
                doc.insert(w.clone());
                prop_assert!((topic_score(&doc, &t) - (before + weight)).abs() < 1e-12);
            }
        }
    }
}
