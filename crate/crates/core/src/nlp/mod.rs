//! Abstract preprocessing and topic-threshold labeling against a supplied
//! topic-word weight table.

mod preprocess;
mod topics;

pub use preprocess::{
    bundled_stop_words, preprocess_abstract, preprocess_corpus, tokenize, DroppedDocument,
    PreprocessConfig, PreprocessOutput, Preprocessor, Stemmer, TokenDocument,
};
pub use topics::{
    assign_topics, assigned, is_dl, label_dl, label_table, topic_score, DlRule, DocumentLabel,
    LabelSummary, Topic, TopicAssignmentConfig, TopicError, TopicModel,
};
