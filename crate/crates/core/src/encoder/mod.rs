//! Domain-specific sentence encoders: a one-layer text-CNN and a
//! bag-of-words baseline.

mod bow;
mod cnn;
mod train;
mod vocab;
mod wordvec;

pub use bow::{bow_encode, bow_encode_texts};
pub use cnn::{
    cnn_forward_backward, joint_forward_backward, Batch, CnnConfig, CnnGrads, ConvBank, EmbeddingMode, Forward,
    JointGrads, TextCnn, DEFAULT_MAX_LEN,
};
pub use train::{
    cat_head, encode_dataset, joint_accuracy, joint_finetune, tokenize_dataset, train_cat_open, train_cnn,
    TrainConfig, Trained,
};
pub use vocab::{build_vocab, build_vocab_from_texts, tokenize, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
pub use wordvec::WordVectors;
