#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cnlu/autodiff.hpp"
#include "cnlu/params.hpp"
#include "cnlu/rng.hpp"

namespace cnlu {

// Token index map built from training utterances. Indices 0/1 are reserved
// for padding and unknown.
struct Vocabulary {
  static constexpr int kPadIndex = 0;
  static constexpr int kUnknownIndex = 1;

  std::vector<std::string> tokens;  // index -> token; [0]="<pad>", [1]="<unk>"

  static Vocabulary build(const std::vector<std::string>& utterances);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  int lookup(const std::string& token) const;
  int size() const { return static_cast<int>(tokens.size()); }

 private:
  std::unordered_map<std::string, int> index_;
  void rebuild_index();
};

// Lowercases and splits on non-alphanumeric runs.
std::vector<std::string> split_words(const std::string& text);

// Word split -> vocabulary lookup -> truncate/pad to max_len.
std::vector<int> tokenize(const std::string& utterance, const Vocabulary& vocab, int max_len);

struct EncoderConfig {
  int d_q = 64;     // embedding and output width
  int heads = 2;    // self-attention heads; must divide d_q
  int max_len = 24; // token positions
};

// Small trainable text encoder standing in for a pre-trained backbone:
// token + position embeddings, one multi-head self-attention block, mean
// pooling over the non-padding positions.
class QueryEncoder {
 public:
  QueryEncoder(const EncoderConfig& config, int vocab_size, ParamSet& params, Rng& init_rng);

  // token_ids is a padded sequence from tokenize(). Only the non-padding
  // prefix participates, so appending padding never changes the output; an
  // all-padding input runs the padding token through the block instead.
  ad::Value encode(const std::vector<int>& token_ids) const;  // [1, d_q]

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  ad::Value tok_emb_;  // [vocab, d_q]
  ad::Value pos_emb_;  // [max_len, d_q]
  struct Head {
    ad::Value wq, wk, wv;  // [d_q, head_dim]
    ad::Value bq, bk, bv;  // [1, head_dim]
  };
  std::vector<Head> heads_;
  ad::Value wo_, bo_;  // [d_q, d_q], [1, d_q]
};

}  // namespace cnlu
