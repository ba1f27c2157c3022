#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cnlu/autodiff.hpp"
#include "cnlu/rng.hpp"

namespace cnlu {

// Which part of the network a parameter belongs to. Heads are trained
// jointly but must stay disjoint: updating one head never moves the other.
enum class Partition {
  backbone,           // shared text encoder
  embeddings,         // categorical feature embedding tables
  utterance_head,
  conversation_head,
  shared_combiner,    // query-context combining module in the shared variants
};

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);

// Ordered registry of trainable tensors. Registration order is the
// optimizer's iteration order, so it must be deterministic.
class ParamSet {
 public:
  struct Entry {
    ad::Value node;
    Partition partition;
  };

  ad::Value add(std::string name, Partition partition, Tensor init) {
    for (const auto& e : entries_) {
      if (e.node->name == name) {
        throw std::invalid_argument("ParamSet: duplicate parameter " + name);
      }
    }
    entries_.push_back({ad::param(std::move(init), std::move(name)), partition});
    return entries_.back().node;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  std::vector<ad::Value> values() const {
    std::vector<ad::Value> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.node);
    return out;
  }

  std::vector<ad::Value> values(Partition p) const {
    std::vector<ad::Value> out;
    for (const auto& e : entries_) {
      if (e.partition == p) out.push_back(e.node);
    }
    return out;
  }

  ad::Value find(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.node->name == name) return e.node;
    }
    throw std::invalid_argument("ParamSet: no parameter named " + name);
  }

  int64_t total_count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.node->val.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.node->ensure_grad().fill(0.0);
  }

  std::vector<Tensor> snapshot() const {
    std::vector<Tensor> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.node->val);
    return out;
  }

  void restore(const std::vector<Tensor>& snap) {
    if (snap.size() != entries_.size()) {
      throw std::invalid_argument("ParamSet: snapshot size mismatch");
    }
    for (size_t i = 0; i < snap.size(); ++i) entries_[i].node->val = snap[i];
  }

  // Round every value through 32-bit storage precision, as the checkpoint
  // writer does, so in-memory and reloaded models evaluate identically.
  void round_to_f32() {
    for (auto& e : entries_) {
      for (double& v : e.node->val.data) v = static_cast<double>(static_cast<float>(v));
    }
  }

 private:
  std::vector<Entry> entries_;
};

// Uniform fan-in scaled init for a [in,out] weight matrix.
Tensor init_weight(int64_t in, int64_t out, Rng& rng);
// Uniform +/- 1/sqrt(dim) rows for embedding tables.
Tensor init_embedding(int64_t vocab, int64_t dim, Rng& rng);

}  // namespace cnlu
