// Copyright 2026 The ReKD Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REKD_QUEUES_HPP_
#define REKD_QUEUES_HPP_

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekd/numerics.hpp"

namespace rekd {

/// Oldest-first copy of a queue's filled region.
struct QueueSnapshot {
  Matrix features;
  std::vector<int> proto_idx;

  std::size_t size() const { return proto_idx.size(); }
};

/// Fixed-capacity ring of candidate embeddings, each tagged with the
/// prototype it was assigned to (-1 for outliers and empty slots).
class CandidateQueue {
 public:
  CandidateQueue(std::size_t capacity, std::size_t dim)
      : features_(capacity, dim), proto_idx_(capacity, -1) {
    if (capacity == 0) throw std::invalid_argument("CandidateQueue: capacity must be positive");
  }

  std::size_t capacity() const { return features_.rows(); }
  std::size_t dim() const { return features_.cols(); }
  std::size_t filled() const { return filled_; }
  std::size_t cursor() const { return cursor_; }
  bool full() const { return filled_ == capacity(); }

  /// Overwrites the oldest slots with `feats`, advancing the cursor.
  void enqueue_dequeue(const Matrix& feats, std::span<const int> idxs) {
    if (feats.rows() > capacity())
      throw std::invalid_argument("enqueue_dequeue: batch of " + std::to_string(feats.rows()) +
                                  " exceeds queue capacity " + std::to_string(capacity()));
    if (feats.cols() != dim())
      throw std::invalid_argument("enqueue_dequeue: feature dim " + std::to_string(feats.cols()) +
                                  " vs queue dim " + std::to_string(dim()));
    if (idxs.size() != feats.rows())
      throw std::invalid_argument("enqueue_dequeue: index count does not match batch size");
    for (std::size_t r = 0; r < feats.rows(); ++r) {
      auto src = feats.row(r);
      std::copy(src.begin(), src.end(), features_.row(cursor_).begin());
      proto_idx_[cursor_] = idxs[r];
      cursor_ = (cursor_ + 1) % capacity();
    }
    filled_ = std::min(filled_ + feats.rows(), capacity());
  }

  /// Slot positions of the filled region, oldest first.
  std::vector<std::size_t> slot_order() const {
    std::vector<std::size_t> order(filled_);
    const std::size_t start = full() ? cursor_ : 0;
    for (std::size_t k = 0; k < filled_; ++k) order[k] = (start + k) % capacity();
    return order;
  }

  QueueSnapshot snapshot() const {
    const auto order = slot_order();
    QueueSnapshot s{gather_rows(features_, order), std::vector<int>(order.size())};
    for (std::size_t k = 0; k < order.size(); ++k) s.proto_idx[k] = proto_idx_[order[k]];
    return s;
  }

  /// Replaces the prototype tags of the filled region (oldest-first order),
  /// used when the prototype bank is (re)initialized.
  void retag(std::span<const int> idxs) {
    const auto order = slot_order();
    if (idxs.size() != order.size())
      throw std::invalid_argument("retag: expected " + std::to_string(order.size()) + " indices");
    for (std::size_t k = 0; k < order.size(); ++k) proto_idx_[order[k]] = idxs[k];
  }

  /// Backing storage in slot order. The first filled() rows are live; they
  /// are in oldest-first order until the ring wraps. Queues fed in lockstep
  /// share the same slot order.
  const Matrix& storage() const { return features_; }
  std::span<const int> live_proto_idx() const { return {proto_idx_.data(), filled_}; }

 private:
  Matrix features_;
  std::vector<int> proto_idx_;
  std::size_t cursor_ = 0;
  std::size_t filled_ = 0;
};

}  // namespace rekd

#endif  // REKD_QUEUES_HPP_
