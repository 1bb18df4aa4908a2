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

#ifndef REKD_HARNESS_HPP_
#define REKD_HARNESS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekd/config.hpp"
#include "rekd/encoder.hpp"
#include "rekd/losses.hpp"
#include "rekd/metrics.hpp"
#include "rekd/numerics.hpp"
#include "rekd/queues.hpp"
#include "rekd/relation_miner.hpp"
#include "rekd/synth_data.hpp"

namespace rekd {

/// One row of records.csv. Undefined quantities hold kUndefined (-1).
struct EpochRecord {
  std::size_t epoch = 0;
  double loss_teacher = kUndefined;
  double loss_student = kUndefined;
  double effective_rate = kUndefined;
  double pn_mean = kUndefined;
  double tpn_mean = kUndefined;
  double purity = kUndefined;
  double nmi = kUndefined;
  double ari = kUndefined;
  double acc = kUndefined;
  double match_entropy = kUndefined;
  double probe_acc = kUndefined;

  bool operator==(const EpochRecord&) const = default;
};

/// Observation points for instrumented runs. All callbacks are optional.
struct TrainHooks {
  /// After every prototype update: the momentum coefficients that fired and
  /// the resulting bank.
  std::function<void(std::span<const double>, const PrototypeBank&)> on_prototype_update;
  /// Once, right after the bank is built from the warmed-up teacher queue
  /// and the queue is re-tagged.
  std::function<void(const PrototypeBank&, double effective_rate)> on_prototype_init;
  std::function<void(const EpochRecord&)> on_epoch;
};

// ---------------------------------------------------------------------------
// Linear probe

struct ProbeOptions {
  std::size_t epochs = 30;
  double lr = 0.1;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  bool standardize = true;  // z-score features with train-split statistics
  std::uint64_t seed = 0;
};

/// Trains a softmax classifier on frozen features using an 80/20 seeded
/// split; returns test accuracy.
inline double linear_probe_features(const Matrix& features, std::span<const int> labels,
                                    std::size_t num_classes, const ProbeOptions& opt) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  if (labels.size() != n) throw std::invalid_argument("linear_probe: label count mismatch");
  if (n < 5) throw std::invalid_argument("linear_probe: need at least 5 samples");
  RngStream rng(opt.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream split_rng = rng.split(1);
  split_rng.shuffle(order);
  const std::size_t n_train = (n * 4) / 5;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  std::vector<double> mean(f, 0.0), scale(f, 1.0);
  if (opt.standardize) {
    for (std::size_t i : train)
      for (std::size_t d = 0; d < f; ++d) mean[d] += features(i, d);
    for (double& m : mean) m /= static_cast<double>(n_train);
    std::vector<double> var(f, 0.0);
    for (std::size_t i : train)
      for (std::size_t d = 0; d < f; ++d) var[d] += (features(i, d) - mean[d]) * (features(i, d) - mean[d]);
    for (std::size_t d = 0; d < f; ++d) {
      const double sd = std::sqrt(var[d] / static_cast<double>(n_train));
      scale[d] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
  }
  Matrix x(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < f; ++d) x(i, d) = (features(i, d) - mean[d]) * scale[d];

  Matrix w(f, num_classes), b(1, num_classes), vw(f, num_classes), vb(1, num_classes);
  RngStream batch_rng = rng.split(2);
  for (std::size_t ep = 0; ep < opt.epochs; ++ep) {
    batch_rng.shuffle(train);
    for (std::size_t start = 0; start < n_train; start += opt.batch_size) {
      const std::size_t end = std::min(n_train, start + opt.batch_size);
      std::span<const std::size_t> idx(train.data() + start, end - start);
      Matrix xb = gather_rows(x, idx);
      Matrix logits = matmul(xb, w);
      for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < num_classes; ++c) mx = std::max(mx, row[c] + b(0, c));
        double z = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) z += (row[c] = std::exp(row[c] + b(0, c) - mx));
        const auto y = static_cast<std::size_t>(labels[idx[r]]);
        for (std::size_t c = 0; c < num_classes; ++c)
          row[c] = (row[c] / z - (c == y ? 1.0 : 0.0)) / static_cast<double>(idx.size());
      }
      Matrix gw = matmul_tn(xb, logits);
      for (std::size_t i = 0; i < w.size(); ++i) {
        vw.data()[i] = opt.momentum * vw.data()[i] + gw.data()[i];
        w.data()[i] -= opt.lr * vw.data()[i];
      }
      for (std::size_t c = 0; c < num_classes; ++c) {
        double g = 0.0;
        for (std::size_t r = 0; r < logits.rows(); ++r) g += logits(r, c);
        vb(0, c) = opt.momentum * vb(0, c) + g;
        b(0, c) -= opt.lr * vb(0, c);
      }
    }
  }

  std::size_t correct = 0;
  for (std::size_t i : test) {
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_classes; ++c) {
      double v = b(0, c);
      for (std::size_t d = 0; d < f; ++d) v += x(i, d) * w(d, c);
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    correct += best == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

/// Linear probe on the encoder's last hidden layer.
inline double linear_probe(const MlpEncoder& enc, const LabeledDataset& data, const ProbeOptions& opt) {
  return linear_probe_features(hidden_features(enc, data.points), data.labels, data.num_classes, opt);
}

inline double linear_probe(const MlpEncoder& enc, const LabeledDataset& data, std::size_t probe_epochs,
                           double probe_lr, std::uint64_t seed = 0) {
  ProbeOptions opt;
  opt.epochs = probe_epochs;
  opt.lr = probe_lr;
  opt.seed = seed;
  return linear_probe(enc, data, opt);
}

// ---------------------------------------------------------------------------
// Training machinery

namespace detail {

/// Integer ring in lockstep with a CandidateQueue; same slot semantics.
class IdRing {
 public:
  explicit IdRing(std::size_t capacity) : ids_(capacity, -1) {}
  void push(std::span<const int> v) {
    for (int x : v) {
      ids_[cursor_] = x;
      cursor_ = (cursor_ + 1) % ids_.size();
    }
    filled_ = std::min(filled_ + v.size(), ids_.size());
  }
  std::vector<int> snapshot() const {
    std::vector<int> out(filled_);
    const std::size_t start = filled_ == ids_.size() ? cursor_ : 0;
    for (std::size_t k = 0; k < filled_; ++k) out[k] = ids_[(start + k) % ids_.size()];
    return out;
  }
  std::size_t filled() const { return filled_; }
  /// Live entries in slot order (see CandidateQueue::storage()).
  std::span<const int> live() const { return {ids_.data(), filled_}; }

 private:
  std::vector<int> ids_;
  std::size_t cursor_ = 0;
  std::size_t filled_ = 0;
};

// Substream ids. Student-branch ids are shared with the plain NCE baseline so
// a ReKD run that never leaves warm-up reproduces it exactly.
enum StreamId : std::uint64_t {
  kTeacherInit = 11,
  kStudentInit = 12,
  kShuffle = 20,
  kTeacherAug = 30,
  kStudentAug = 40,
  kKMeans = 50,
  kSupervisedLabels = 60,
  kProbe = 70,
};

inline std::uint64_t batch_stream(std::uint64_t base, std::size_t epoch, std::size_t batch,
                                  std::uint64_t view) {
  return (base << 48) ^ (static_cast<std::uint64_t>(epoch) << 28) ^
         (static_cast<std::uint64_t>(batch) << 4) ^ view;
}

/// Online encoder, its mean teacher, the optimizer and the candidate queue.
struct ContrastiveBranch {
  MlpEncoder online;
  MlpEncoder momentum;
  SgdState sgd;
  CandidateQueue queue;

  ContrastiveBranch(const std::vector<std::size_t>& dims, RngStream init, double lr, const TrainConfig& cfg)
      : online(dims, init),
        momentum(online),
        sgd(lr, cfg.sgd_momentum, cfg.weight_decay),
        queue(cfg.queue_capacity, dims.back()) {}
};

struct BranchPass {
  ForwardResult q;  // anchors from the online encoder
  Matrix k;         // candidates from the momentum encoder
  std::size_t degenerate = 0;
};

inline BranchPass encode(const ContrastiveBranch& br, const Matrix& x, const AugmentSpec& aug,
                         RngStream view_q, RngStream view_k) {
  NormalizedRows vq = augment(x, aug, view_q);
  NormalizedRows vk = augment(x, aug, view_k);
  BranchPass p;
  p.q = forward(br.online, vq.values);
  ForwardResult kf = forward(br.momentum, vk.values);
  p.k = std::move(kf.z);
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (p.q.cache.degenerate[r] || kf.cache.degenerate[r]) ++p.degenerate;
  return p;
}

/// Logits of anchors against the live queue rows, plus (optionally) a final
/// column holding each anchor's own key.
inline ContrastBatch build_batch(const Matrix& q, const CandidateQueue& queue, const Matrix& k,
                                 const BinaryMask* queue_labels, bool self_column, double tau) {
  const std::size_t n = q.rows();
  const std::size_t l = queue.filled();
  const std::size_t cols = l + (self_column ? 1 : 0);
  ContrastBatch b{Matrix(n, cols), BinaryMask(n, cols), tau};
  if (l) {
    view(b.logits).leftCols(static_cast<Eigen::Index>(l)).noalias() =
        view(q) * view(queue.storage()).topRows(static_cast<Eigen::Index>(l)).transpose() / tau;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (queue_labels)
      for (std::size_t j = 0; j < l; ++j)
        if ((*queue_labels)(i, j)) b.labels.set(i, j, true);
    if (self_column) {
      b.logits(i, l) = dot(q.row(i), k.row(i)) / tau;
      b.labels.set(i, l, true);
    }
  }
  return b;
}

/// Backpropagates d loss / d logits into the online encoder, steps SGD and
/// refreshes the mean teacher.
inline void apply_update(ContrastiveBranch& br, const BranchPass& pass, const CandidateQueue& queue,
                         const LossOutput& loss, bool self_column, double tau, double m) {
  const std::size_t l = queue.filled();
  const std::size_t n = pass.q.z.rows();
  Matrix dq(n, pass.q.z.cols());
  if (l) {
    view(dq).noalias() = view(loss.grad_logits).leftCols(static_cast<Eigen::Index>(l)) *
                         view(queue.storage()).topRows(static_cast<Eigen::Index>(l)) / tau;
  }
  if (self_column) {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = loss.grad_logits(i, l) / tau;
      auto dst = dq.row(i);
      auto kr = pass.k.row(i);
      for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += g * kr[d];
    }
  }
  EncoderGrads grads = backward(br.online, pass.q.cache, dq);
  sgd_step(br.online, grads, br.sgd);
  mean_teacher_update(br.online, br.momentum, m);
}

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, RngStream rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
  return out;
}

inline bool too_degenerate(const BranchPass& p, std::size_t n) { return 2 * p.degenerate > n; }

inline void check_data(const TrainConfig& cfg, const Matrix& points) {
  cfg.validate();
  if (points.cols() != cfg.mixture.dim)
    throw std::invalid_argument("training data has dim " + std::to_string(points.cols()) +
                                " but config mixture.dim is " + std::to_string(cfg.mixture.dim));
  if (points.rows() == 0) throw std::invalid_argument("training data is empty");
}

/// Prototype-side diagnostics of a tagged queue against ground truth.
inline void fill_prototype_metrics(EpochRecord& rec, std::span<const int> proto_idx,
                                   std::span<const int> truth, std::size_t m) {
  if (proto_idx.empty()) return;
  rec.effective_rate = effective_rate(proto_idx);
  rec.nmi = nmi(proto_idx, truth);
  rec.ari = ari(proto_idx, truth);
  rec.acc = cluster_acc(proto_idx, truth);
  rec.match_entropy = matching_distribution(proto_idx, m).normalized_entropy;
}

inline void fill_quality(EpochRecord& rec, const RelationQuality& q) {
  rec.pn_mean = q.pn_mean;
  rec.tpn_mean = q.tpn_mean;
  rec.purity = q.purity;
}

inline bool probe_due(const TrainConfig& cfg, std::size_t epoch) {
  return epoch + 1 == cfg.epochs || (cfg.probe_every && (epoch + 1) % cfg.probe_every == 0);
}

inline ProbeOptions probe_options(const TrainConfig& cfg) {
  ProbeOptions opt;
  opt.epochs = cfg.probe_epochs;
  opt.lr = cfg.probe_lr;
  opt.seed = RngStream(cfg.seed).split(kProbe).next_u64();
  return opt;
}

/// Unlabeled view of the training set handed to the optimization path.
/// Ground truth never travels with it.
struct UnlabeledPoints {
  const Matrix& points;
};

}  // namespace detail

struct RekdResult {
  MlpEncoder student;
  MlpEncoder teacher;
  std::vector<EpochRecord> records;
  std::optional<PrototypeBank> bank;
  double init_effective_rate = kUndefined;
};

struct SingleResult {
  MlpEncoder encoder;
  std::vector<EpochRecord> records;
};

/// Online heterogeneous teacher + student. Warm-up epochs train both with
/// single-positive NCE; afterwards the teacher mines relations through the
/// prototype bank, trains on them, and hands the same labels to the student.
inline RekdResult train_rekd(const TrainConfig& cfg, const LabeledDataset& data, const TrainHooks& hooks = {}) {
  const detail::UnlabeledPoints train_set{data.points};
  detail::check_data(cfg, train_set.points);
  // Diagnostics-only ground truth; the optimization path below never reads it.
  const std::vector<int>& truth = data.labels;

  RngStream root(cfg.seed);
  detail::ContrastiveBranch teacher(cfg.teacher_layers(), root.split(detail::kTeacherInit), cfg.lr_teacher, cfg);
  detail::ContrastiveBranch student(cfg.student_layers(), root.split(detail::kStudentInit), cfg.lr_student, cfg);
  detail::IdRing queue_truth(cfg.queue_capacity);
  std::optional<PrototypeBank> bank;
  double init_rate = kUndefined;
  std::vector<EpochRecord> records;
  const std::size_t n = train_set.points.rows();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch == cfg.warmup_epochs) {
      const QueueSnapshot snap = teacher.queue.snapshot();
      if (snap.size() < cfg.num_prototypes)
        throw std::runtime_error("train_rekd: warm-up left " + std::to_string(snap.size()) +
                                 " candidates, fewer than num_prototypes=" + std::to_string(cfg.num_prototypes));
      KMeansResult km = spherical_kmeans(snap.features, cfg.num_prototypes, cfg.kmeans_iters, root.split(detail::kKMeans));
      bank.emplace(std::move(km.centroids), cfg.theta, cfg.beta);
      const Assignment a = assign_prototypes(*bank, snap.features);
      teacher.queue.retag(a.idx);
      init_rate = effective_rate(a.idx);
      if (hooks.on_prototype_init) hooks.on_prototype_init(*bank, init_rate);
    }
    const bool warm = epoch < cfg.warmup_epochs;
    teacher.sgd.set_lr(cosine_lr(epoch, cfg.epochs, cfg.lr_teacher));
    student.sgd.set_lr(cosine_lr(epoch, cfg.epochs, cfg.lr_student));

    double loss_t = 0.0, loss_s = 0.0;
    std::size_t steps = 0;
    RelationQuality quality;
    const auto batches = detail::epoch_batches(n, cfg.batch_size, root.split(detail::kShuffle).split(epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const Matrix x = gather_rows(train_set.points, idx);
      std::vector<int> batch_truth(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) batch_truth[i] = truth[idx[i]];

      // Teacher.
      detail::BranchPass tp = detail::encode(teacher, x, cfg.augment,
                                             root.split(detail::batch_stream(detail::kTeacherAug, epoch, bi, 0)),
                                             root.split(detail::batch_stream(detail::kTeacherAug, epoch, bi, 1)));
      detail::BranchPass sp = detail::encode(student, x, cfg.augment,
                                             root.split(detail::batch_stream(detail::kStudentAug, epoch, bi, 0)),
                                             root.split(detail::batch_stream(detail::kStudentAug, epoch, bi, 1)));
      if (detail::too_degenerate(tp, idx.size()) || detail::too_degenerate(sp, idx.size())) {
        std::cerr << "train_rekd: epoch " << epoch << " batch " << bi << " skipped (degenerate embeddings)\n";
        continue;
      }
      if (teacher.queue.filled() != student.queue.filled() || teacher.queue.cursor() != student.queue.cursor())
        throw std::logic_error("train_rekd: teacher and student queues out of lockstep");

      std::optional<RelationLabels> relations;
      Assignment k_assign;
      if (!warm) {
        k_assign = assign_prototypes(*bank, tp.k);
        relations = mine_relations(k_assign.idx, teacher.queue.live_proto_idx());
        quality.merge(relation_quality(relations->labels, batch_truth, queue_truth.live()));
      }
      const bool self_col = warm || cfg.include_self_positive;
      const BinaryMask* qlabels = relations ? &relations->labels : nullptr;

      const ContrastBatch tb = detail::build_batch(tp.q.z, teacher.queue, tp.k, qlabels, self_col, cfg.tau);
      const LossOutput tl = warm ? nce_loss(tb) : relcon_loss(tb);
      detail::apply_update(teacher, tp, teacher.queue, tl, self_col, cfg.tau, cfg.mean_teacher_m);
      if (warm) {
        teacher.queue.enqueue_dequeue(tp.k, std::vector<int>(idx.size(), -1));
      } else {
        teacher.queue.enqueue_dequeue(tp.k, k_assign.idx);
        const std::vector<double> ms = update_prototypes(*bank, tp.k, k_assign.idx, k_assign.sim);
        if (hooks.on_prototype_update) hooks.on_prototype_update(ms, *bank);
      }

      // Student, on the teacher's relation labels. Both queues share slot
      // order, so label column j refers to the same source sample in each.
      const ContrastBatch sb = detail::build_batch(sp.q.z, student.queue, sp.k, qlabels, self_col, cfg.tau);
      const LossOutput sl = warm ? nce_loss(sb) : relcon_loss(sb);
      detail::apply_update(student, sp, student.queue, sl, self_col, cfg.tau, cfg.mean_teacher_m);
      student.queue.enqueue_dequeue(sp.k, warm ? std::vector<int>(idx.size(), -1) : k_assign.idx);
      queue_truth.push(batch_truth);

      loss_t += tl.value;
      loss_s += sl.value;
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    if (steps) {
      rec.loss_teacher = loss_t / static_cast<double>(steps);
      rec.loss_student = loss_s / static_cast<double>(steps);
    }
    if (!warm) {
      detail::fill_quality(rec, quality);
      detail::fill_prototype_metrics(rec, teacher.queue.live_proto_idx(), queue_truth.live(), cfg.num_prototypes);
    }
    if (detail::probe_due(cfg, epoch)) rec.probe_acc = linear_probe(student.online, data, detail::probe_options(cfg));
    if (hooks.on_epoch) hooks.on_epoch(rec);
    records.push_back(rec);
  }
  return RekdResult{std::move(student.online), std::move(teacher.online), std::move(records), std::move(bank), init_rate};
}

/// MoCo-style baseline: one encoder pair with the student architecture,
/// single-positive NCE against its own queue throughout.
inline SingleResult train_baseline_nce(const TrainConfig& cfg, const LabeledDataset& data, const TrainHooks& hooks = {}) {
  const detail::UnlabeledPoints train_set{data.points};
  detail::check_data(cfg, train_set.points);
  RngStream root(cfg.seed);
  detail::ContrastiveBranch br(cfg.student_layers(), root.split(detail::kStudentInit), cfg.lr_student, cfg);
  std::vector<EpochRecord> records;
  const std::size_t n = train_set.points.rows();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    br.sgd.set_lr(cosine_lr(epoch, cfg.epochs, cfg.lr_student));
    double loss = 0.0;
    std::size_t steps = 0;
    const auto batches = detail::epoch_batches(n, cfg.batch_size, root.split(detail::kShuffle).split(epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const Matrix x = gather_rows(train_set.points, idx);
      detail::BranchPass p = detail::encode(br, x, cfg.augment,
                                            root.split(detail::batch_stream(detail::kStudentAug, epoch, bi, 0)),
                                            root.split(detail::batch_stream(detail::kStudentAug, epoch, bi, 1)));
      if (detail::too_degenerate(p, idx.size())) {
        std::cerr << "train_baseline_nce: epoch " << epoch << " batch " << bi << " skipped (degenerate embeddings)\n";
        continue;
      }
      const ContrastBatch b = detail::build_batch(p.q.z, br.queue, p.k, nullptr, true, cfg.tau);
      const LossOutput l = nce_loss(b);
      detail::apply_update(br, p, br.queue, l, true, cfg.tau, cfg.mean_teacher_m);
      br.queue.enqueue_dequeue(p.k, std::vector<int>(idx.size(), -1));
      loss += l.value;
      ++steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    if (steps) rec.loss_student = loss / static_cast<double>(steps);
    if (detail::probe_due(cfg, epoch)) rec.probe_acc = linear_probe(br.online, data, detail::probe_options(cfg));
    if (hooks.on_epoch) hooks.on_epoch(rec);
    records.push_back(rec);
  }
  return SingleResult{std::move(br.online), std::move(records)};
}

inline constexpr std::size_t kUnlimitedPositives = std::numeric_limits<std::size_t>::max();

/// Ground-truth relation labels with controlled purity and positive count:
/// each anchor keeps at most `tpn_cap` randomly chosen same-class
/// candidates, and each kept slot is swapped, with probability
/// 1 - purity_target, for a random other-class candidate.
inline BinaryMask supervised_relations(std::span<const int> anchor_truth, std::span<const int> queue_truth,
                                       double purity_target, std::size_t tpn_cap, RngStream& rng) {
  BinaryMask labels(anchor_truth.size(), queue_truth.size());
  std::vector<std::size_t> same, other;
  for (std::size_t i = 0; i < anchor_truth.size(); ++i) {
    same.clear();
    other.clear();
    for (std::size_t j = 0; j < queue_truth.size(); ++j)
      (queue_truth[j] == anchor_truth[i] ? same : other).push_back(j);
    const std::size_t keep = std::min(tpn_cap, same.size());
    // Partial Fisher-Yates: the first `keep` entries become the kept set.
    for (std::size_t k = 0; k < keep && keep < same.size(); ++k)
      std::swap(same[k], same[k + rng.below(same.size() - k)]);
    std::size_t swapped = 0;
    for (std::size_t k = 0; k < keep; ++k) {
      if (purity_target < 1.0 && swapped < other.size() && !rng.bernoulli(purity_target)) {
        // Draw without replacement from the not-yet-used tail of `other`.
        const std::size_t pick = swapped + rng.below(other.size() - swapped);
        std::swap(other[swapped], other[pick]);
        labels.set(i, other[swapped], true);
        ++swapped;
      } else {
        labels.set(i, same[k], true);
      }
    }
  }
  return labels;
}

/// Supervised contrastive variant: relations come from ground truth
/// (corrupted per supervised_relations) from the first batch; no warm-up
/// or prototypes are involved.
inline SingleResult train_supmoco(const TrainConfig& cfg, const LabeledDataset& data, double purity_target,
                                  std::size_t tpn_cap, const TrainHooks& hooks = {}) {
  if (!(purity_target > 0 && purity_target <= 1))
    throw std::invalid_argument("train_supmoco: purity_target must be in (0,1]");
  if (tpn_cap < 1) throw std::invalid_argument("train_supmoco: tpn_cap must be >= 1");
  detail::check_data(cfg, data.points);
  RngStream root(cfg.seed);
  RngStream label_rng = root.split(detail::kSupervisedLabels);
  detail::ContrastiveBranch br(cfg.student_layers(), root.split(detail::kStudentInit), cfg.lr_student, cfg);
  detail::IdRing queue_truth(cfg.queue_capacity);
  std::vector<EpochRecord> records;
  const std::size_t n = data.size();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    br.sgd.set_lr(cosine_lr(epoch, cfg.epochs, cfg.lr_student));
    double loss = 0.0;
    std::size_t steps = 0;
    RelationQuality quality;
    const auto batches = detail::epoch_batches(n, cfg.batch_size, root.split(detail::kShuffle).split(epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const Matrix x = gather_rows(data.points, idx);
      std::vector<int> batch_truth(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) batch_truth[i] = data.labels[idx[i]];
      detail::BranchPass p = detail::encode(br, x, cfg.augment,
                                            root.split(detail::batch_stream(detail::kStudentAug, epoch, bi, 0)),
                                            root.split(detail::batch_stream(detail::kStudentAug, epoch, bi, 1)));
      if (detail::too_degenerate(p, idx.size())) {
        std::cerr << "train_supmoco: epoch " << epoch << " batch " << bi << " skipped (degenerate embeddings)\n";
        continue;
      }
      const std::span<const int> qtruth = queue_truth.live();
      const BinaryMask labels = supervised_relations(batch_truth, qtruth, purity_target, tpn_cap, label_rng);
      quality.merge(relation_quality(labels, batch_truth, qtruth));
      const ContrastBatch b =
          detail::build_batch(p.q.z, br.queue, p.k, &labels, cfg.include_self_positive, cfg.tau);
      const LossOutput l = relcon_loss(b);
      detail::apply_update(br, p, br.queue, l, cfg.include_self_positive, cfg.tau, cfg.mean_teacher_m);
      br.queue.enqueue_dequeue(p.k, std::vector<int>(idx.size(), -1));
      queue_truth.push(batch_truth);
      loss += l.value;
      ++steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    if (steps) rec.loss_student = loss / static_cast<double>(steps);
    detail::fill_quality(rec, quality);
    if (detail::probe_due(cfg, epoch)) rec.probe_acc = linear_probe(br.online, data, detail::probe_options(cfg));
    if (hooks.on_epoch) hooks.on_epoch(rec);
    records.push_back(rec);
  }
  return SingleResult{std::move(br.online), std::move(records)};
}

}  // namespace rekd

#endif  // REKD_HARNESS_HPP_
