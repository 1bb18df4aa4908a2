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

#ifndef REKD_EXPERIMENT_HPP_
#define REKD_EXPERIMENT_HPP_

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rekd/checkpoint.hpp"
#include "rekd/config.hpp"
#include "rekd/harness.hpp"
#include "rekd/losses.hpp"
#include "rekd/metrics.hpp"

namespace rekd {

// ---------------------------------------------------------------------------
// records.csv

inline constexpr const char* kRecordsHeader =
    "epoch,loss_teacher,loss_student,effective_rate,pn_mean,tpn_mean,purity,nmi,ari,acc,"
    "match_entropy,probe_acc";

inline void write_records_csv(std::ostream& os, const std::vector<EpochRecord>& records) {
  auto num = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  os << kRecordsHeader << '\n';
  for (const auto& r : records) {
    os << r.epoch << ',' << num(r.loss_teacher) << ',' << num(r.loss_student) << ','
       << num(r.effective_rate) << ',' << num(r.pn_mean) << ',' << num(r.tpn_mean) << ','
       << num(r.purity) << ',' << num(r.nmi) << ',' << num(r.ari) << ',' << num(r.acc) << ','
       << num(r.match_entropy) << ',' << num(r.probe_acc) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Random single-row instances for the bound check

struct BoundInstance {
  ContrastBatch batch;  // 1 x K
  BinaryMask truth;     // 1 x K
};

namespace detail {

inline BoundInstance assemble(const std::vector<std::pair<double, std::pair<bool, bool>>>& cells, double tau) {
  BoundInstance inst{ContrastBatch{Matrix(1, cells.size()), BinaryMask(1, cells.size()), tau},
                     BinaryMask(1, cells.size())};
  for (std::size_t c = 0; c < cells.size(); ++c) {
    inst.batch.logits(0, c) = cells[c].first;
    inst.batch.labels.set(0, c, cells[c].second.first);
    inst.truth.set(0, c, cells[c].second.second);
  }
  return inst;
}

}  // namespace detail

/// Instance satisfying the premise of verify_bound: every TP logit above
/// every TN logit, every FN above every FP, |TP| >= |TN|, |FN| >= |FP|.
/// Logits are cosine similarities in [-1, 1] scaled by 1/tau.
inline BoundInstance premise_instance(RngStream& rng, double tau = 0.2) {
  const std::size_t n_tn = 1 + rng.below(6);
  const std::size_t n_tp = n_tn + rng.below(6);
  const std::size_t n_fp = 1 + rng.below(6);
  const std::size_t n_fn = n_fp + rng.below(6);
  const double split_a = rng.uniform(-0.9, 0.9);
  const double split_b = rng.uniform(-0.9, 0.9);
  std::vector<std::pair<double, std::pair<bool, bool>>> cells;
  for (std::size_t i = 0; i < n_tp; ++i) cells.push_back({rng.uniform(split_a, 1.0) / tau, {true, true}});
  for (std::size_t i = 0; i < n_tn; ++i) cells.push_back({rng.uniform(-1.0, split_a) / tau, {false, false}});
  for (std::size_t i = 0; i < n_fn; ++i) cells.push_back({rng.uniform(split_b, 1.0) / tau, {false, true}});
  for (std::size_t i = 0; i < n_fp; ++i) cells.push_back({rng.uniform(-1.0, split_b) / tau, {true, false}});
  rng.shuffle(cells);
  return detail::assemble(cells, tau);
}

/// Instance that violates the premise in one of four ways: an empty set, a
/// TN logit above a TP logit, an FP logit above an FN logit, or a
/// cardinality condition broken while the orderings hold.
inline BoundInstance violating_instance(RngStream& rng, double tau = 0.2) {
  BoundInstance inst = premise_instance(rng, tau);
  std::vector<std::pair<double, std::pair<bool, bool>>> cells;
  for (std::size_t c = 0; c < inst.batch.logits.cols(); ++c)
    cells.push_back({inst.batch.logits(0, c), {inst.batch.labels(0, c), inst.truth(0, c)}});
  auto of_kind = [&](bool pred, bool real) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (cells[c].second.first == pred && cells[c].second.second == real) out.push_back(c);
    return out;
  };
  switch (rng.below(4)) {
    case 0: {  // drop a whole set
      const bool pred = rng.bernoulli(0.5), real = rng.bernoulli(0.5);
      std::erase_if(cells, [&](const auto& c) { return c.second.first == pred && c.second.second == real; });
      break;
    }
    case 1: {  // some TN above the smallest TP
      const auto tp = of_kind(true, true);
      const auto tn = of_kind(false, false);
      double lo = cells[tp[0]].first;
      for (std::size_t c : tp) lo = std::min(lo, cells[c].first);
      cells[tn[rng.below(tn.size())]].first = lo + rng.uniform(0.0, 1.0) / tau;
      break;
    }
    case 2: {  // some FP above the smallest FN
      const auto fn = of_kind(false, true);
      const auto fp = of_kind(true, false);
      double lo = cells[fn[0]].first;
      for (std::size_t c : fn) lo = std::min(lo, cells[c].first);
      cells[fp[rng.below(fp.size())]].first = lo + rng.uniform(0.0, 1.0) / tau;
      break;
    }
    default: {  // more TN than TP, orderings intact
      const auto tp = of_kind(true, true);
      const auto tn = of_kind(false, false);
      double floor_tn = cells[tn[0]].first;
      for (std::size_t c : tn) floor_tn = std::min(floor_tn, cells[c].first);
      const std::size_t extra = tp.size() - tn.size() + 1 + rng.below(4);
      for (std::size_t i = 0; i < extra; ++i) cells.push_back({floor_tn, {false, false}});
      break;
    }
  }
  rng.shuffle(cells);
  return detail::assemble(cells, tau);
}

struct BoundSummary {
  std::size_t instances = 0;
  std::size_t premise_cases = 0;
  std::size_t premise_inequality_holds = 0;
  std::size_t ordering_cases = 0;
  std::size_t ordering_inequality_holds = 0;
};

/// Runs verify_bound over `count` instances: half built to satisfy the
/// premise, half violating it.
inline BoundSummary run_bound_check(std::size_t count, RngStream rng, std::ostream* detail_csv = nullptr) {
  BoundSummary s;
  if (detail_csv) *detail_csv << "instance,kind,premise_holds,ordering_holds,cross_lhs,cross_rhs,lhs,rhs,inequality_holds\n";
  for (std::size_t i = 0; i < count; ++i) {
    const bool want = i % 2 == 0;
    const BoundInstance inst = want ? premise_instance(rng) : violating_instance(rng);
    const BoundReport r = verify_bound(inst.batch, inst.truth).front();
    ++s.instances;
    if (r.premise_holds) {
      ++s.premise_cases;
      s.premise_inequality_holds += r.inequality_holds ? 1 : 0;
    }
    if (r.ordering_holds) {
      ++s.ordering_cases;
      s.ordering_inequality_holds += r.inequality_holds ? 1 : 0;
    }
    if (detail_csv)
      *detail_csv << i << ',' << (want ? "premise" : "violating") << ',' << r.premise_holds << ','
                  << r.ordering_holds << ',' << r.cross_lhs << ',' << r.cross_rhs << ',' << r.lhs << ','
                  << r.rhs << ',' << r.inequality_holds << '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// run_experiment

enum class Mode { kRekd, kNce, kSupmoco, kBounds, kKmeansDemo };

inline std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "rekd") return Mode::kRekd;
  if (s == "nce") return Mode::kNce;
  if (s == "supmoco") return Mode::kSupmoco;
  if (s == "bounds") return Mode::kBounds;
  if (s == "kmeans-demo") return Mode::kKmeansDemo;
  return std::nullopt;
}

struct ExperimentOptions {
  std::optional<std::uint64_t> seed;
  double purity = 1.0;
  std::size_t tpn_cap = kUnlimitedPositives;
  std::size_t bound_instances = 1000;
  std::size_t histogram_bins = 40;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

inline void write_histogram(const std::filesystem::path& p, const Histogram& h) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  h.write_csv(os);
}

}  // namespace detail

/// The labeled dataset every training mode uses for `cfg`.
inline LabeledDataset dataset_for(const TrainConfig& cfg) {
  return generate_mixture(cfg.mixture, RngStream(cfg.seed).split(0xda7a));
}

/// Executes one mode and writes its artifacts to out_dir. Returns a process
/// exit code: 0 on success, 2 for unreadable/invalid inputs, 1 otherwise.
inline int run_experiment(const std::string& cfg_path, const std::string& out_dir, Mode mode,
                          const ExperimentOptions& opts = {}, std::ostream& log = std::cout,
                          std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  TrainConfig cfg;
  if (!fs::exists(cfg_path)) {
    err << "error: config file not found: " << cfg_path << '\n';
    return 2;
  }
  try {
    cfg = load_config(cfg_path);
    if (opts.seed) cfg.seed = *opts.seed;
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  try {
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    detail::write_text(out / "config.resolved.json", to_json(cfg).dump(2) + "\n");

    auto write_records = [&](const std::vector<EpochRecord>& recs) {
      std::ofstream os(out / "records.csv", std::ios::binary);
      if (!os) throw std::runtime_error("cannot write records.csv");
      write_records_csv(os, recs);
    };
    auto log_records = [&](const EpochRecord& r) {
      log << "epoch " << r.epoch << " loss_t=" << r.loss_teacher << " loss_s=" << r.loss_student
          << " eff=" << r.effective_rate << " purity=" << r.purity << " nmi=" << r.nmi
          << " probe=" << r.probe_acc << std::endl;
    };
    TrainHooks hooks;
    hooks.on_epoch = log_records;

    switch (mode) {
      case Mode::kRekd: {
        const LabeledDataset data = dataset_for(cfg);
        const RekdResult res = train_rekd(cfg, data, hooks);
        write_records(res.records);
        std::vector<NamedMatrix> ckpt;
        append_encoder(ckpt, "student", res.student);
        append_encoder(ckpt, "teacher", res.teacher);
        if (res.bank) ckpt.push_back({"protobank", res.bank->prototypes()});
        save_checkpoint((out / "model.ckpt").string(), ckpt);
        detail::write_histogram(out / "similarity_teacher.csv",
                                similarity_histogram(forward(res.teacher, data.points).z, data.labels, opts.histogram_bins));
        detail::write_histogram(out / "similarity_student.csv",
                                similarity_histogram(forward(res.student, data.points).z, data.labels, opts.histogram_bins));
        break;
      }
      case Mode::kNce: {
        const LabeledDataset data = dataset_for(cfg);
        const SingleResult res = train_baseline_nce(cfg, data, hooks);
        write_records(res.records);
        std::vector<NamedMatrix> ckpt;
        append_encoder(ckpt, "student", res.encoder);
        save_checkpoint((out / "model.ckpt").string(), ckpt);
        detail::write_histogram(out / "similarity_student.csv",
                                similarity_histogram(forward(res.encoder, data.points).z, data.labels, opts.histogram_bins));
        break;
      }
      case Mode::kSupmoco: {
        const LabeledDataset data = dataset_for(cfg);
        const SingleResult res = train_supmoco(cfg, data, opts.purity, opts.tpn_cap, hooks);
        write_records(res.records);
        std::vector<NamedMatrix> ckpt;
        append_encoder(ckpt, "student", res.encoder);
        save_checkpoint((out / "model.ckpt").string(), ckpt);
        break;
      }
      case Mode::kBounds: {
        std::ofstream detail_csv(out / "bounds_instances.csv", std::ios::binary);
        const BoundSummary s = run_bound_check(opts.bound_instances, RngStream(cfg.seed).split(0xb0d), &detail_csv);
        nlohmann::json rep = {
            {"instances", s.instances},
            {"premise_cases", s.premise_cases},
            {"premise_inequality_holds", s.premise_inequality_holds},
            {"premise_holds_rate", s.premise_cases ? double(s.premise_inequality_holds) / double(s.premise_cases) : 0.0},
            {"ordering_cases", s.ordering_cases},
            {"ordering_inequality_holds", s.ordering_inequality_holds},
        };
        detail::write_text(out / "bounds_report.json", rep.dump(2) + "\n");
        log << "bounds: " << s.premise_inequality_holds << "/" << s.premise_cases
            << " premise-satisfying instances satisfy both inequalities\n";
        break;
      }
      case Mode::kKmeansDemo: {
        const LabeledDataset data = dataset_for(cfg);
        const KMeansResult km = spherical_kmeans(data.points, cfg.mixture.num_classes, cfg.kmeans_iters,
                                                 RngStream(cfg.seed).split(0xc1));
        nlohmann::json rep = {{"clusters", cfg.mixture.num_classes},
                              {"rounds", km.rounds},
                              {"objective", km.objective},
                              {"ari", ari(km.assignment, data.labels)},
                              {"nmi", nmi(km.assignment, data.labels)},
                              {"acc", cluster_acc(km.assignment, data.labels)}};
        detail::write_text(out / "kmeans_report.json", rep.dump(2) + "\n");
        save_checkpoint((out / "model.ckpt").string(), {{"protobank", km.centroids}});
        log << "kmeans-demo: ari=" << rep["ari"] << " nmi=" << rep["nmi"] << " acc=" << rep["acc"] << '\n';
        break;
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace rekd

#endif  // REKD_EXPERIMENT_HPP_
