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

// Acceptance suite: one PASS/FAIL line per criterion. Criteria can be
// selected with --only (comma separated ids); the desk-scale training
// criteria share their runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "oracles.hpp"
#include "rekd/experiment.hpp"

namespace {

using namespace rekd;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& title, const Outcome& o, double secs) {
  std::printf("[%s] C%-2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

ContrastBatch random_batch(RngStream& rng, std::size_t n, std::size_t k) {
  ContrastBatch b{Matrix(n, k), BinaryMask(n, k), 0.2};
  for (double& v : b.logits.data()) v = rng.uniform(-1.0, 1.0) / 0.2;
  return b;
}

// --- C1 ---------------------------------------------------------------
Outcome one_positive_reduction() {
  RngStream rng(101);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    ContrastBatch b = random_batch(rng, 1 + rng.below(16), 2 + rng.below(128));
    for (std::size_t r = 0; r < b.logits.rows(); ++r) b.labels.set(r, rng.below(b.logits.cols()), true);
    worst = std::max(worst, std::abs(relcon_loss(b).value - nce_loss(b).value));
  }
  return {worst <= 1e-12, fmt("max |relcon - nce| = %.3g over 200 batches", worst)};
}

// --- C2 ---------------------------------------------------------------
Outcome loss_gradient_oracle() {
  RngStream rng(202);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 3 + rng.below(30);
    ContrastBatch b = random_batch(rng, 3 + rng.below(4), k);
    for (std::size_t r = 0; r < b.logits.rows(); ++r) {
      // Row 0: no positive, row 1: one, the rest: a random number >= 2.
      if (r == 0) continue;
      if (r == 1) {
        b.labels.set(r, rng.below(k), true);
        continue;
      }
      const std::size_t many = 2 + rng.below(k - 2);
      for (std::size_t c = 0; c < many; ++c) b.labels.set(r, c, true);
    }
    const LossOutput out = relcon_loss(b);
    std::vector<double>& x = b.logits.data();
    const auto fd = oracle::fd_gradient(x, [&] { return relcon_loss(b).value; }, 1e-6);
    worst = std::max(worst, oracle::rel_err(out.grad_logits.data(), fd));
  }
  return {worst < 1e-8, fmt("max rel-err = %.3g over 50 instances", worst)};
}

// --- C3 ---------------------------------------------------------------
double e2e_objective(const MlpEncoder& enc, const Matrix& x, const Matrix& cands, const BinaryMask& labels,
                     double tau, Matrix* dz_out) {
  const ForwardResult fr = forward(enc, x);
  ContrastBatch b{matmul_nt(fr.z, cands), labels, tau};
  for (double& v : b.logits.data()) v /= tau;
  const LossOutput out = relcon_loss(b);
  if (dz_out) {
    *dz_out = matmul(out.grad_logits, cands);
    for (double& v : dz_out->data()) v /= tau;
  }
  return out.value;
}

Outcome end_to_end_gradient() {
  RngStream rng(303);
  const double tau = 0.2;
  MlpEncoder enc({6, 8, 8}, rng.split(1));
  for (std::size_t l = 0; l < enc.num_layers(); ++l)
    for (double& v : enc.mutable_bias(l).data()) v = rng.uniform(-0.2, 0.2);
  Matrix x(10, 6), cands(24, 8);
  for (double& v : x.data()) v = rng.normal();
  for (double& v : cands.data()) v = rng.normal();
  cands = l2_normalize_rows(cands).values;
  BinaryMask labels(10, 24);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 24; ++j) labels.set(i, j, rng.bernoulli(0.25));

  Matrix dz;
  e2e_objective(enc, x, cands, labels, tau, &dz);
  const auto analytic = oracle::flatten(backward(enc, forward(enc, x).cache, dz));
  std::vector<double> p = oracle::flatten(enc);
  MlpEncoder probe = enc;
  const auto numeric = oracle::fd_gradient(p, [&] {
    oracle::unflatten(probe, p);
    return e2e_objective(probe, x, cands, labels, tau, nullptr);
  }, 1e-6);
  const double err = oracle::rel_err(analytic, numeric);
  return {err < 1e-6, fmt("max rel-err = %.3g over %zu parameters", err, analytic.size())};
}

// --- C4 ---------------------------------------------------------------
Outcome bound_verification() {
  RngStream rng(404);
  std::size_t held = 0, flagged = 0;
  for (int t = 0; t < 1000; ++t) {
    const BoundInstance inst = premise_instance(rng);
    const BoundReport r = verify_bound(inst.batch, inst.truth)[0];
    held += (r.premise_holds && r.inequality_holds) ? 1 : 0;
  }
  for (int t = 0; t < 1000; ++t) {
    const BoundInstance inst = violating_instance(rng);
    flagged += verify_bound(inst.batch, inst.truth)[0].premise_holds ? 0 : 1;
  }
  return {held == 1000 && flagged == 1000,
          fmt("inequality holds on %zu/1000 premise instances; premise false on %zu/1000 violating", held, flagged)};
}

// --- C5 ---------------------------------------------------------------
Outcome miner_oracle() {
  RngStream rng(505);
  std::size_t agree = 0, with_outliers = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(16), l = 1 + rng.below(64), m = 1 + rng.below(8);
    std::vector<int> anchor(n), queue(l);
    for (int& v : anchor) v = static_cast<int>(rng.below(m + 1)) - 1;
    for (int& v : queue) v = static_cast<int>(rng.below(m + 1)) - 1;
    with_outliers += std::count(anchor.begin(), anchor.end(), -1) > 0 ? 1 : 0;
    agree += mine_relations(anchor, queue).labels == oracle::mine_relations(anchor, queue) ? 1 : 0;
  }
  return {agree == 100, fmt("%zu/100 exact matches (%zu instances with outlier anchors)", agree, with_outliers)};
}

// --- C6 ---------------------------------------------------------------
Outcome metric_oracles() {
  RngStream rng(606);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(63);
    std::vector<int> a(n), b(n);
    const std::size_t ka = 1 + rng.below(8), kb = 1 + rng.below(8);
    for (int& v : a) v = static_cast<int>(rng.below(ka)) - 1;
    for (int& v : b) v = static_cast<int>(rng.below(kb));
    worst = std::max(worst, std::abs(nmi(a, b) - oracle::nmi(a, b)));
    worst = std::max(worst, std::abs(ari(a, b) - oracle::ari(a, b)));
    worst = std::max(worst, std::abs(cluster_acc(a, b) - oracle::cluster_acc(a, b)));
    BinaryMask labels(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) labels.set(i, j, rng.bernoulli(0.3));
    worst = std::max(worst, std::abs(relation_quality(labels, b, a).purity - oracle::purity(labels, b, a)));
  }
  return {worst <= 1e-9, fmt("max |lib - oracle| = %.3g over 50 partitions (NMI, ARI, ACC, purity)", worst)};
}

// --- C8 ---------------------------------------------------------------
Outcome kmeans_sanity() {
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const LabeledDataset d = generate_mixture(MixtureSpec{3, 32, 200, 1.0, 0.05}, RngStream(seed));
    const KMeansResult km = spherical_kmeans(d.points, 3, 100, RngStream(seed).split(7));
    worst = std::min(worst, ari(km.assignment, d.labels));
  }
  return {worst >= 0.99, fmt("min ARI over 5 seeds = %.4f", worst)};
}

// --- Desk runs: C7, C9, C10, C12 -----------------------------------------
struct DeskArm {
  double probe = 0.0;
  double hist_mean = 0.0;
  double init_rate = 0.0;
  double final_rate = 0.0;
  std::string records_csv;
};

std::string records_text(const std::vector<EpochRecord>& recs) {
  std::ostringstream os;
  write_records_csv(os, recs);
  return os.str();
}

void save_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

struct InvariantLog {
  std::size_t updates = 0;
  std::size_t bad_m = 0;
  std::size_t bad_norm = 0;
  double min_m = 1.0, max_m = 0.0, worst_norm = 0.0;
};

DeskArm run_rekd_arm(const TrainConfig& cfg, InvariantLog* inv) {
  const LabeledDataset data = dataset_for(cfg);
  TrainHooks hooks;
  if (inv) {
    hooks.on_prototype_update = [&](std::span<const double> ms, const PrototypeBank& bank) {
      for (double m : ms) {
        ++inv->updates;
        inv->min_m = std::min(inv->min_m, m);
        inv->max_m = std::max(inv->max_m, m);
        if (!(m >= bank.beta() && m <= 1.0)) ++inv->bad_m;
      }
      for (std::size_t k = 0; k < bank.size(); ++k) {
        const double dev = std::abs(norm2(bank.prototypes().row(k)) - 1.0);
        inv->worst_norm = std::max(inv->worst_norm, dev);
        if (dev > 1e-9) ++inv->bad_norm;
      }
    };
  }
  const RekdResult r = train_rekd(cfg, data, hooks);
  DeskArm arm;
  arm.probe = r.records.back().probe_acc;
  arm.hist_mean = similarity_histogram(forward(r.teacher, data.points).z, data.labels, 40).mean;
  arm.init_rate = r.init_effective_rate;
  arm.final_rate = r.records.back().effective_rate;
  arm.records_csv = records_text(r.records);
  return arm;
}

DeskArm run_nce_arm(const TrainConfig& cfg) {
  const LabeledDataset data = dataset_for(cfg);
  const SingleResult r = train_baseline_nce(cfg, data);
  DeskArm arm;
  arm.probe = r.records.back().probe_acc;
  arm.hist_mean = similarity_histogram(forward(r.encoder, data.points).z, data.labels, 40).mean;
  arm.records_csv = records_text(r.records);
  return arm;
}

void desk_criteria(const std::set<int>& want, const std::string& config_path, const std::filesystem::path& out) {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const TrainConfig base = load_config(config_path);
  std::vector<DeskArm> rekd_arms, nce_arms;
  InvariantLog inv;
  const auto t0 = Clock::now();
  double c7_secs = 0.0;
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    const auto ta = Clock::now();
    rekd_arms.push_back(run_rekd_arm(cfg, &inv));
    if (seed == seeds.front()) c7_secs = seconds_since(ta);
    save_text(out / ("rekd_seed" + std::to_string(seed)) / "records.csv", rekd_arms.back().records_csv);
    if (want.contains(9)) {
      nce_arms.push_back(run_nce_arm(cfg));
      save_text(out / ("nce_seed" + std::to_string(seed)) / "records.csv", nce_arms.back().records_csv);
    }
    std::printf("       desk seed %llu done (%.0f s elapsed)\n", static_cast<unsigned long long>(seed), seconds_since(t0));
    std::fflush(stdout);
  }
  const double desk_secs = seconds_since(t0);

  if (want.contains(7)) {
    report(7, "prototype invariants during desk runs",
           {inv.updates > 0 && inv.bad_m == 0 && inv.bad_norm == 0,
            fmt("%zu updates over 3 seeds, m in [%.4f, %.4f] (beta %.2f), max | |p|-1 | = %.2g", inv.updates,
                inv.min_m, inv.max_m, base.beta, inv.worst_norm)},
           c7_secs);
  }
  if (want.contains(9)) {
    double rk = 0, nc = 0, hr = 0, hn = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      rk += rekd_arms[s].probe / 3.0;
      nc += nce_arms[s].probe / 3.0;
      hr += rekd_arms[s].hist_mean / 3.0;
      hn += nce_arms[s].hist_mean / 3.0;
    }
    const double gap_pp = 100.0 * (rk - nc);
    const bool ok = gap_pp >= 3.0 && hr > hn && desk_secs < 15 * 60;
    report(9, "desk ReKD vs NCE",
           {ok, fmt("probe rekd %.4f vs nce %.4f (gap %+.2f pp, need >= 3); same-class cos teacher %.4f vs "
                    "baseline %.4f; %.0f s (limit 900)",
                    rk, nc, gap_pp, hr, hn, desk_secs)},
           desk_secs);
  }
  if (want.contains(10)) {
    bool ok = true;
    std::string detail;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& a = rekd_arms[s];
      ok = ok && a.final_rate >= 0.9 && a.final_rate >= a.init_rate;
      detail += fmt("%sseed %zu: init %.4f -> final %.4f", s ? "; " : "", static_cast<std::size_t>(seeds[s]),
                    a.init_rate, a.final_rate);
    }
    report(10, "effective-rate trend", {ok, detail}, 0.0);
  }
  if (want.contains(12)) {
    const auto t1 = Clock::now();
    TrainConfig cfg = base;
    cfg.seed = seeds.front();
    const DeskArm again = run_rekd_arm(cfg, nullptr);
    save_text(out / "rekd_seed1_rerun" / "records.csv", again.records_csv);
    const bool same = again.records_csv == rekd_arms.front().records_csv;
    report(12, "determinism", {same, fmt("records.csv of two seed-%llu runs %s (%zu bytes)",
                                         static_cast<unsigned long long>(seeds.front()),
                                         same ? "byte-identical" : "DIFFER", again.records_csv.size())},
           seconds_since(t1));
  }
}

// --- C11 ----------------------------------------------------------------
Outcome supmoco_purity(const std::string& config_path, const std::filesystem::path& out) {
  const TrainConfig base = load_config(config_path);
  const std::vector<double> purities{0.2, 0.5, 1.0};
  std::vector<double> mean(purities.size(), 0.0);
  for (std::size_t p = 0; p < purities.size(); ++p) {
    for (std::uint64_t seed : {1, 2, 3}) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      const SingleResult r = train_supmoco(cfg, dataset_for(cfg), purities[p], 5);
      mean[p] += r.records.back().probe_acc / 3.0;
      save_text(out / fmt("supmoco_p%.1f_seed%llu", purities[p], static_cast<unsigned long long>(seed)) / "records.csv",
                records_text(r.records));
    }
  }
  bool ok = true;
  for (std::size_t p = 1; p < mean.size(); ++p) ok = ok && mean[p] >= mean[p - 1] - 0.01;
  return {ok, fmt("mean probe at purity 0.2/0.5/1.0 = %.4f / %.4f / %.4f (tpn_cap 5, 3 seeds)", mean[0], mean[1],
                  mean[2])};
}

std::set<int> parse_ids(const std::string& s) {
  std::set<int> ids;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) ids.insert(std::stoi(tok));
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"ReKD acceptance suite"};
  std::string only = "1,2,3,4,5,6,7,8,9,10,11,12";
  std::string config = REKD_DESK_CONFIG;
  std::string out = "acceptance_runs";
  app.add_option("--only", only, "Comma-separated criterion ids");
  app.add_option("--config", config, "Desk configuration");
  app.add_option("--out", out, "Directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> want = parse_ids(only);

  struct Quick {
    int id;
    const char* title;
    std::function<Outcome()> fn;
    double budget_s;
  };
  const std::vector<Quick> quick{
      {1, "one-positive reduction", one_positive_reduction, 1.0},
      {2, "loss gradient oracle", loss_gradient_oracle, 5.0},
      {3, "end-to-end gradient check", end_to_end_gradient, 30.0},
      {4, "bound verification", bound_verification, 5.0},
      {5, "relation-miner oracle", miner_oracle, 60.0},
      {6, "metric oracles", metric_oracles, 60.0},
      {8, "spherical k-means sanity", kmeans_sanity, 60.0},
  };
  for (const auto& q : quick) {
    if (!want.contains(q.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = q.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs >= q.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over %.0f s budget]", q.budget_s);
    }
    report(q.id, q.title, o, secs);
  }

  const std::set<int> desk_ids{7, 9, 10, 12};
  std::set<int> desk_want;
  for (int id : want)
    if (desk_ids.contains(id)) desk_want.insert(id);
  if (!desk_want.empty()) {
    try {
      desk_criteria(desk_want, config, out);
    } catch (const std::exception& e) {
      for (int id : desk_want) report(id, "desk run", {false, std::string("threw: ") + e.what()}, 0.0);
    }
  }
  if (want.contains(11)) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = supmoco_purity(config, out);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs >= 20 * 60) {
      o.pass = false;
      o.detail += " [over 1200 s budget]";
    }
    report(11, "SupMoCo purity trend", o, secs);
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
