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

#ifndef REKD_CONFIG_HPP_
#define REKD_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rekd/synth_data.hpp"

namespace rekd {

/// Every knob of a training run. JSON keys are exactly these field names;
/// missing keys keep their defaults, unknown keys are rejected.
struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  std::size_t embed_dim = 32;
  std::vector<std::size_t> teacher_dims = {256, 256};  // hidden widths
  std::vector<std::size_t> student_dims = {64};        // hidden widths
  double lr_teacher = 0.05;
  double lr_student = 0.05;
  double sgd_momentum = 0.9;
  double weight_decay = 1e-4;
  double mean_teacher_m = 0.999;
  double tau = 0.2;
  std::size_t queue_capacity = 4096;
  std::size_t num_prototypes = 50;
  double theta = 0.8;
  double beta = 0.8;
  std::size_t warmup_epochs = 3;
  bool include_self_positive = true;
  MixtureSpec mixture{};
  AugmentSpec augment{};
  std::size_t kmeans_iters = 50;
  std::size_t probe_epochs = 30;
  double probe_lr = 0.1;
  std::size_t probe_every = 0;  // 0: probe after the final epoch only

  std::vector<std::size_t> teacher_layers() const { return layers(teacher_dims); }
  std::vector<std::size_t> student_layers() const { return layers(student_dims); }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
    mixture.validate();
    augment.validate();
    if (epochs == 0) fail("epochs must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (embed_dim == 0) fail("embed_dim must be positive");
    for (std::size_t w : teacher_dims)
      if (w == 0) fail("teacher_dims entries must be positive");
    for (std::size_t w : student_dims)
      if (w == 0) fail("student_dims entries must be positive");
    if (!(lr_teacher > 0) || !(lr_student > 0)) fail("learning rates must be positive");
    if (!(sgd_momentum >= 0 && sgd_momentum < 1)) fail("sgd_momentum must be in [0,1)");
    if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
    if (!(mean_teacher_m >= 0 && mean_teacher_m <= 1)) fail("mean_teacher_m must be in [0,1]");
    if (!(tau > 0)) fail("tau must be positive");
    if (queue_capacity < batch_size) fail("queue_capacity must be >= batch_size");
    if (num_prototypes == 0) fail("num_prototypes must be positive");
    if (!(theta > 0 && theta <= 1)) fail("theta must be in (0,1]");
    if (!(beta > 0 && beta < 1)) fail("beta must be in (0,1)");
    if (warmup_epochs > epochs) fail("warmup_epochs must not exceed epochs");
    if (kmeans_iters == 0) fail("kmeans_iters must be positive");
    if (!(probe_lr > 0)) fail("probe_lr must be positive");
  }

  bool operator==(const TrainConfig&) const = default;

 private:
  std::vector<std::size_t> layers(const std::vector<std::size_t>& hidden) const {
    std::vector<std::size_t> out{mixture.dim};
    out.insert(out.end(), hidden.begin(), hidden.end());
    out.push_back(embed_dim);
    return out;
  }
};

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"embed_dim", c.embed_dim},
      {"teacher_dims", c.teacher_dims},
      {"student_dims", c.student_dims},
      {"lr_teacher", c.lr_teacher},
      {"lr_student", c.lr_student},
      {"sgd_momentum", c.sgd_momentum},
      {"weight_decay", c.weight_decay},
      {"mean_teacher_m", c.mean_teacher_m},
      {"tau", c.tau},
      {"queue_capacity", c.queue_capacity},
      {"num_prototypes", c.num_prototypes},
      {"theta", c.theta},
      {"beta", c.beta},
      {"warmup_epochs", c.warmup_epochs},
      {"include_self_positive", c.include_self_positive},
      {"mixture",
       {{"num_classes", c.mixture.num_classes},
        {"dim", c.mixture.dim},
        {"samples_per_class", c.mixture.samples_per_class},
        {"class_sep", c.mixture.class_sep},
        {"within_std", c.mixture.within_std}}},
      {"augment", {{"noise_std", c.augment.noise_std}, {"dropout_prob", c.augment.dropout_prob}}},
      {"kmeans_iters", c.kmeans_iters},
      {"probe_epochs", c.probe_epochs},
      {"probe_lr", c.probe_lr},
      {"probe_every", c.probe_every},
  };
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kTop = {
      "seed",          "epochs",         "batch_size",    "embed_dim",    "teacher_dims",
      "student_dims",  "lr_teacher",     "lr_student",    "sgd_momentum", "weight_decay",
      "mean_teacher_m", "tau",           "queue_capacity", "num_prototypes", "theta",
      "beta",          "warmup_epochs",  "include_self_positive", "mixture", "augment",
      "kmeans_iters",  "probe_epochs",   "probe_lr",      "probe_every"};
  static const std::set<std::string> kMixture = {"num_classes", "dim", "samples_per_class",
                                                 "class_sep", "within_std"};
  static const std::set<std::string> kAugment = {"noise_std", "dropout_prob"};
  detail::reject_unknown(j, kTop, "config");
  TrainConfig c;
  try {
    detail::read_key(j, "seed", c.seed);
    detail::read_key(j, "epochs", c.epochs);
    detail::read_key(j, "batch_size", c.batch_size);
    detail::read_key(j, "embed_dim", c.embed_dim);
    detail::read_key(j, "teacher_dims", c.teacher_dims);
    detail::read_key(j, "student_dims", c.student_dims);
    detail::read_key(j, "lr_teacher", c.lr_teacher);
    detail::read_key(j, "lr_student", c.lr_student);
    detail::read_key(j, "sgd_momentum", c.sgd_momentum);
    detail::read_key(j, "weight_decay", c.weight_decay);
    detail::read_key(j, "mean_teacher_m", c.mean_teacher_m);
    detail::read_key(j, "tau", c.tau);
    detail::read_key(j, "queue_capacity", c.queue_capacity);
    detail::read_key(j, "num_prototypes", c.num_prototypes);
    detail::read_key(j, "theta", c.theta);
    detail::read_key(j, "beta", c.beta);
    detail::read_key(j, "warmup_epochs", c.warmup_epochs);
    detail::read_key(j, "include_self_positive", c.include_self_positive);
    detail::read_key(j, "kmeans_iters", c.kmeans_iters);
    detail::read_key(j, "probe_epochs", c.probe_epochs);
    detail::read_key(j, "probe_lr", c.probe_lr);
    detail::read_key(j, "probe_every", c.probe_every);
    if (j.contains("mixture")) {
      const auto& m = j.at("mixture");
      detail::reject_unknown(m, kMixture, "config.mixture");
      detail::read_key(m, "num_classes", c.mixture.num_classes);
      detail::read_key(m, "dim", c.mixture.dim);
      detail::read_key(m, "samples_per_class", c.mixture.samples_per_class);
      detail::read_key(m, "class_sep", c.mixture.class_sep);
      detail::read_key(m, "within_std", c.mixture.within_std);
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      detail::reject_unknown(a, kAugment, "config.augment");
      detail::read_key(a, "noise_std", c.augment.noise_std);
      detail::read_key(a, "dropout_prob", c.augment.dropout_prob);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace rekd

#endif  // REKD_CONFIG_HPP_
