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

// rekd-lab <mode> --config <path> --out <dir> [--seed N] [--purity F] [--tpn-cap N]

#include <iostream>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "rekd/experiment.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Per-batch logit buffers are a few MB; keep them on the heap instead of
  // round-tripping through mmap on every step.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"Relation knowledge distillation lab"};
  std::string mode_name, config, out;
  std::uint64_t seed = 0;
  double purity = 1.0;
  std::size_t tpn_cap = 0;
  std::size_t instances = 1000;

  app.add_option("mode", mode_name, "rekd | nce | supmoco | bounds | kmeans-demo")->required();
  app.add_option("--config", config, "JSON training config")->required();
  app.add_option("--out", out, "output directory")->required();
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--purity", purity, "supmoco: target purity of the positive set")->check(CLI::Range(0.0, 1.0));
  app.add_option("--tpn-cap", tpn_cap, "supmoco: max true positives per anchor (0 = unlimited)");
  app.add_option("--instances", instances, "bounds: number of random instances");
  CLI11_PARSE(app, argc, argv);

  const auto mode = rekd::parse_mode(mode_name);
  if (!mode) {
    std::cerr << "error: unknown mode '" << mode_name << "'\n";
    return 2;
  }
  rekd::ExperimentOptions opts;
  if (seed_opt->count()) opts.seed = seed;
  opts.purity = purity;
  if (tpn_cap) opts.tpn_cap = tpn_cap;
  opts.bound_instances = instances;
  return rekd::run_experiment(config, out, *mode, opts);
}
