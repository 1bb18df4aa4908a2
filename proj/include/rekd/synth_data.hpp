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

#ifndef REKD_SYNTH_DATA_HPP_
#define REKD_SYNTH_DATA_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekd/numerics.hpp"

namespace rekd {

/// Labeled Gaussian mixture on the unit sphere.
struct MixtureSpec {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  std::size_t samples_per_class = 1000;
  double class_sep = 0.5;  // minimum pairwise angle between class means, radians
  double within_std = 0.1;

  void validate() const {
    if (num_classes < 2) throw std::invalid_argument("MixtureSpec: num_classes must be >= 2");
    if (dim < 1) throw std::invalid_argument("MixtureSpec: dim must be >= 1");
    if (samples_per_class < 1)
      throw std::invalid_argument("MixtureSpec: samples_per_class must be >= 1");
    if (!(class_sep > 0)) throw std::invalid_argument("MixtureSpec: class_sep must be > 0");
    if (!(within_std >= 0)) throw std::invalid_argument("MixtureSpec: within_std must be >= 0");
  }

  bool operator==(const MixtureSpec&) const = default;
};

struct LabeledDataset {
  Matrix points;            // N x dim, unit rows
  std::vector<int> labels;  // class per row
  std::size_t num_classes = 0;

  std::size_t size() const { return points.rows(); }
  std::size_t dim() const { return points.cols(); }
};

struct AugmentSpec {
  double noise_std = 0.1;
  double dropout_prob = 0.1;

  void validate() const {
    if (!(noise_std >= 0)) throw std::invalid_argument("AugmentSpec: noise_std must be >= 0");
    if (!(dropout_prob >= 0 && dropout_prob < 1))
      throw std::invalid_argument("AugmentSpec: dropout_prob must be in [0,1)");
  }

  bool operator==(const AugmentSpec&) const = default;
};

inline constexpr int kMaxMeanTries = 10000;

/// Class means are rejection-sampled so every pair is at least class_sep
/// apart in angle. Samples are class-major: rows [c*n, (c+1)*n) have label c.
///
/// A zero within_std is accepted here so the noiseless case can be
/// generated; MixtureSpec::validate() only requires within_std >= 0.
inline LabeledDataset generate_mixture(const MixtureSpec& spec, RngStream rng) {
  spec.validate();
  RngStream mean_rng = rng.split(1);
  RngStream noise_rng = rng.split(2);

  Matrix means(spec.num_classes, spec.dim);
  const double min_cos = std::cos(spec.class_sep);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxMeanTries && !placed; ++attempt) {
      std::vector<double> v(spec.dim);
      for (double& x : v) x = mean_rng.normal();
      const double n = norm2(v);
      if (n < kDegenerateNormEps) continue;
      for (double& x : v) x /= n;
      placed = true;
      for (std::size_t prev = 0; prev < c && placed; ++prev) {
        // angle >= sep  <=>  cos <= cos(sep)
        if (dot(v, means.row(prev)) > min_cos) placed = false;
      }
      if (placed) std::copy(v.begin(), v.end(), means.row(c).begin());
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "generate_mixture: could not place class mean " << c << " of " << spec.num_classes
          << " in dim " << spec.dim << " with separation " << spec.class_sep << " rad after "
          << kMaxMeanTries << " tries";
      throw std::runtime_error(msg.str());
    }
  }

  const std::size_t n = spec.num_classes * spec.samples_per_class;
  LabeledDataset out;
  out.num_classes = spec.num_classes;
  out.labels.resize(n);
  Matrix raw(n, spec.dim);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      const std::size_t i = c * spec.samples_per_class + s;
      out.labels[i] = static_cast<int>(c);
      auto row = raw.row(i);
      for (std::size_t d = 0; d < spec.dim; ++d) {
        row[d] = means(c, d) + (spec.within_std > 0 ? spec.within_std * noise_rng.normal() : 0.0);
      }
    }
  }
  out.points = l2_normalize_rows(raw).values;
  return out;
}

/// Additive noise, then per-coordinate dropout, then renormalization. Rows
/// whose coordinates were all dropped come back flagged degenerate.
inline NormalizedRows augment(const Matrix& points, const AugmentSpec& spec, RngStream rng) {
  spec.validate();
  if (spec.noise_std == 0 && spec.dropout_prob == 0) {
    NormalizedRows same{points, std::vector<bool>(points.rows(), false)};
    for (std::size_t r = 0; r < points.rows(); ++r) same.degenerate[r] = norm2(points.row(r)) < kDegenerateNormEps;
    return same;
  }
  Matrix out = points;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (double& v : out.row(r)) {
      if (spec.noise_std > 0) v += spec.noise_std * rng.normal();
      if (spec.dropout_prob > 0 && rng.bernoulli(spec.dropout_prob)) v = 0.0;
    }
  }
  return l2_normalize_rows(out);
}

// ---------------------------------------------------------------------------
// Text dump: header "N dim num_classes", then "label v1 ... vdim" per row.

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline void write_dataset(std::ostream& os, const LabeledDataset& data) {
  os << data.size() << ' ' << data.dim() << ' ' << data.num_classes << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.labels[i];
    for (double v : data.points.row(i)) os << ' ' << detail::format_double(v);
    os << '\n';
  }
}

inline LabeledDataset read_dataset(std::istream& is) {
  std::size_t n = 0, dim = 0, classes = 0;
  if (!(is >> n >> dim >> classes)) throw std::runtime_error("read_dataset: malformed header");
  LabeledDataset out;
  out.num_classes = classes;
  out.points = Matrix(n, dim);
  out.labels.resize(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> out.labels[i]))
      throw std::runtime_error("read_dataset: missing label on row " + std::to_string(i));
    if (out.labels[i] < 0 || static_cast<std::size_t>(out.labels[i]) >= classes)
      throw std::runtime_error("read_dataset: label out of range on row " + std::to_string(i));
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(is >> tok))
        throw std::runtime_error("read_dataset: truncated row " + std::to_string(i));
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw std::runtime_error("read_dataset: bad value '" + tok + "' on row " +
                                 std::to_string(i));
      out.points(i, d) = v;
    }
  }
  return out;
}

inline void save_dataset(const std::string& path, const LabeledDataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  write_dataset(os, data);
}

inline LabeledDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  return read_dataset(is);
}

}  // namespace rekd

#endif  // REKD_SYNTH_DATA_HPP_
