#include "divlab/synth.hpp"

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace divlab {

void validate(const Architecture& a) {
  if (a.d_in < 1 || a.n_u < 1 || a.K < 1 || a.K_so < 1 || a.K_ta < 1 || a.p < 1 || a.T < 1)
    throw ContractError("architecture dimensions must all be >= 1");
  if (a.hidden != Activation::relu && a.hidden != Activation::identity)
    throw ContractError("hidden activation must be relu or identity");
}

namespace {

Activation chain_activation(std::size_t i, std::size_t last, Activation hidden) {
  return i == last ? Activation::identity : hidden;
}

// Rows of the result are orthonormal: the first p columns of Q from a QR
// factorization of an n_u x n_u Gaussian matrix, sign-fixed so R has a
// positive diagonal. Nested in p for a fixed seed.
Mat orthonormal_rows(std::size_t p, std::size_t n_u, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(n_u);
  Mat g(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  return q.leftCols(static_cast<Eigen::Index>(p)).transpose();
}

}  // namespace

GroundTruth make_ground_truth(const Architecture& arch, std::uint64_t seed, double noise_sigma) {
  validate(arch);
  if (!(noise_sigma >= 0.0)) throw ContractError("noise_sigma must be >= 0");
  GroundTruth gt;
  gt.arch = arch;
  gt.noise_sigma = noise_sigma;
  const double sd = 1.0 / std::sqrt(static_cast<double>(arch.n_u));

  const std::size_t chain = arch.K + arch.K_ta;
  for (std::size_t i = 0; i < chain; ++i) {
    const std::size_t in = i == 0 ? arch.d_in : arch.n_u;
    const std::size_t out = i + 1 == chain ? 1 : arch.n_u;
    Dense layer = gaussian_layer(in, out, sd, chain_activation(i, chain - 1, arch.hidden), derive_seed(seed, "chain", i));
    (i < arch.K ? gt.h_star : gt.f_target).layers.push_back(std::move(layer));
  }

  for (std::size_t t = 0; t < arch.T; ++t) {
    Mlp head;
    const std::uint64_t task_seed = derive_seed(seed, "source", t);
    for (std::size_t j = 0; j < arch.K_so; ++j) {
      const bool last = j + 1 == arch.K_so;
      const std::size_t out = last ? arch.p : arch.n_u;
      Activation act = arch.hidden;
      if (last) act = arch.source_terminal_activation ? Activation::relu : Activation::identity;
      head.layers.push_back(gaussian_layer(arch.n_u, out, sd, act, derive_seed(task_seed, "layer", j)));
    }
    if (arch.K_so == 1) {
      if (arch.p <= arch.n_u) {
        head.layers[0].weight = orthonormal_rows(arch.p, arch.n_u, derive_seed(task_seed, "orthonormal"));
      } else {
        gt.orthonormal_fallback = true;
      }
    }
    gt.f_sources.push_back(std::move(head));
  }
  return gt;
}

std::string Task::tag() const {
  return kind == Kind::target ? std::string("target") : "source" + std::to_string(index);
}

Mat mean_function(const GroundTruth& gt, Task task, const Mat& inputs) {
  const Mat z = forward_batch(gt.h_star, inputs);
  if (task.kind == Task::Kind::target) return forward_batch(gt.f_target, z);
  if (task.index >= gt.f_sources.size()) throw ContractError("source task index out of range");
  return forward_batch(gt.f_sources[task.index], z);
}

Mat sample_inputs(std::size_t d_in, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Mat x(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = rng.normal();
  return x;
}

Dataset sample_dataset(const GroundTruth& gt, Task task, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ContractError("sample_dataset: n must be >= 1");
  Dataset d;
  d.task = task.tag();
  d.inputs = sample_inputs(gt.arch.d_in, n, derive_seed(seed, "inputs"));
  d.labels = mean_function(gt, task, d.inputs);
  if (gt.noise_sigma > 0.0) {
    Rng noise(derive_seed(seed, "noise"));
    for (Eigen::Index c = 0; c < d.labels.cols(); ++c)
      for (Eigen::Index r = 0; r < d.labels.rows(); ++r) d.labels(r, c) += gt.noise_sigma * noise.normal();
  }
  return d;
}

namespace {
void put_number(std::ostream& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}
}  // namespace

void write_csv(const Dataset& data, std::ostream& out) {
  const auto d = data.inputs.rows();
  const auto m = data.labels.rows();
  for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << "x_" << i;
  for (Eigen::Index j = 0; j < m; ++j) out << ",y_" << j;
  out << '\n';
  for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i) out << ',';
      put_number(out, data.inputs(i, c));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      out << ',';
      put_number(out, data.labels(j, c));
    }
    out << '\n';
  }
}

}  // namespace divlab
