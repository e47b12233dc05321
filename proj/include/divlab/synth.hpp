#pragma once

#include "divlab/netcore.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace divlab {

// Layer counts and widths shared by the ground truth and the trained nets.
struct Architecture {
  std::size_t d_in = 4;
  std::size_t n_u = 4;
  std::size_t K = 5;      // shared representation depth
  std::size_t K_so = 1;   // source prediction depth
  std::size_t K_ta = 1;   // target prediction depth
  std::size_t p = 4;      // source output dimension
  std::size_t T = 1;      // number of source tasks
  // Hidden-layer activation of the truth and of the trained nets; relu or
  // identity (both have sigma(0) = 0).
  Activation hidden = Activation::relu;
  // Apply relu after the last source layer so the head is nonlinear even
  // for K_so = 1.
  bool source_terminal_activation = false;
};

void validate(const Architecture& arch);

struct GroundTruth {
  Architecture arch;
  Mlp h_star;                   // d_in -> n_u, K relu layers
  std::vector<Mlp> f_sources;   // n_u -> p, one per source task
  Mlp f_target;                 // n_u -> 1
  double noise_sigma = 0.1;
  // Set when orthonormal source weights were requested but p > n_u.
  bool orthonormal_fallback = false;
};

// Biases zero, weights N(0, std = 1/sqrt(n_u)). A single-layer source head
// with p <= n_u gets orthonormal rows instead. Layer i of the target chain
// h_star then f_target is drawn from stream ("chain", i), so the composed
// target function depends only on K + K_ta, not on where the split is.
GroundTruth make_ground_truth(const Architecture& arch, std::uint64_t seed, double noise_sigma = 0.1);

struct Task {
  enum class Kind { source, target };
  Kind kind = Kind::target;
  std::size_t index = 0;

  static Task source(std::size_t i) { return {Kind::source, i}; }
  static Task target() { return {Kind::target, 0}; }
  std::string tag() const;
};

struct Dataset {
  Mat inputs;  // d_in x n
  Mat labels;  // m x n
  std::string task;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

// Noise-free mean function f_t* ∘ h* of a task on the columns of `inputs`.
Mat mean_function(const GroundTruth& gt, Task task, const Mat& inputs);

Mat sample_inputs(std::size_t d_in, std::size_t n, std::uint64_t seed);

// x ~ N(0, I), y = f ∘ h*(x) + sigma * g.
Dataset sample_dataset(const GroundTruth& gt, Task task, std::size_t n, std::uint64_t seed);

// Columns x_0..x_{d-1}, y_0..y_{m-1}.
void write_csv(const Dataset& data, std::ostream& out);

}  // namespace divlab
