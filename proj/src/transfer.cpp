#include "divlab/transfer.hpp"

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

#include <cmath>
#include <span>
#include <string>

namespace divlab {

void validate(const TwoPhaseConfig& cfg) {
  validate(cfg.arch);
  if (cfg.n_so < 1 || cfg.n_ta < 1) throw ContractError("n_so and n_ta must be >= 1");
  if (cfg.n_eval < 1) throw ContractError("n_eval must be >= 1");
  if (!cfg.freeze_representation)
    throw ContractError("only the frozen-representation protocol is supported");
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double he_std(std::size_t fan_in, Activation next) {
  const double gain = next == Activation::relu ? 2.0 : 1.0;
  return std::sqrt(gain / static_cast<double>(fan_in));
}

Mlp init_chain(std::size_t in, std::size_t width, std::size_t out, std::size_t depth, Activation hidden,
               Activation last_activation, std::uint64_t seed) {
  Mlp net;
  for (std::size_t j = 0; j < depth; ++j) {
    const bool last = j + 1 == depth;
    const std::size_t fan_in = j == 0 ? in : width;
    const std::size_t fan_out = last ? out : width;
    const Activation act = last ? last_activation : hidden;
    net.layers.push_back(gaussian_layer(fan_in, fan_out, he_std(fan_in, act), act, derive_seed(seed, "layer", j)));
  }
  return net;
}

}  // namespace

std::vector<double> fit(Mlp& net, const Mat& inputs, const Mat& targets, std::size_t steps,
                        const OptSettings& opt) {
  std::vector<double> trace;
  trace.reserve(steps);
  std::vector<double> params = net.flatten();
  OptState state = make_opt_state(opt, params.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const LossGradient lg = loss_and_gradient(net, inputs, targets);
    trace.push_back(lg.loss);
    if (!std::isfinite(lg.loss)) throw NumericError("training loss diverged at step " + std::to_string(s), s);
    const std::vector<double> g = lg.gradients.flatten();
    step(state, params, g);
    if (!all_finite(params)) throw NumericError("non-finite parameters after step " + std::to_string(s), s);
    net.assign(params);
  }
  return trace;
}

Mlp init_trunk(const Architecture& arch, std::uint64_t seed) {
  return init_chain(arch.d_in, arch.n_u, arch.n_u, arch.K, arch.hidden, arch.hidden, seed);
}

Mlp init_source_head(const Architecture& arch, std::uint64_t seed) {
  const Activation last = arch.source_terminal_activation ? Activation::relu : Activation::identity;
  return init_chain(arch.n_u, arch.n_u, arch.p, arch.K_so, arch.hidden, last, seed);
}

Mlp init_target_head(const Architecture& arch, std::size_t depth, std::uint64_t seed) {
  return init_chain(arch.n_u, arch.n_u, 1, depth, arch.hidden, Activation::identity, seed);
}

SourceFit train_source_phase(const std::vector<Dataset>& sources, const Architecture& arch,
                             const TwoPhaseConfig& cfg, std::uint64_t init_seed) {
  validate(arch);
  if (sources.empty()) throw ContractError("train_source_phase: no source datasets");
  SourceFit fit_result;
  fit_result.trunk = init_trunk(arch, derive_seed(init_seed, "trunk"));
  for (std::size_t t = 0; t < sources.size(); ++t)
    fit_result.heads.push_back(init_source_head(arch, derive_seed(init_seed, "head", t)));

  const std::size_t trunk_count = fit_result.trunk.parameter_count();
  std::vector<double> params = fit_result.trunk.flatten();
  std::vector<std::size_t> offsets;
  for (const auto& h : fit_result.heads) {
    offsets.push_back(params.size());
    const auto hp = h.flatten();
    params.insert(params.end(), hp.begin(), hp.end());
  }
  OptState state = make_opt_state(cfg.opt, params.size());

  std::size_t total = 0;
  for (const auto& d : sources) total += d.size();
  std::vector<double> grads(params.size());

  for (std::size_t s = 0; s < cfg.source_steps; ++s) {
    std::fill(grads.begin(), grads.end(), 0.0);
    double loss = 0.0;
    for (std::size_t t = 0; t < sources.size(); ++t) {
      const Mlp joint = compose(fit_result.trunk, fit_result.heads[t]);
      // Task t's mean loss enters with weight n_t / sum n.
      const double w = static_cast<double>(sources[t].size()) / static_cast<double>(total);
      const LossGradient lg = loss_and_gradient(joint, sources[t].inputs, sources[t].labels);
      loss += w * lg.loss;
      const std::vector<double> g = lg.gradients.flatten();
      for (std::size_t i = 0; i < trunk_count; ++i) grads[i] += w * g[i];
      for (std::size_t i = trunk_count; i < g.size(); ++i) grads[offsets[t] + i - trunk_count] += w * g[i];
    }
    fit_result.loss_trace.push_back(loss);
    if (!std::isfinite(loss)) throw NumericError("source loss diverged at step " + std::to_string(s), s);
    step(state, params, grads);
    if (!all_finite(params)) throw NumericError("non-finite parameters after step " + std::to_string(s), s);
    fit_result.trunk.assign(std::span<const double>(params).subspan(0, trunk_count));
    for (std::size_t t = 0; t < fit_result.heads.size(); ++t)
      fit_result.heads[t].assign(
          std::span<const double>(params).subspan(offsets[t], fit_result.heads[t].parameter_count()));
  }
  return fit_result;
}

SourceFit train_source_phase(const GroundTruth& gt, const TwoPhaseConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::vector<Dataset> data;
  for (std::size_t t = 0; t < gt.f_sources.size(); ++t)
    data.push_back(sample_dataset(gt, Task::source(t), cfg.n_so, derive_seed(seed, "source-data", t)));
  return train_source_phase(data, gt.arch, cfg, derive_seed(seed, "init-source"));
}

Mlp train_target_phase(const Mlp& trunk, const Dataset& target, const TwoPhaseConfig& cfg,
                       std::uint64_t init_seed) {
  if (trunk.output_dim() != cfg.arch.n_u)
    throw ShapeError("trunk output dim " + std::to_string(trunk.output_dim()) +
                     " does not match target head input " + std::to_string(cfg.arch.n_u));
  const Mat features = forward_batch(trunk, target.inputs);
  Mlp head = init_target_head(cfg.arch, cfg.arch.K_ta, init_seed);
  fit(head, features, target.labels, cfg.target_steps, cfg.opt);
  return head;
}

Mlp train_target_phase(const Mlp& trunk, const GroundTruth& gt, const TwoPhaseConfig& cfg,
                       std::uint64_t seed) {
  const Dataset target = sample_dataset(gt, Task::target(), cfg.n_ta, derive_seed(seed, "target-data"));
  return train_target_phase(trunk, target, cfg, derive_seed(seed, "init-target"));
}

Mlp train_baseline(const Dataset& target, const TwoPhaseConfig& cfg, std::uint64_t init_seed) {
  Mlp net = compose(init_trunk(cfg.arch, derive_seed(init_seed, "trunk")),
                    init_target_head(cfg.arch, cfg.arch.K_ta, derive_seed(init_seed, "head")));
  fit(net, target.inputs, target.labels, cfg.target_steps, cfg.opt);
  return net;
}

double run_baseline(const GroundTruth& gt, const TwoPhaseConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const Dataset target = sample_dataset(gt, Task::target(), cfg.n_ta, derive_seed(seed, "target-data"));
  const Mlp net = train_baseline(target, cfg, derive_seed(seed, "init-baseline"));
  return estimate_excess_error(net, Mlp{}, gt, Task::target(), cfg.n_eval, derive_seed(seed, "eval"));
}

double estimate_excess_error(const Mlp& f, const Mlp& h, const Mlp& f_true, const Mlp& h_true,
                             std::size_t n_eval, std::uint64_t seed) {
  if (n_eval < 1) throw ContractError("estimate_excess_error: n_eval must be >= 1");
  const std::size_t d_in = !h_true.layers.empty() ? h_true.input_dim() : f_true.input_dim();
  const Mat x = sample_inputs(d_in, n_eval, seed);
  const Mat pred = forward_batch(f, forward_batch(h, x));
  const Mat truth = forward_batch(f_true, forward_batch(h_true, x));
  if (pred.rows() != truth.rows()) throw ShapeError("prediction and truth have different output dims");
  return (pred - truth).squaredNorm() / static_cast<double>(n_eval);
}

double estimate_excess_error(const Mlp& f, const Mlp& h, const GroundTruth& gt, Task task,
                             std::size_t n_eval, std::uint64_t seed) {
  const Mlp& f_true = task.kind == Task::Kind::target ? gt.f_target : gt.f_sources.at(task.index);
  return estimate_excess_error(f, h, f_true, gt.h_star, n_eval, seed);
}

TransferReport run_transfer(const TwoPhaseConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  TransferReport rep;
  rep.seed = seed;
  rep.config = cfg;
  const GroundTruth gt = make_ground_truth(cfg.arch, derive_seed(seed, "truth"), cfg.noise_sigma);

  SourceFit src = train_source_phase(gt, cfg, seed);
  rep.source_train_loss = src.loss_trace;

  const Dataset target = sample_dataset(gt, Task::target(), cfg.n_ta, derive_seed(seed, "target-data"));
  const Mlp head = train_target_phase(src.trunk, target, cfg, derive_seed(seed, "init-target"));
  const Mlp baseline = train_baseline(target, cfg, derive_seed(seed, "init-baseline"));

  const std::uint64_t eval_seed = derive_seed(seed, "eval");
  rep.excess_target = estimate_excess_error(head, src.trunk, gt, Task::target(), cfg.n_eval, eval_seed);
  rep.excess_baseline = estimate_excess_error(baseline, Mlp{}, gt, Task::target(), cfg.n_eval, eval_seed);
  double es = 0.0;
  for (std::size_t t = 0; t < src.heads.size(); ++t)
    es += estimate_excess_error(src.heads[t], src.trunk, gt, Task::source(t), cfg.n_eval, eval_seed);
  rep.excess_source = es / static_cast<double>(src.heads.size());

  const Dataset test = sample_dataset(gt, Task::target(), cfg.n_eval, derive_seed(seed, "test-data"));
  rep.target_mse = mean_squared_loss(compose(src.trunk, head), test.inputs, test.labels);
  rep.baseline_mse = mean_squared_loss(baseline, test.inputs, test.labels);
  return rep;
}

}  // namespace divlab
