#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "objsoup/error.hpp"
#include "objsoup/kernels.hpp"
#include "objsoup/problems.hpp"
#include "objsoup/rng.hpp"

namespace objsoup {
namespace {

using Vec = std::vector<double>;

struct LanguageData {
  std::vector<Vec> inputs;
  std::vector<std::size_t> classes;
  std::vector<Vec> targets;
};

// Views of one dense layer stored as [W (out×in, row-major) | b (out)].
struct DenseView {
  std::size_t in = 0;
  std::size_t out = 0;
  const double* data = nullptr;

  std::span<const double> row(std::size_t r) const { return {data + r * in, in}; }
  double bias(std::size_t r) const { return data[out * in + r]; }
};

struct DenseGrad {
  std::size_t in = 0;
  std::size_t out = 0;
  double* data = nullptr;

  std::span<double> row(std::size_t r) const { return {data + r * in, in}; }
  double& bias(std::size_t r) const { return data[out * in + r]; }
};

class ToyMultitaskNet final : public Problem {
 public:
  ToyMultitaskNet(ProblemSpec spec, ToyNetOptions options, std::vector<LanguageData> data,
                  std::vector<Vec> unlabeled)
      : Problem(std::move(spec)),
        o_(std::move(options)),
        data_(std::move(data)),
        unlabeled_(std::move(unlabeled)) {}

  ParamVector initial_params(std::uint64_t seed) const override {
    ParamVector p = ParamVector::zeros(spec().layout());
    Rng rng(seed);
    std::normal_distribution<double> normal;
    const auto fill = [&](std::span<double> block, std::size_t in, std::size_t out) {
      const double s = o_.init_scale / std::sqrt(static_cast<double>(in));
      for (std::size_t i = 0; i < in * out; ++i) block[i] = s * normal(rng);
    };
    for (std::size_t l = 0; l + 1 < o_.widths.size(); ++l) {
      fill(p.block(layer_id(l)), o_.widths[l], o_.widths[l + 1]);
    }
    for (const auto& obj : spec().supervised()) {
      fill(p.block(obj.head_block()), o_.widths.back(), head_out(obj.task));
    }
    return p;
  }

  ObjectiveEval evaluate(const ParamVector& params, const SampleBatch& labeled,
                         const SampleBatch& unlabeled) const override {
    return run(params, labeled, unlabeled, true);
  }

  std::vector<double> losses(const ParamVector& params, const SampleBatch& labeled,
                             const SampleBatch& unlabeled) const override {
    return run(params, labeled, unlabeled, false).losses;
  }

 private:
  static BlockId layer_id(std::size_t l) { return BlockId::backbone(static_cast<std::uint32_t>(l)); }
  std::size_t depth() const { return o_.widths.size() - 1; }
  std::size_t head_out(std::size_t task) const {
    return task == 0 ? o_.classes : o_.regression_dim;
  }
  bool linear() const { return o_.activation == ToyNetOptions::Activation::Linear; }

  std::vector<DenseView> backbone_views(const ParamVector& params) const {
    std::vector<DenseView> views;
    for (std::size_t l = 0; l < depth(); ++l) {
      views.push_back({o_.widths[l], o_.widths[l + 1], params.block(layer_id(l)).data()});
    }
    return views;
  }

  static std::vector<DenseGrad> grad_views(ParamVector& grad, const std::vector<DenseView>& w) {
    std::vector<DenseGrad> views;
    for (std::size_t l = 0; l < w.size(); ++l) {
      views.push_back({w[l].in, w[l].out, grad.block(layer_id(l)).data()});
    }
    return views;
  }

  // activations[0] = x, activations[l] = act(W_l a_{l-1} + b_l)
  std::vector<Vec> forward(const std::vector<DenseView>& layers, const Vec& x) const {
    std::vector<Vec> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(x);
    for (const auto& layer : layers) {
      Vec z(layer.out);
      const Vec& prev = acts.back();
      for (std::size_t r = 0; r < layer.out; ++r) {
        z[r] = kernels::dot(layer.row(r), prev) + layer.bias(r);
        if (!linear()) z[r] = std::tanh(z[r]);
      }
      acts.push_back(std::move(z));
    }
    return acts;
  }

  // Accumulates scale·∂/∂θ given upstream gradient `delta` w.r.t. the output.
  void backward(const std::vector<DenseView>& layers, const std::vector<Vec>& acts, Vec delta,
                const std::vector<DenseGrad>& grads, double scale) const {
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& layer = layers[l];
      const Vec& out = acts[l + 1];
      if (!linear()) {
        for (std::size_t r = 0; r < layer.out; ++r) delta[r] *= 1.0 - out[r] * out[r];
      }
      Vec prev_delta(l > 0 ? layer.in : 0, 0.0);
      for (std::size_t r = 0; r < layer.out; ++r) {
        const double d = scale * delta[r];
        kernels::axpy(d, acts[l], grads[l].row(r));
        grads[l].bias(r) += d;
        if (l > 0) kernels::axpy(delta[r], layer.row(r), prev_delta);
      }
      delta = std::move(prev_delta);
    }
  }

  std::vector<std::size_t> draw_indices(const SampleBatch& batch, std::size_t slot,
                                        std::size_t n) const {
    std::vector<std::size_t> idx;
    if (batch.full) {
      idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      return idx;
    }
    Rng rng(derive_seed(batch.seed, {static_cast<std::uint64_t>(slot)}));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    idx.resize(batch.size);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

  ObjectiveEval run(const ParamVector& params, const SampleBatch& labeled,
                    const SampleBatch& unlabeled, bool with_grads) const {
    check_params(params);
    const auto layers = backbone_views(params);
    const std::size_t width = o_.widths.back();
    ObjectiveEval eval;
    eval.objectives = spec().objectives;
    eval.labeled = labeled;
    eval.unlabeled = unlabeled;
    std::vector<ParamVector> cols;
    const ParamVector zero_backbone = ParamVector::zeros(spec().backbone_blocks);

    std::size_t slot = 0;
    for (const auto& obj : eval.objectives) {
      if (obj.is_unsupervised()) continue;
      const LanguageData& lang = data_[obj.language];
      const auto idx = draw_indices(labeled, slot++, lang.inputs.size());
      const double inv = 1.0 / static_cast<double>(idx.size());
      const std::size_t k = head_out(obj.task);
      const DenseView head{width, k, params.block(obj.head_block()).data()};

      ParamVector g = zero_backbone;
      ParamVector gh(ParamVector::Storage{{obj.head_block(), Vec(k * width + k, 0.0)}});
      const auto gviews = grad_views(g, layers);
      const DenseGrad ghead{width, k, gh.block(obj.head_block()).data()};

      double loss = 0.0;
      for (std::size_t i : idx) {
        const auto acts = forward(layers, lang.inputs[i]);
        const Vec& top = acts.back();
        Vec o(k);
        for (std::size_t r = 0; r < k; ++r) o[r] = kernels::dot(head.row(r), top) + head.bias(r);
        Vec delta_o(k);
        if (obj.task == 0) {
          const double mx = *std::max_element(o.begin(), o.end());
          double z = 0.0;
          for (double v : o) z += std::exp(v - mx);
          const double lse = mx + std::log(z);
          const std::size_t y = lang.classes[i];
          loss += lse - o[y];
          for (std::size_t r = 0; r < k; ++r) delta_o[r] = std::exp(o[r] - lse) - (r == y ? 1.0 : 0.0);
        } else {
          const Vec& y = lang.targets[i];
          for (std::size_t r = 0; r < k; ++r) {
            delta_o[r] = o[r] - y[r];
            loss += 0.5 * delta_o[r] * delta_o[r];
          }
        }
        if (!with_grads) continue;
        Vec delta_h(width, 0.0);
        for (std::size_t r = 0; r < k; ++r) {
          kernels::axpy(inv * delta_o[r], top, ghead.row(r));
          ghead.bias(r) += inv * delta_o[r];
          kernels::axpy(delta_o[r], head.row(r), delta_h);
        }
        backward(layers, acts, std::move(delta_h), gviews, inv);
      }
      eval.losses.push_back(loss * inv);
      eval.head_grads.emplace(obj, std::move(gh));
      cols.push_back(std::move(g));
    }

    if (spec().has_unsupervised) {
      const auto idx = draw_indices(unlabeled, slot, unlabeled_.size());
      const double inv = 1.0 / static_cast<double>(idx.size());
      ParamVector g = zero_backbone;
      const auto gviews = grad_views(g, layers);
      double loss = 0.0;
      for (std::size_t i : idx) {
        const Vec& x = unlabeled_[i];
        const auto acts = forward(layers, x);
        // Decoder: u_L = a_L, u_{l-1} = W_lᵀ u_l, reconstruction u_0.
        std::vector<Vec> u(layers.size() + 1);
        u[layers.size()] = acts.back();
        for (std::size_t l = layers.size(); l-- > 0;) {
          u[l].assign(layers[l].in, 0.0);
          for (std::size_t r = 0; r < layers[l].out; ++r) {
            kernels::axpy(u[l + 1][r], layers[l].row(r), u[l]);
          }
        }
        Vec delta(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
          delta[j] = u[0][j] - x[j];
          loss += 0.5 * delta[j] * delta[j];
        }
        if (!with_grads) continue;
        // Back through the decoder: ∂W_l[r][:] += u_l[r]·δu_{l-1}, δu_l[r] = <W_l[r], δu_{l-1}>.
        for (std::size_t l = 0; l < layers.size(); ++l) {
          Vec next(layers[l].out);
          for (std::size_t r = 0; r < layers[l].out; ++r) {
            kernels::axpy(inv * u[l + 1][r], delta, gviews[l].row(r));
            next[r] = kernels::dot(layers[l].row(r), delta);
          }
          delta = std::move(next);
        }
        backward(layers, acts, std::move(delta), gviews, inv);
      }
      eval.losses.push_back(loss * inv);
      cols.push_back(std::move(g));
    }
    eval.backbone = GradientMatrix(eval.objectives, std::move(cols));
    return eval;
  }

  ToyNetOptions o_;
  std::vector<LanguageData> data_;
  std::vector<Vec> unlabeled_;
};

Vec gaussian_vector(Rng& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

// Input variance decays with the coordinate index: var_i = 1 / (1 + i).
Vec draw_input(Rng& rng, const Vec& shift) {
  std::normal_distribution<double> normal;
  Vec x(shift.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = shift[i] + normal(rng) / std::sqrt(1.0 + static_cast<double>(i));
  }
  return x;
}

LanguageData make_language(const ToyNetOptions& o, std::uint64_t seed, std::size_t size) {
  const std::size_t d = o.widths.front();
  Rng rng(seed);
  LanguageData lang;
  const Vec shift = gaussian_vector(rng, d, o.language_shift);
  std::vector<Vec> cls_teacher;
  for (std::size_t k = 0; k < o.classes; ++k) cls_teacher.push_back(gaussian_vector(rng, d, 1.0));
  std::vector<Vec> reg_teacher;
  for (std::size_t k = 0; k < o.regression_dim; ++k) {
    reg_teacher.push_back(gaussian_vector(rng, d, 1.0 / std::sqrt(static_cast<double>(d))));
  }
  std::normal_distribution<double> normal;
  for (std::size_t s = 0; s < size; ++s) {
    Vec x = draw_input(rng, shift);
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t k = 0; k < o.classes; ++k) {
      double score = 0.0;
      for (std::size_t i = 0; i < d; ++i) score += cls_teacher[k][i] * x[i];
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    Vec y(o.regression_dim);
    for (std::size_t k = 0; k < o.regression_dim; ++k) {
      double v = 0.0;
      for (std::size_t i = 0; i < d; ++i) v += reg_teacher[k][i] * x[i];
      y[k] = v + o.label_noise * normal(rng);
    }
    lang.inputs.push_back(std::move(x));
    lang.classes.push_back(best);
    lang.targets.push_back(std::move(y));
  }
  return lang;
}

// ½ Σ of the smallest (d − k) eigenvalues of the second-moment matrix: the
// best rank-k tied linear reconstruction error of zero-mean data.
double linear_reconstruction_optimum(const std::vector<Vec>& xs, std::size_t rank) {
  const std::size_t d = xs.front().size();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& x : xs) {
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(d));
    s += v * v.transpose();
  }
  s /= static_cast<double>(xs.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = solver.eigenvalues();  // ascending
  double tail = 0.0;
  for (std::size_t i = 0; i + rank < d; ++i) tail += std::max(0.0, ev(static_cast<Eigen::Index>(i)));
  return 0.5 * tail;
}

}  // namespace

std::unique_ptr<Problem> make_toy_multitask_net(const ToyNetOptions& o) {
  if (o.languages < 1) throw ConfigError("toy_multitask_net: languages must be >= 1");
  if (o.tasks < 1 || o.tasks > 2) throw ConfigError("toy_multitask_net: tasks must be 1 or 2");
  if (o.widths.size() < 2) throw ConfigError("toy_multitask_net: need an input width and >= 1 layer");
  for (std::size_t w : o.widths) {
    if (w == 0) throw ConfigError("toy_multitask_net: widths must be positive");
  }
  if (o.classes < 2) throw ConfigError("toy_multitask_net: classes must be >= 2");
  if (o.regression_dim < 1) throw ConfigError("toy_multitask_net: regression_dim must be >= 1");
  if (o.dataset_sizes.size() != 1 && o.dataset_sizes.size() != o.languages) {
    throw ConfigError("toy_multitask_net: dataset_sizes needs 1 or `languages` entries");
  }
  for (std::size_t n : o.dataset_sizes) {
    if (n == 0) throw ConfigError("toy_multitask_net: empty dataset");
  }
  if (o.has_unsupervised && o.unlabeled_size == 0) {
    throw ConfigError("toy_multitask_net: unlabeled_size must be positive");
  }
  if (!(o.init_scale >= 0.0)) throw ConfigError("toy_multitask_net: init_scale must be >= 0");

  ProblemSpec spec;
  spec.name = "toy_multitask_net";
  for (std::size_t l = 0; l + 1 < o.widths.size(); ++l) {
    spec.backbone_blocks.emplace_back(BlockId::backbone(static_cast<std::uint32_t>(l)),
                                      o.widths[l] * o.widths[l + 1] + o.widths[l + 1]);
  }
  for (std::uint32_t t = 0; t < o.languages; ++t) {
    for (std::uint32_t n = 0; n < o.tasks; ++n) {
      const auto id = ObjectiveId::supervised(t, n);
      const std::size_t k = n == 0 ? o.classes : o.regression_dim;
      spec.objectives.push_back(id);
      spec.heads.emplace_back(id.head_block(), k * o.widths.back() + k);
    }
  }
  spec.stochastic = true;

  std::vector<LanguageData> data;
  for (std::size_t t = 0; t < o.languages; ++t) {
    const std::size_t stream = o.identical_languages ? 0 : t;
    const std::size_t size = o.dataset_sizes.size() == 1 ? o.dataset_sizes[0] : o.dataset_sizes[t];
    data.push_back(make_language(o, derive_seed(o.data_seed, {stream}), size));
  }

  std::vector<Vec> unlabeled;
  if (o.has_unsupervised) {
    spec.objectives.push_back(ObjectiveId::unsupervised());
    spec.has_unsupervised = true;
    const std::size_t d = o.widths.front();
    Rng rng(derive_seed(o.data_seed, "unlabeled"));
    const Vec no_shift(d, 0.0);
    for (std::size_t s = 0; s < o.unlabeled_size; ++s) unlabeled.push_back(draw_input(rng, no_shift));
    // Exactly zero-mean, so encoder biases cannot lower the optimum.
    Vec mean(d, 0.0);
    for (const auto& x : unlabeled) {
      for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
    }
    for (double& m : mean) m /= static_cast<double>(unlabeled.size());
    for (auto& x : unlabeled) {
      for (std::size_t i = 0; i < d; ++i) x[i] -= mean[i];
    }
    if (o.activation == ToyNetOptions::Activation::Linear) {
      const std::size_t rank = *std::min_element(o.widths.begin(), o.widths.end());
      spec.unsup_optimum = linear_reconstruction_optimum(unlabeled, rank);
    }
  }
  return std::make_unique<ToyMultitaskNet>(std::move(spec), o, std::move(data), std::move(unlabeled));
}

}  // namespace objsoup
