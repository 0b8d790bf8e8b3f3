// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "objsoup/conflict.hpp"
#include "objsoup/harness.hpp"
#include "objsoup/problems.hpp"
#include "objsoup/recipes.hpp"
#include "objsoup/simplex.hpp"
#include "objsoup/weighting.hpp"

using namespace objsoup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Brute force over supports: for each nonempty S the candidate is
// x_i = v_i - τ on S (τ from Σ x = 1) and 0 elsewhere; keep feasible
// candidates that satisfy the KKT sign conditions and pick the closest.
std::vector<double> brute_force_projection(const std::vector<double>& v) {
  const std::size_t m = v.size();
  std::vector<double> best;
  double best_d = INFINITY;
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        sum += v[i];
        ++k;
      }
    }
    const double tau = (sum - 1.0) / static_cast<double>(k);
    std::vector<double> x(m, 0.0);
    bool ok = true;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        x[i] = v[i] - tau;
        ok = ok && x[i] >= -1e-12;
      } else {
        ok = ok && v[i] - tau <= 1e-12;
      }
    }
    if (!ok) continue;
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) d += (x[i] - v[i]) * (x[i] - v[i]);
    if (d < best_d) {
      best_d = d;
      best = x;
    }
  }
  return best;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

GradientMatrix random_gradients(std::mt19937_64& rng, std::size_t m,
                                const std::vector<std::size_t>& dims) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ObjectiveId> ids;
  std::vector<ParamVector> cols;
  for (std::size_t k = 0; k < m; ++k) {
    ids.push_back(ObjectiveId::supervised(k, 0));
    ParamVector::Storage s;
    for (std::size_t b = 0; b < dims.size(); ++b) {
      std::vector<double> v(dims[b]);
      for (auto& x : v) x = n(rng);
      s.emplace(BlockId::backbone(b), std::move(v));
    }
    cols.emplace_back(std::move(s));
  }
  return GradientMatrix(ids, std::move(cols));
}

const Json& last_iteration_record(const std::vector<Json>& trace) {
  for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
    if (it->contains("stationarity")) return *it;
  }
  throw std::runtime_error("trace has no iteration record");
}

std::vector<Json> run(const Problem& p, const RecipeConfig& c, const TrainOptions& t,
                      std::vector<ParamVector>* params = nullptr) {
  MemoryTraceSink sink;
  train(p, c, t, sink, [&](const OptimizerState& s) {
    if (params) params->push_back(s.params);
  });
  return sink.records;
}

// --------------------------------------------------------------------------

Outcome ac1() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> dim(2, 10);
  std::normal_distribution<double> n(0.0, 2.0);
  double worst = 0.0, worst_idem = 0.0, worst_expansion = -INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = dim(rng);
    std::vector<double> v(m), w(m);
    for (auto& x : v) x = n(rng);
    for (auto& x : w) x = n(rng);
    const auto p = project_to_simplex(v);
    worst = std::max(worst, max_abs_diff(p.values(), brute_force_projection(v)));
    worst_idem = std::max(worst_idem, max_abs_diff(project_to_simplex(p.values()).values(), p.values()));
    const auto q = project_to_simplex(w);
    double dp = 0.0, dv = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dp += (p[i] - q[i]) * (p[i] - q[i]);
      dv += (v[i] - w[i]) * (v[i] - w[i]);
    }
    worst_expansion = std::max(worst_expansion, std::sqrt(dp) - std::sqrt(dv));
  }
  const bool pass = worst <= 1e-9 && worst_idem <= 1e-9 && worst_expansion <= 1e-12;
  return {pass, "max err " + fmt("%.2e", worst) + ", idempotence " + fmt("%.2e", worst_idem) +
                    ", max(‖Pv-Pw‖-‖v-w‖) " + fmt("%.2e", worst_expansion)};
}

Outcome ac2() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> mdist(2, 6), ddist(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = mdist(rng);
    const auto g = random_gradients(rng, m, {ddist(rng), ddist(rng)});
    std::vector<double> lam(m);
    double s = 0.0;
    for (auto& x : lam) s += (x = u(rng));
    for (auto& x : lam) x /= s;
    const double gamma = 0.001 + 0.05 * u(rng);

    // ∇ of ½‖Gλ‖² is GᵀGλ
    std::vector<double> gl(g.column(0).size(), 0.0);
    std::vector<std::vector<double>> flat(m);
    for (std::size_t k = 0; k < m; ++k) {
      for (const auto& [id, v] : g.column(k).blocks()) flat[k].insert(flat[k].end(), v.begin(), v.end());
    }
    std::vector<double> glam(flat[0].size(), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t i = 0; i < glam.size(); ++i) glam[i] += lam[k] * flat[k][i];
    }
    std::vector<double> step(m);
    for (std::size_t k = 0; k < m; ++k) {
      double grad = 0.0;
      for (std::size_t i = 0; i < glam.size(); ++i) grad += flat[k][i] * glam[i];
      step[k] = lam[k] - gamma * grad;
    }
    const auto oracle = brute_force_projection(step);

    WeightState st = WeightState::initial(m, {GammaSchedule::Kind::Constant, gamma});
    st.lambda = SimplexWeights(lam);
    const auto next = modo_step(st, g, g);
    worst = std::max(worst, max_abs_diff(next.lambda.values(), oracle));
  }
  return {worst <= 1e-12, "max per-step deviation " + fmt("%.2e", worst)};
}

Outcome ac3() {
  QuadraticSoupOptions o;
  o.centers = {{1, 0}, {-1, 0}};
  const auto p = make_quadratic_soup(o);
  TrainOptions t;
  t.epochs = 50;
  t.iters_per_epoch = 100;
  t.log_every = 100;
  t.seed = 3;

  auto vs = RecipeConfig{};
  vs.alpha = 0.1;
  auto vc = vs;
  vc.kind = RecipeKind::VC;
  vc.unsup_penalty = {0.0, 0.0, 0.0};
  auto vm = vc;
  vm.kind = RecipeKind::VM;

  bool pass = true;
  std::string detail;
  for (const auto& [name, c] : {std::pair{"vs", vs}, std::pair{"vc", vc}, std::pair{"vm", vm}}) {
    const auto trace = run(*p, c, t);
    std::size_t first = 0;
    for (const auto& r : trace) {
      if (r.contains("stationarity") && r["stationarity"].get<double>() <= 1e-4) {
        first = r["iter"];
        break;
      }
    }
    const auto& last = last_iteration_record(trace);
    const double s = last["stationarity"], d = last["pareto_distance"];
    pass = pass && first > 0 && last["iter"] == 5000 && s <= 1e-4 && d <= 1e-3;
    detail += std::string(detail.empty() ? "" : "; ") + name + " stationarity " + fmt("%.1e", s) +
              " (≤1e-4 from iter " + std::to_string(first) + "), pareto_distance " + fmt("%.1e", d);
  }
  return {pass, detail};
}

ToyNetOptions small_net() {
  ToyNetOptions o;
  o.widths = {8, 16, 16, 16, 16};
  o.dataset_sizes = {256};
  o.unlabeled_size = 256;
  o.data_seed = 31;
  return o;
}

Outcome ac4() {
  const auto p = make_toy_multitask_net(small_net());
  TrainOptions t;
  t.epochs = 10;
  t.iters_per_epoch = 100;
  t.batch_size = 16;
  t.log_every = 1000;
  t.seed = 44;
  RecipeConfig vs;
  vs.alpha = 0.05;
  vs.use_unsupervised = false;
  auto vc = vs;
  vc.kind = RecipeKind::VC;
  vc.use_unsupervised = true;
  vc.unsup_penalty = {0.0, 0.0, 0.0};
  auto vm = vc;
  vm.kind = RecipeKind::VM;
  std::vector<ParamVector> a, b, m;
  run(*p, vs, t, &a);
  run(*p, vc, t, &b);
  run(*p, vm, t, &m);
  if (a.size() != 1000 || b.size() != 1000 || m.size() != 1000) return {false, "wrong trajectory length"};
  double d_vc = 0.0, d_vm = 0.0, moved = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d_vc = std::max(d_vc, norm(axpy(a[k], -1.0, b[k])));
    d_vm = std::max(d_vm, norm(axpy(b[k], -1.0, m[k])));
  }
  moved = norm(axpy(a.back(), -1.0, a.front()));
  return {d_vc <= 1e-12 && d_vm <= 1e-12 && moved > 1e-3,
          "max ‖θ_VS - θ_VC‖ " + fmt("%.1e", d_vc) + ", max ‖θ_VC - θ_VM‖ " + fmt("%.1e", d_vm) +
              " over 1000 iterations (θ moved " + fmt("%.2f", moved) + ")"};
}

Outcome ac5() {
  const PenaltySchedule s{0.0, 0.02, 1.5};
  const double v0 = penalty_value(s, 0), v10 = penalty_value(s, 10), v75 = penalty_value(s, 75),
               v100 = penalty_value(s, 100);
  return {v0 == 0.0 && v10 == 0.2 && v75 == 1.5 && v100 == 1.5,
          "η(0)=" + fmt("%.17g", v0) + " η(10)=" + fmt("%.17g", v10) + " η(75)=" + fmt("%.17g", v75) +
              " η(100)=" + fmt("%.17g", v100)};
}

struct Planted {
  std::unique_ptr<Problem> problem;
  std::set<BlockId> blocks;
};

Planted planted_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> nb(2, 10), dim(1, 6);
  ConflictConstructionOptions o;
  const std::size_t n = nb(rng);
  for (std::size_t b = 0; b < n; ++b) o.block_dims.push_back(dim(rng));
  // planted fraction between 10% and 100%
  std::vector<std::size_t> order(n);
  for (std::size_t b = 0; b < n; ++b) order[b] = b;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t lo = std::max<std::size_t>(1, (n + 9) / 10);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(lo, n)(rng);
  Planted out;
  for (std::size_t i = 0; i < k; ++i) {
    o.conflict_blocks.push_back(order[i]);
    out.blocks.insert(BlockId::backbone(order[i]));
  }
  std::sort(o.conflict_blocks.begin(), o.conflict_blocks.end());
  o.seed = rng();
  out.problem = make_conflict_by_construction(o);
  return out;
}

Outcome ac6() {
  std::mt19937_64 rng(606);
  std::size_t hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto pl = planted_problem(rng);
    RecipeConfig c;
    c.alpha = 1e-3;
    TrainOptions t;
    t.epochs = 3;
    t.iters_per_epoch = 10;
    t.warmup_epochs = 2;
    t.efficient_mode = true;
    t.log_every = 10;
    t.seed = static_cast<std::uint64_t>(trial);
    MemoryTraceSink sink;
    const auto r = train(*pl.problem, c, t, sink);
    hits += r.efficient_report && r.efficient_report->conflicting_layers == pl.blocks;
  }
  return {hits == 100, std::to_string(hits) + "/100 trials recover the planted set"};
}

Outcome ac7() {
  std::mt19937_64 rng(707);
  double worst_lambda = 0.0, worst_dir = 0.0, worst_pgd = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto pl = planted_problem(rng);
    const auto& p = *pl.problem;
    const auto eval = p.evaluate_full(p.initial_params(rng()));
    const auto& g = eval.backbone;

    const DenseMatrix full = gram(g, g);
    const DenseMatrix restricted = gram(g, g, pl.blocks);
    const auto lf = min_norm_weights(full, 1e-14, 100000);
    const auto lr = min_norm_weights(restricted, 1e-14, 100000);
    worst_pgd = std::max(worst_pgd, max_abs_diff(lf.lambda.values(), lr.lambda.values()));

    // the online update run to convergence under each Gram
    const double trace = full(0, 0) + full(1, 1);
    const GammaSchedule gamma{GammaSchedule::Kind::Constant, 0.5 / trace};
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const double w = u(rng);
    WeightState a = WeightState::initial(2, gamma), b = WeightState::initial(2, gamma);
    a.lambda = b.lambda = SimplexWeights({w, 1.0 - w});
    b.restriction = pl.blocks;
    for (int k = 0; k < 5000; ++k) {
      a = modo_step(a, g, g);
      b = modo_step(b, g, g);
    }
    worst_lambda = std::max(worst_lambda, max_abs_diff(a.lambda.values(), b.lambda.values()));
    const auto da = ca_direction(g, a.lambda).vector;
    const auto db = ca_direction(g, b.lambda).vector;
    worst_dir = std::max(worst_dir, norm(axpy(da, -1.0, db)));
  }
  return {worst_lambda <= 1e-6 && worst_pgd <= 1e-6 && worst_dir <= 1e-9,
          "max |λ_full - λ_restricted| " + fmt("%.1e", worst_lambda) + " (min-norm solver " +
              fmt("%.1e", worst_pgd) + "), max update difference " + fmt("%.1e", worst_dir)};
}

Outcome ac8() {
  auto o = small_net();
  o.dataset_sizes = {64};
  o.unlabeled_size = 64;
  const auto p = make_toy_multitask_net(o);
  double worst = 0.0;
  std::string where;
  for (std::uint64_t point = 0; point < 10; ++point) {
    const auto params = p->initial_params(1000 + point);
    for (const auto& e : gradient_check(*p, params, 1e-5)) {
      if (e.max_rel_error > worst) {
        worst = e.max_rel_error;
        where = e.objective.name();
      }
    }
  }
  return {worst < 1e-5, "max relative error " + fmt("%.2e", worst) + " (" + where +
                            ") over 10 points, all objectives incl. unsup"};
}

// Two objectives with a 10:1 curvature ratio; at θ0 = (0.5, 0.3) the gradient
// cosine is about -0.74. Static uniform weights drift toward the stiff
// objective's center.
QuadraticSoupOptions ac9_problem() {
  QuadraticSoupOptions o;
  o.centers = {{1, 0}, {-1, 0}};
  o.scales = {10.0, 1.0};
  o.init = std::vector<double>{0.5, 0.3};
  o.noise_scale = 0.2;
  return o;
}

// Seeds 1..10 gave gaps between 0.265 and 0.497; pinned below that range.
constexpr double kAc9MinGap = 0.2;

Outcome ac9() {
  const auto p = make_quadratic_soup(ac9_problem());
  const auto e0 = p->evaluate_full(p->initial_params(0));
  const double cos0 = cosine(e0.backbone.column(0), e0.backbone.column(1)).value;
  if (cos0 > -0.5) return {false, "initial cosine " + fmt("%.3f", cos0)};

  std::size_t wins = 0;
  double min_gap = INFINITY, max_gap = -INFINITY;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainOptions t;
    t.epochs = 20;
    t.iters_per_epoch = 100;
    t.batch_size = 16;
    t.log_every = 2000;
    t.seed = seed;
    RecipeConfig vs;
    vs.alpha = 0.01;
    vs.gamma.base = 0.01;
    RecipeConfig sw;
    sw.kind = RecipeKind::StaticWeight;
    sw.beta = 0.01;
    sw.static_weights = std::vector<double>{0.5, 0.5};
    const auto max_loss = [&](const RecipeConfig& c) {
      const auto trace = run(*p, c, t);
      const auto& r = last_iteration_record(trace);
      double m = -INFINITY;
      for (const auto& [k, v] : r["losses"].items()) m = std::max(m, v.get<double>());
      return m;
    };
    const double gap = max_loss(sw) - max_loss(vs);
    min_gap = std::min(min_gap, gap);
    max_gap = std::max(max_gap, gap);
    wins += gap >= kAc9MinGap;
  }
  return {wins == 10, std::to_string(wins) + "/10 seeds with max-loss gap ≥ " + fmt("%.2f", kAc9MinGap) +
                          " (static - dynamic in [" + fmt("%.3f", min_gap) + ", " +
                          fmt("%.3f", max_gap) + "], cos0 " + fmt("%.2f", cos0) + ")"};
}

std::string slurp_without_wallclock(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string line, out;
  while (std::getline(in, line)) {
    Json j = Json::parse(line);
    j.erase("wallclock_ms");
    out += j.dump() + "\n";
  }
  return out;
}

Outcome ac10() {
  const fs::path dir = fs::temp_directory_path() / ("objsoup_ac10_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  Json cfg = Json::parse(R"({
    "problem": {"name": "toy_multitask_net", "seed": 10},
    "recipe": {"kind": "vm", "levels": [["t0_n0", "t1_n0"], ["t0_n1", "t1_n1"]]},
    "optimizer": {"alpha": 0.05, "epochs": 5, "iters_per_epoch": 20, "batch_size": 16,
                  "log_every": 5, "efficient_mode": true, "warmup_epochs": 2}
  })");
  std::ofstream(dir / "cfg.json") << cfg.dump(2);
  bool same = true;
  std::size_t lines = 0;
  for (int rep = 0; rep < 2; ++rep) {
    const std::string cmd = std::string(OBJSOUP_CLI_PATH) + " run --config " + (dir / "cfg.json").string() +
                            " --out " + (dir / ("r" + std::to_string(rep))).string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      fs::remove_all(dir);
      return {false, "run exited abnormally"};
    }
  }
  const auto a = slurp_without_wallclock(dir / "r0" / "trace.jsonl");
  const auto b = slurp_without_wallclock(dir / "r1" / "trace.jsonl");
  same = !a.empty() && a == b;
  lines = static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n'));
  fs::remove_all(dir);
  return {same, std::to_string(lines) + " trace lines, identical apart from wallclock_ms"};
}

Outcome ac11() {
  QuadraticSoupOptions o;
  o.centers = {{1, 0, 0.5}, {-1, 0.5, 0}, {0, -1, 1}};
  o.head_dim = 3;
  o.head_targets = {{1, 1, 0}, {2, -1, 1}, {0, 3, -2}};
  o.unsup_center = std::vector<double>{0.2, 0.2, 0.2};
  o.noise_scale = 0.5;
  auto perturbed = o;
  perturbed.centers[1] = {-3, 2, 1};
  perturbed.head_targets[1] = {-5, 7, 0};
  const auto p = make_quadratic_soup(o);
  const auto q = make_quadratic_soup(perturbed);
  const BlockId head_a = BlockId::head(0, 0);

  std::string detail;
  bool pass = true;
  for (auto kind : {RecipeKind::VS, RecipeKind::VC, RecipeKind::VM, RecipeKind::TwoStage,
                    RecipeKind::StaticWeight, RecipeKind::Joint}) {
    RecipeConfig c;
    c.kind = kind;
    c.alpha = 0.05;
    c.beta = 0.05;
    if (kind == RecipeKind::VM) {
      c.levels = {{ObjectiveId::supervised(0, 0)},
                  {ObjectiveId::supervised(1, 0), ObjectiveId::supervised(2, 0)}};
    }
    if (kind == RecipeKind::StaticWeight) c.static_weights = std::vector<double>{0.2, 0.3, 0.5};
    if (kind == RecipeKind::TwoStage) c.pretrain_epochs = 1;
    TrainOptions t;
    t.epochs = 5;
    t.iters_per_epoch = 50;
    t.batch_size = 8;
    t.seed = 11;
    std::vector<ParamVector> a, b;
    run(*p, c, t, &a);
    run(*q, c, t, &b);
    bool identical = a.size() == b.size() && !a.empty();
    bool backbone_differs = false;
    for (std::size_t k = 0; identical && k < a.size(); ++k) {
      const auto ha = a[k].block(head_a), hb = b[k].block(head_a);
      identical = std::equal(ha.begin(), ha.end(), hb.begin(), hb.end());
      backbone_differs = backbone_differs || a[k].block(BlockId::backbone(0))[0] !=
                                                 b[k].block(BlockId::backbone(0))[0];
    }
    pass = pass && identical && backbone_differs;
    detail += std::string(detail.empty() ? "" : ", ") + to_string(kind) +
              (identical ? (backbone_differs ? " ok" : " (backbone unaffected?)") : " DIFFERS");
  }
  return {pass, "head A over 250 iterations: " + detail};
}

constexpr double kAc12Epsilon = 0.1;

Outcome ac12() {
  ToyNetOptions o;
  o.widths = {8, 4};
  o.activation = ToyNetOptions::Activation::Linear;
  o.dataset_sizes = {128};
  o.unlabeled_size = 256;
  o.data_seed = 12;
  const auto p = make_toy_multitask_net(o);
  if (!p->spec().unsup_optimum) return {false, "no closed-form ℓ_u*"};

  RecipeConfig vc;
  vc.kind = RecipeKind::VC;
  vc.alpha = 0.02;
  vc.epsilon = kAc12Epsilon;
  vc.unsup_penalty = {0.0, 0.02, 1.5};
  TrainOptions t;
  t.epochs = 200;
  t.iters_per_epoch = 10;
  t.batch_size = 32;
  t.log_every = 10;
  t.seed = 12;
  t.full_batch = true;
  const auto trace = run(*p, vc, t);

  std::vector<std::pair<std::size_t, double>> gaps;  // (epoch, gap) at epoch ends
  for (const auto& r : trace) {
    if (r.contains("feasibility_gap") && r["iter"].get<std::size_t>() % t.iters_per_epoch == 0) {
      gaps.emplace_back(r["iter"].get<std::size_t>() / t.iters_per_epoch, r["feasibility_gap"].get<double>());
    }
  }
  std::optional<std::size_t> entered;
  bool stays = true;
  std::size_t increases = 0;
  for (std::size_t i = 1; i < gaps.size(); ++i) increases += gaps[i].second > gaps[i - 1].second;
  double worst_after = 0.0;
  for (const auto& [epoch, gap] : gaps) {
    if (!entered && gap <= kAc12Epsilon) entered = epoch;
    if (entered) {
      worst_after = std::max(worst_after, gap);
      stays = stays && gap <= kAc12Epsilon;
    }
  }
  const auto& last = last_iteration_record(trace);
  const bool pass = entered && stays && increases == 0 && last["feasible"] == true;
  return {pass, "ℓ_u* " + fmt("%.4f", *p->spec().unsup_optimum) + ", initial gap " +
                    fmt("%.3f", gaps.front().second) + ", gap ≤ ε=0.1 from epoch " +
                    (entered ? std::to_string(*entered) : std::string("never")) +
                    ", max afterwards " + fmt("%.4f", worst_after) + ", final " +
                    fmt("%.4f", last["feasibility_gap"].get<double>()) +
                    ", epoch-to-epoch increases " + std::to_string(increases) + "/" +
                    std::to_string(gaps.size() - 1)};
}

}  // namespace

int main() {
  report("AC1", "simplex projection vs brute force", ac1);
  report("AC2", "deterministic MoDo step", ac2);
  report("AC3", "Pareto stationarity on the bi-quadratic", ac3);
  report("AC4", "recipe equivalence ladder", ac4);
  report("AC5", "penalty schedule values", ac5);
  report("AC6", "conflicting-layer detection", ac6);
  report("AC7", "restricted Gram argmin invariance", ac7);
  report("AC8", "toy net gradient fidelity", ac8);
  report("AC9", "dynamic vs static weighting under conflict", ac9);
  report("AC10", "run determinism", ac10);
  report("AC11", "head privacy", ac11);
  report("AC12", "feasibility gap under a ramped penalty", ac12);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
