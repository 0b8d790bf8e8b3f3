#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "objsoup/error.hpp"
#include "objsoup/harness.hpp"
#include "objsoup/rng.hpp"

namespace objsoup {
namespace {

// Key-tracking view of one JSON object; finish() rejects keys nobody read.
class Section {
 public:
  Section(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool present(const std::string& key) {
    used_.insert(key);
    return doc_.contains(key) && !doc_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    used_.insert(key);
    return doc_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!present(key)) return fallback;
    return convert<T>(doc_.at(key), key);
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    if (!present(key)) return std::nullopt;
    return convert<T>(doc_.at(key), key);
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!present(key)) return fallback;
    return to_count(doc_.at(key), key);
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
    if (!present(key)) return fallback;
    const Json& v = doc_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array of counts");
    std::vector<std::size_t> out;
    for (const auto& x : v) out.push_back(to_count(x, key));
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!used_.contains(key)) throw ConfigError("unknown key " + where(key));
    }
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

 private:
  template <class T>
  T convert(const Json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(where(key) + " must be finite");
        return d;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
        return v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
        return v.get<std::string>();
      } else {
        return v.get<T>();
      }
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  std::size_t to_count(const Json& v, const std::string& key) const {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
    throw ConfigError(where(key) + " must be a non-negative integer");
  }

  const Json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<std::vector<double>> matrix(const Json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of arrays");
  std::vector<std::vector<double>> out;
  for (const auto& row : v) {
    if (!row.is_array()) throw ConfigError(where + " must be an array of arrays");
    std::vector<double> r;
    for (const auto& x : row) {
      if (!x.is_number()) throw ConfigError(where + " entries must be numbers");
      r.push_back(x.get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> numbers(const Json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + " entries must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Json resolve_quadratic(Section& s) {
  Json out;
  out["name"] = "quadratic_soup";
  out["centers"] = s.present("centers") ? Json(matrix(s.at("centers"), s.where("centers")))
                                        : Json::parse("[[1.0, 0.0], [-1.0, 0.0]]");
  out["scales"] = s.present("scales") ? Json(numbers(s.at("scales"), s.where("scales")))
                                      : Json::array();
  out["noise_scale"] = s.get<double>("noise_scale", 0.0);
  out["head_dim"] = s.count("head_dim", 0);
  out["head_targets"] = s.present("head_targets")
                            ? Json(matrix(s.at("head_targets"), s.where("head_targets")))
                            : Json::array();
  out["unsup_center"] = s.present("unsup_center")
                            ? Json(numbers(s.at("unsup_center"), s.where("unsup_center")))
                            : Json(nullptr);
  out["init"] = s.present("init") ? Json(numbers(s.at("init"), s.where("init"))) : Json(nullptr);
  out["init_scale"] = s.get<double>("init_scale", 1.0);
  return out;
}

Json resolve_constructed(Section& s) {
  Json out;
  out["name"] = "conflict_by_construction";
  out["block_dims"] = s.counts("block_dims", {4, 4, 4, 4});
  out["conflict_blocks"] = s.counts("conflict_blocks", {0});
  return out;
}

Json resolve_toy(Section& s) {
  const ToyNetOptions d;
  Json out;
  out["name"] = "toy_multitask_net";
  out["languages"] = s.count("languages", d.languages);
  out["tasks"] = s.count("tasks", d.tasks);
  out["widths"] = s.counts("widths", d.widths);
  out["dataset_sizes"] = s.counts("dataset_sizes", d.dataset_sizes);
  out["unlabeled_size"] = s.count("unlabeled_size", d.unlabeled_size);
  out["classes"] = s.count("classes", d.classes);
  out["regression_dim"] = s.count("regression_dim", d.regression_dim);
  const auto activation = s.get<std::string>("activation", "tanh");
  if (activation != "tanh" && activation != "linear") {
    throw ConfigError(s.where("activation") + " must be \"tanh\" or \"linear\"");
  }
  out["activation"] = activation;
  out["unsupervised"] = s.get<bool>("unsupervised", d.has_unsupervised);
  out["identical_languages"] = s.get<bool>("identical_languages", d.identical_languages);
  out["language_shift"] = s.get<double>("language_shift", d.language_shift);
  out["label_noise"] = s.get<double>("label_noise", d.label_noise);
  out["init_scale"] = s.get<double>("init_scale", d.init_scale);
  return out;
}

// Complete problem section (without the seed) from a partial one.
Json resolve_problem(const Json& section, std::optional<std::uint64_t>* seed_out) {
  Section s(section, "problem");
  if (!s.present("name")) throw ConfigError("problem.name is required");
  const auto name = s.get<std::string>("name", "");
  if (seed_out) {
    if (s.present("seed")) {
      const Json& v = s.at("seed");
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError("problem.seed must be a non-negative integer");
      }
      *seed_out = v.get<std::uint64_t>();
    }
  } else {
    s.present("seed");
  }
  Json out;
  if (name == "quadratic_soup") {
    out = resolve_quadratic(s);
  } else if (name == "conflict_by_construction") {
    out = resolve_constructed(s);
  } else if (name == "toy_multitask_net") {
    out = resolve_toy(s);
  } else {
    throw ConfigError("unknown problem: " + name);
  }
  s.finish();
  return out;
}

PenaltySchedule parse_schedule(const Json& v, const std::string& where) {
  Section s(v, where);
  PenaltySchedule p;
  p.init = s.get<double>("init", p.init);
  p.rate_per_epoch = s.get<double>("rate", p.rate_per_epoch);
  p.cap = s.get<double>("cap", p.cap);
  s.finish();
  return p;
}

Json schedule_json(const PenaltySchedule& p) {
  Json out;
  out["init"] = p.init;
  out["rate"] = p.rate_per_epoch;
  out["cap"] = p.cap;
  return out;
}

std::uint64_t env_seed() {
  const char* text = std::getenv("OBJSOUP_SEED");
  if (!text || !*text) return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (errno != 0 || *end != '\0' || text[0] == '-') {
    throw ConfigError("OBJSOUP_SEED must be a non-negative integer");
  }
  return v;
}

}  // namespace

Json default_problem_section(const std::string& name) {
  Json partial;
  partial["name"] = name;
  return resolve_problem(partial, nullptr);
}

std::unique_ptr<Problem> build_problem(const Json& section, std::uint64_t seed) {
  const Json p = resolve_problem(section, nullptr);
  const std::string name = p["name"];
  const std::uint64_t data_seed = derive_seed(seed, "data");
  if (name == "quadratic_soup") {
    QuadraticSoupOptions o;
    o.centers = p["centers"].get<std::vector<std::vector<double>>>();
    o.scales = p["scales"].get<std::vector<double>>();
    o.noise_scale = p["noise_scale"];
    o.head_dim = p["head_dim"];
    o.head_targets = p["head_targets"].get<std::vector<std::vector<double>>>();
    if (!p["unsup_center"].is_null()) o.unsup_center = p["unsup_center"].get<std::vector<double>>();
    if (!p["init"].is_null()) o.init = p["init"].get<std::vector<double>>();
    o.init_scale = p["init_scale"];
    return make_quadratic_soup(o);
  }
  if (name == "conflict_by_construction") {
    ConflictConstructionOptions o;
    o.block_dims = p["block_dims"].get<std::vector<std::size_t>>();
    o.conflict_blocks = p["conflict_blocks"].get<std::vector<std::size_t>>();
    o.seed = data_seed;
    return make_conflict_by_construction(o);
  }
  ToyNetOptions o;
  o.languages = p["languages"];
  o.tasks = p["tasks"];
  o.widths = p["widths"].get<std::vector<std::size_t>>();
  o.dataset_sizes = p["dataset_sizes"].get<std::vector<std::size_t>>();
  o.unlabeled_size = p["unlabeled_size"];
  o.classes = p["classes"];
  o.regression_dim = p["regression_dim"];
  o.activation = p["activation"] == "linear" ? ToyNetOptions::Activation::Linear
                                             : ToyNetOptions::Activation::Tanh;
  o.has_unsupervised = p["unsupervised"];
  o.identical_languages = p["identical_languages"];
  o.language_shift = p["language_shift"];
  o.label_noise = p["label_noise"];
  o.init_scale = p["init_scale"];
  o.data_seed = data_seed;
  return make_toy_multitask_net(o);
}

ExperimentConfig parse_experiment_config(const Json& doc,
                                         std::optional<std::uint64_t> seed_override) {
  Section top(doc, "config");
  if (!top.present("problem")) throw ConfigError("config.problem is required");
  ExperimentConfig cfg;

  std::optional<std::uint64_t> problem_seed;
  cfg.problem = resolve_problem(top.at("problem"), &problem_seed);
  const std::uint64_t seed = seed_override ? *seed_override : problem_seed ? *problem_seed : env_seed();
  cfg.problem["seed"] = seed;
  cfg.train.seed = seed;
  const auto problem = build_problem(cfg.problem, seed);
  const ProblemSpec& spec = problem->spec();

  RecipeConfig& r = cfg.recipe;
  {
    const Json empty = Json::object();
    Section s(top.present("recipe") ? top.at("recipe") : empty, "recipe");
    r.kind = parse_recipe_kind(s.get<std::string>("kind", "vs"));
    if (s.present("levels")) {
      const Json& levels = s.at("levels");
      if (!levels.is_array()) throw ConfigError("recipe.levels must be an array of arrays");
      for (const auto& level : levels) {
        if (!level.is_array()) throw ConfigError("recipe.levels must be an array of arrays");
        std::vector<ObjectiveId> ids;
        for (const auto& name : level) {
          if (!name.is_string()) throw ConfigError("recipe.levels entries must be objective names");
          try {
            ids.push_back(ObjectiveId::parse(name.get<std::string>()));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("recipe.levels: ") + e.what());
          }
        }
        r.levels.push_back(std::move(ids));
      }
    }
    r.use_unsupervised = s.get<bool>("use_unsupervised", true);
    r.order_label = s.get<std::string>("order", "");
    if (s.present("level_penalties")) {
      const Json& list = s.at("level_penalties");
      if (!list.is_array()) throw ConfigError("recipe.level_penalties must be an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        r.level_penalties.push_back(
            parse_schedule(list[i], "recipe.level_penalties[" + std::to_string(i) + "]"));
      }
    }
    if (s.present("unsup_penalty")) r.unsup_penalty = parse_schedule(s.at("unsup_penalty"), "recipe.unsup_penalty");
    r.nested = s.get<bool>("nested", false);
    if (s.present("static_weights")) {
      r.static_weights = numbers(s.at("static_weights"), "recipe.static_weights");
    }
    r.epsilon = s.optional<double>("epsilon");
    r.pretrain_epochs = s.count("pretrain_epochs", 0);
    r.conflict.mode = parse_conflict_mode(s.get<std::string>("conflict_mode", "negative_pairs"));
    r.conflict.tau = s.get<double>("conflict_tau", 0.0);
    s.finish();
  }

  TrainOptions& t = cfg.train;
  {
    const Json empty = Json::object();
    Section s(top.present("optimizer") ? top.at("optimizer") : empty, "optimizer");
    r.alpha = s.get<double>("alpha", r.alpha);
    r.beta = s.get<double>("beta", r.beta);
    r.gamma.base = s.get<double>("gamma", r.gamma.base);
    const auto schedule = s.get<std::string>("gamma_schedule", "constant");
    if (schedule == "constant") {
      r.gamma.kind = GammaSchedule::Kind::Constant;
    } else if (schedule == "inv_sqrt") {
      r.gamma.kind = GammaSchedule::Kind::InvSqrt;
    } else {
      throw ConfigError("optimizer.gamma_schedule must be \"constant\" or \"inv_sqrt\"");
    }
    t.batch_size = s.count("batch_size", 64);
    t.iters_per_epoch = s.count("iters_per_epoch", 100);
    t.epochs = s.count("epochs", 10);
    t.log_every = s.count("log_every", 10);
    t.efficient_mode = s.get<bool>("efficient_mode", false);
    t.warmup_epochs = s.count("warmup_epochs", 20);
    t.full_batch = s.get<bool>("full_batch", false);
    t.stationarity_tol = s.get<double>("stationarity_tol", 1e-10);
    t.stationarity_max_iter = s.count("stationarity_max_iter", 10000);
    s.finish();
  }

  {
    const Json empty = Json::object();
    Section s(top.present("output") ? top.at("output") : empty, "output");
    cfg.output_directory = s.get<std::string>("directory", "");
    if (s.present("formats")) {
      const Json& f = s.at("formats");
      if (!f.is_array()) throw ConfigError("output.formats must be an array");
      cfg.output_formats.clear();
      for (const auto& x : f) {
        if (!x.is_string() || (x != "jsonl" && x != "csv")) {
          throw ConfigError("output.formats entries must be \"jsonl\" or \"csv\"");
        }
        cfg.output_formats.push_back(x.get<std::string>());
      }
    }
    s.finish();
  }
  top.finish();

  r = r.resolved(spec);
  validate_run(*problem, r, t);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(doc, seed_override);
}

Json resolved_config_json(const ExperimentConfig& cfg) {
  const RecipeConfig& r = cfg.recipe;
  const TrainOptions& t = cfg.train;
  Json out;
  out["problem"] = cfg.problem;

  Json recipe;
  recipe["kind"] = to_string(r.kind);
  Json levels = Json::array();
  for (const auto& level : r.levels) {
    Json names = Json::array();
    for (const auto& id : level) names.push_back(id.name());
    levels.push_back(std::move(names));
  }
  recipe["levels"] = std::move(levels);
  recipe["use_unsupervised"] = r.use_unsupervised;
  recipe["order"] = r.order_label;
  Json penalties = Json::array();
  for (const auto& p : r.level_penalties) penalties.push_back(schedule_json(p));
  recipe["level_penalties"] = std::move(penalties);
  recipe["unsup_penalty"] = schedule_json(r.unsup_penalty);
  recipe["nested"] = r.nested;
  recipe["static_weights"] = r.static_weights ? Json(*r.static_weights) : Json(nullptr);
  recipe["epsilon"] = r.epsilon ? Json(*r.epsilon) : Json(nullptr);
  recipe["pretrain_epochs"] = r.pretrain_epochs;
  recipe["conflict_mode"] = to_string(r.conflict.mode);
  recipe["conflict_tau"] = r.conflict.tau;
  out["recipe"] = std::move(recipe);

  Json opt;
  opt["alpha"] = r.alpha;
  opt["beta"] = r.beta;
  opt["gamma"] = r.gamma.base;
  opt["gamma_schedule"] = r.gamma.kind == GammaSchedule::Kind::Constant ? "constant" : "inv_sqrt";
  opt["batch_size"] = t.batch_size;
  opt["iters_per_epoch"] = t.iters_per_epoch;
  opt["epochs"] = t.epochs;
  opt["log_every"] = t.log_every;
  opt["efficient_mode"] = t.efficient_mode;
  opt["warmup_epochs"] = t.warmup_epochs;
  opt["full_batch"] = t.full_batch;
  opt["stationarity_tol"] = t.stationarity_tol;
  opt["stationarity_max_iter"] = t.stationarity_max_iter;
  out["optimizer"] = std::move(opt);

  Json output;
  output["directory"] = cfg.output_directory;
  output["formats"] = cfg.output_formats;
  out["output"] = std::move(output);
  return out;
}

}  // namespace objsoup
