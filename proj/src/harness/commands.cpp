#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "objsoup/error.hpp"
#include "objsoup/harness.hpp"
#include "objsoup/rng.hpp"

namespace objsoup {
namespace fs = std::filesystem;
namespace {

constexpr double kToleranceForCount = 1e-4;
constexpr double kGradcheckTolerance = 1e-4;

class NullSink final : public TraceSink {
 public:
  void write(const Json&) override {}
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Problem identity across seeds: structure plus every parameter but the seed.
std::string problem_tag(const Json& section, const Problem& problem) {
  Json copy = section;
  copy.erase("seed");
  const std::string text = problem_fingerprint(problem) + copy.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return hex64(h);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw IoError("cannot write " + path.string());
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line + "\n";
}

// Flat per-record view of a trace for spreadsheet tools.
std::string trace_csv(const std::vector<Json>& records) {
  std::vector<std::string> names;
  for (const auto& r : records) {
    if (r.contains("losses") && r["losses"].is_object()) {
      for (const auto& [k, v] : r["losses"].items()) names.push_back(k);
      break;
    }
  }
  std::vector<std::string> header = {"iter", "epoch", "phase", "stationarity", "pareto_distance",
                                     "feasibility_gap"};
  for (const auto& n : names) header.push_back("loss_" + n);
  std::string out = csv_row(header);
  for (const auto& r : records) {
    if (!r.contains("iter") || r.contains("diagnostic")) continue;
    std::vector<std::string> row = {cell(r["iter"]),        cell(r["epoch"]),
                                    cell(r["phase"]),       cell(r["stationarity"]),
                                    cell(r["pareto_distance"]), cell(r["feasibility_gap"])};
    for (const auto& n : names) row.push_back(cell(r["losses"].value(n, Json(nullptr))));
    out += csv_row(row);
  }
  return out;
}

int report(const std::exception& e, int code) {
  std::cerr << "objsoup: " << e.what() << "\n";
  return code;
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    return report(e, kExitConfig);
  } catch (const StructureError& e) {
    return report(e, kExitConfig);
  } catch (const NumericalError& e) {
    return report(e, kExitNumerical);
  } catch (const IoError& e) {
    return report(e, kExitIo);
  } catch (const fs::filesystem_error& e) {
    return report(e, kExitIo);
  } catch (const std::invalid_argument& e) {
    return report(e, kExitConfig);
  }
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed record");
    }
  }
  return records;
}

Json summarize_trace(const std::vector<Json>& records) {
  const Json* final_record = nullptr;
  const Json* last = nullptr;
  Json to_tolerance = nullptr;
  for (const auto& r : records) {
    if (r.value("final", false)) {
      final_record = &r;
    } else if (r.contains("iter") && !r.contains("diagnostic")) {
      last = &r;
      const auto& s = r["stationarity"];
      if (to_tolerance.is_null() && s.is_number() && s.get<double>() <= kToleranceForCount) {
        to_tolerance = r["iter"];
      }
    }
  }
  if (!final_record || !last) throw ConfigError("trace is incomplete (no final record)");

  double max_loss = -INFINITY;
  for (const auto& [name, v] : (*last)["losses"].items()) {
    if (name != "unsup" && v.is_number()) max_loss = std::max(max_loss, v.get<double>());
  }

  Json s;
  s["recipe"] = (*last)["recipe"];
  s["order"] = (*last)["order"];
  s["problem"] = (*final_record)["problem"];
  s["seed"] = (*final_record)["seed"];
  s["iterations"] = (*final_record)["iterations"];
  s["wallclock_ms"] = (*final_record)["wallclock_ms"];
  s["params_hash"] = (*final_record)["params_hash"];
  s["final_losses"] = (*last)["losses"];
  s["max_supervised_loss"] = std::isfinite(max_loss) ? Json(max_loss) : Json(nullptr);
  s["stationarity"] = (*last)["stationarity"];
  s["pareto_distance"] = (*last)["pareto_distance"];
  s["feasibility_gap"] = (*last)["feasibility_gap"];
  s["feasible"] = (*last)["feasible"];
  s["eta"] = (*last)["eta"];
  s["lambda"] = (*last)["lambda"];
  s["lambda_u"] = (*last)["lambda_u"];
  s["conflict_layers"] = (*last)["conflict_layers"];
  s["restricted"] = (*last)["restricted"];
  s["iterations_to_tolerance"] = to_tolerance;
  return s;
}

Json accumulator_to_json(const GradientAccumulator& acc) {
  Json out;
  out["window"] = acc.window_epochs();
  out["epochs_observed"] = acc.epochs_observed();
  out["count"] = acc.count();
  Json objectives = Json::array();
  Json sums = Json::object();
  if (!acc.empty()) {
    const GradientMatrix totals = acc.total_sums();
    for (std::size_t m = 0; m < totals.num_objectives(); ++m) {
      objectives.push_back(totals.objectives()[m].name());
      Json blocks = Json::object();
      for (const auto& [id, v] : totals.column(m).blocks()) blocks[id.name()] = v;
      sums[totals.objectives()[m].name()] = std::move(blocks);
    }
  }
  out["objectives"] = std::move(objectives);
  out["sums"] = std::move(sums);
  return out;
}

GradientAccumulator accumulator_from_json(const Json& doc) {
  try {
    const std::size_t count = doc.at("count").get<std::size_t>();
    if (count == 0 || doc.at("objectives").empty()) {
      throw ConfigError("accumulator holds no gradients");
    }
    std::vector<ObjectiveId> ids;
    std::vector<ParamVector> columns;
    for (const auto& name : doc.at("objectives")) {
      ids.push_back(ObjectiveId::parse(name.get<std::string>()));
      ParamVector::Storage blocks;
      for (const auto& [block, values] : doc.at("sums").at(name.get<std::string>()).items()) {
        blocks.emplace(BlockId::parse(block), values.get<std::vector<double>>());
      }
      columns.emplace_back(std::move(blocks));
    }
    return GradientAccumulator::from_totals(GradientMatrix(std::move(ids), std::move(columns)),
                                            count, doc.at("epochs_observed").get<std::size_t>(),
                                            doc.at("window").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed accumulator data: ") + e.what());
  }
}

int cmd_run(const fs::path& config_path, const std::optional<std::string>& out_dir,
            std::optional<std::uint64_t> seed) {
  return guarded([&] {
    ExperimentConfig cfg = load_experiment_config(config_path, seed);
    if (out_dir) cfg.output_directory = *out_dir;
    if (cfg.output_directory.empty()) {
      throw ConfigError("no output directory (use --out or output.directory)");
    }
    const auto problem = build_problem(cfg.problem, cfg.train.seed);
    cfg.train.problem_tag = problem_tag(cfg.problem, *problem);

    const fs::path dir = cfg.output_directory;
    fs::create_directories(dir);
    write_text(dir / "config.resolved.json", resolved_config_json(cfg).dump(2) + "\n");

    RunResult result;
    {
      std::ofstream trace(dir / "trace.jsonl", std::ios::binary);
      if (!trace) throw IoError("cannot write " + (dir / "trace.jsonl").string());
      StreamTraceSink sink(trace);
      try {
        result = train(*problem, cfg.recipe, cfg.train, sink);
      } catch (const NumericalError& e) {
        trace.flush();
        std::cerr << "objsoup: numerical failure: " << e.what() << " (diagnostic record in "
                  << (dir / "trace.jsonl").string() << ")\n";
        return static_cast<int>(kExitNumerical);
      }
      trace.close();
      if (!trace) throw IoError("cannot write " + (dir / "trace.jsonl").string());
    }
    const auto records = read_jsonl(dir / "trace.jsonl");
    write_text(dir / "summary.json", summarize_trace(records).dump(2) + "\n");
    write_text(dir / "accumulator.json", accumulator_to_json(result.accumulator).dump() + "\n");
    for (const auto& format : cfg.output_formats) {
      if (format == "csv") write_text(dir / "trace.csv", trace_csv(records));
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_conflicts(const std::optional<fs::path>& run_dir, const std::optional<fs::path>& config_path,
                  const fs::path& out_csv, bool per_layer) {
  return guarded([&] {
    if (run_dir.has_value() == config_path.has_value()) {
      throw ConfigError("conflicts needs exactly one of --run or --config");
    }
    ConflictOptions options;
    std::optional<GradientAccumulator> acc;
    if (run_dir) {
      const fs::path file = *run_dir / "accumulator.json";
      if (!fs::exists(file)) throw ConfigError("no accumulator data in " + run_dir->string());
      acc = accumulator_from_json(read_json(file));
      const fs::path resolved = *run_dir / "config.resolved.json";
      if (fs::exists(resolved)) {
        const Json cfg = read_json(resolved);
        const Json recipe = cfg.value("recipe", Json::object());
        options.mode = parse_conflict_mode(recipe.value("conflict_mode", "negative_pairs"));
        options.tau = recipe.value("conflict_tau", 0.0);
      }
    } else {
      ExperimentConfig cfg = load_experiment_config(*config_path);
      const auto problem = build_problem(cfg.problem, cfg.train.seed);
      TrainOptions t = cfg.train;
      t.epochs = t.warmup_epochs;
      t.efficient_mode = false;
      t.log_every = std::max<std::size_t>(t.iters_per_epoch * std::max<std::size_t>(t.epochs, 1), 1);
      NullSink sink;
      acc = train(*problem, cfg.recipe, t, sink).accumulator;
      options = cfg.recipe.conflict;
      if (acc->empty()) throw ConfigError("accumulation produced no gradients (warmup_epochs = 0)");
    }
    const ConflictReport rep = detect_conflicting_layers(*acc, options);
    write_text(out_csv, report_to_csv(rep, per_layer));
    std::cout << "conflicting layers:";
    for (const auto& id : rep.conflicting_layers) std::cout << ' ' << id.name();
    std::cout << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_compare(const std::vector<fs::path>& run_dirs, const fs::path& out_csv) {
  return guarded([&] {
    if (run_dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
    std::vector<Json> summaries;
    for (const auto& dir : run_dirs) summaries.push_back(summarize_trace(read_jsonl(dir / "trace.jsonl")));
    for (const auto& s : summaries) {
      if (s["problem"] != summaries.front()["problem"]) {
        throw ConfigError("runs are over different problems (fingerprints differ)");
      }
    }
    std::vector<std::string> names;
    for (const auto& [k, v] : summaries.front()["final_losses"].items()) names.push_back(k);

    const auto group = [](const Json& s) {
      const std::string order = s["order"];
      return s["recipe"].get<std::string>() + (order.empty() ? "" : "/" + order);
    };
    const std::vector<std::string> metrics = {"stationarity", "pareto_distance", "feasibility_gap",
                                              "max_supervised_loss"};
    std::map<std::string, std::map<std::string, std::vector<double>>> groups;
    for (const auto& s : summaries) {
      for (const auto& m : metrics) {
        if (s[m].is_number()) groups[group(s)][m].push_back(s[m].get<double>());
      }
    }

    std::vector<std::string> header = {"run", "recipe", "order", "seed"};
    for (const auto& n : names) header.push_back("loss_" + n);
    for (const auto& m : metrics) header.push_back(m);
    header.push_back("iterations");
    header.push_back("iterations_to_tolerance");
    for (const auto& m : metrics) header.push_back("recipe_mean_" + m);
    std::string out = csv_row(header);
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      const Json& s = summaries[i];
      std::vector<std::string> row = {run_dirs[i].string(), cell(s["recipe"]), cell(s["order"]),
                                      cell(s["seed"])};
      for (const auto& n : names) row.push_back(cell(s["final_losses"].value(n, Json(nullptr))));
      for (const auto& m : metrics) row.push_back(cell(s[m]));
      row.push_back(cell(s["iterations"]));
      row.push_back(cell(s["iterations_to_tolerance"]));
      for (const auto& m : metrics) {
        const auto& values = groups[group(s)][m];
        row.push_back(values.empty() ? "" : cell(Json(mean_of(values))));
      }
      out += csv_row(row);
    }
    write_text(out_csv, out);
    return static_cast<int>(kExitOk);
  });
}

int cmd_gradcheck(const std::string& problem_name, std::optional<double> h,
                  std::uint64_t params_seed, std::size_t points, std::optional<double> corrupt) {
  return guarded([&] {
    if (points == 0) throw ConfigError("--points must be >= 1");
    std::shared_ptr<const Problem> problem =
        build_problem(default_problem_section(problem_name), params_seed);
    if (corrupt) problem = make_corrupted(problem, *corrupt);
    const double step = h.value_or(problem->default_fd_step());
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("--h must be positive");

    std::map<ObjectiveId, GradCheckEntry> worst;
    const std::uint64_t init = derive_seed(params_seed, "init");
    for (std::size_t p = 0; p < points; ++p) {
      const ParamVector params = problem->initial_params(derive_seed(init, {p}));
      for (const auto& e : gradient_check(*problem, params, step)) {
        auto it = worst.find(e.objective);
        if (it == worst.end() || e.max_rel_error > it->second.max_rel_error) worst[e.objective] = e;
      }
    }
    bool ok = true;
    std::printf("%-8s %-14s %-24s %-24s %s\n", "objective", "max_rel_error", "worst", "analytic",
                "numeric");
    for (const auto& id : problem->spec().objectives) {
      const auto& e = worst.at(id);
      const bool pass = e.max_rel_error < kGradcheckTolerance;
      ok = ok && pass;
      const std::string where = e.worst_block.name() + "[" + std::to_string(e.worst_index) + "]";
      std::printf("%-8s %-14.6e %-24s %-24.17g %-24.17g %s\n", id.name().c_str(), e.max_rel_error,
                  where.c_str(), e.analytic, e.numeric, pass ? "ok" : "FAIL");
    }
    std::printf("h = %.6g, points = %zu: %s\n", step, points, ok ? "pass" : "fail");
    return static_cast<int>(ok ? kExitOk : kExitNumerical);
  });
}

}  // namespace objsoup
