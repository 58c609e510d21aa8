// fdia: command-line front end for data generation, detector training,
// attacks and defenses.
//
// Exit codes: 0 ok, 1 usage, 2 data or parse error, 3 numerical failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdia/fdia.hpp"

namespace fs = std::filesystem;
using namespace fdia;

namespace {

struct Common {
  std::string case_path;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--case", c.case_path, "Grid case file (.json native, .m matpower subset)");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--config", c.config, "JSON experiment config");
  app->add_option("--out", c.out, "Output path");
  app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
}

Profile profile_of(const Common& c) {
  Profile p = c.config.empty() ? Profile{} : load_profile(c.config);
  if (!c.case_path.empty()) p.case_path = c.case_path;
  if (c.seed) p.seed = *c.seed;
  return p;
}

ReportFormat format_of(const Common& c) { return c.format == "json" ? ReportFormat::json : ReportFormat::csv; }

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
  } else {
    detail::write_file(c.out, text);
  }
}

void log(const std::string& line) { std::cerr << line << '\n'; }

std::shared_ptr<const StealthSpace> space_for(const Profile& p) {
  if (p.case_path.empty()) throw UsageError("a grid case is required (--case or \"case\" in --config)");
  return StealthSpace::make(build_h(load_case(p.case_path)));
}

/// test_k<k>.csv / .bin files of a directory, ascending k; or one file.
std::vector<Dataset> load_tests(const std::string& where) {
  if (where.empty()) throw UsageError("--tests is required");
  std::vector<std::pair<int, fs::path>> files;
  if (fs::is_directory(where)) {
    const std::regex pattern(R"(test_k(\d+)\.(csv|bin))");
    for (const auto& e : fs::directory_iterator(where)) {
      std::smatch m;
      const auto name = e.path().filename().string();
      if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoi(m[1]), e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.emplace_back(0, where);
  }
  if (files.empty()) throw DataError("no test_k*.csv files in " + where);
  std::vector<Dataset> sets;
  for (const auto& [k, path] : files) sets.push_back(load_dataset(path));
  return sets;
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed JSON in " + path + ": " + e.what());
  }
}

/// One-row evaluation table.
std::string evaluation_text(const Common& c, const std::string& case_name, const std::string& model, const Evaluation& ev,
                            std::size_t n_train, const nlohmann::json& extra = nlohmann::json::object()) {
  if (c.format == "json") {
    nlohmann::json j{{"case", case_name}, {"model", model},       {"accuracy", ev.accuracy}, {"recall", ev.recall},
                     {"precision", ev.precision}, {"n_train", n_train}, {"n_test", ev.total},
                     {"confusion", {{ev.confusion[0][0], ev.confusion[0][1]}, {ev.confusion[1][0], ev.confusion[1][1]}}}};
    j.update(extra);
    return j.dump(2) + "\n";
  }
  return "case,model,accuracy,recall,precision,n_train,n_test\n" + case_name + ',' + model + ',' + format_double(ev.accuracy) +
         ',' + format_double(ev.recall) + ',' + format_double(ev.precision) + ',' + std::to_string(n_train) + ',' +
         std::to_string(ev.total) + '\n';
}

Split training_split(const Profile& p, const std::string& data) {
  if (data.empty()) throw UsageError("--data is required");
  return split(load_dataset(data), p.test_fraction, p.stream("split"));
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const Common& c, bool binary) {
  const Profile p = profile_of(c);
  if (c.out.empty()) throw UsageError("gen-data needs --out <directory>");
  if (p.case_path.empty()) throw UsageError("a grid case is required (--case or \"case\" in --config)");
  const fs::path dir = c.out;
  const GenerationContext ctx(load_case(p.case_path), p.generation, p.seed);
  const auto train = build_train_set(ctx);
  save_dataset(train, dir / "train.csv");
  if (binary) save_dataset(train, dir / "train.bin");
  const auto tests = build_test_sets(ctx, train.mean_l1);
  nlohmann::json files = nlohmann::json::array({"train.csv"});
  for (const auto& t : tests) {
    const std::string name = "test_k" + std::to_string(t.scenarios.front().k()) + ".csv";
    save_dataset(t, dir / name);
    files.push_back(name);
  }
  nlohmann::json manifest{{"case", train.case_name}, {"seed", p.seed},  {"tau", train.tau},
                          {"mean_l1", train.mean_l1}, {"files", files}, {"generation", ctx.echo()}};
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  log("wrote " + std::to_string(train.size()) + " training rows and " + std::to_string(tests.size()) + " test sets to " + dir.string());
}

void cmd_train(const Common& c, const std::string& data, const std::string& report) {
  const Profile p = profile_of(c);
  if (c.out.empty()) throw UsageError("train needs --out <model.json>");
  const auto parts = training_split(p, data);
  const auto trained =
      train_detector(parts.train.z, parts.train.labels, detector_layers(static_cast<int>(parts.train.m())), p.training_for("train"));
  detail::write_file(c.out, save_model(trained.model));
  const auto ev = evaluate(trained.model, parts.test.z, parts.test.labels);
  log("trained in " + std::to_string(trained.log.seconds) + " s; held-out accuracy " + std::to_string(ev.accuracy));
  const auto text = evaluation_text(c, parts.train.case_name, "plain", ev, parts.train.size());
  if (report.empty()) std::cout << text;
  else detail::write_file(report, text);
}

void cmd_train_padded(const Common& c, const std::string& data, std::optional<int> pad_width, const std::string& report) {
  const Profile p = profile_of(c);
  if (c.out.empty()) throw UsageError("train-padded needs --out <model.json>");
  const int w = pad_width.value_or(p.pad_width);
  const auto parts = training_split(p, data);
  const auto m = static_cast<int>(parts.train.m());
  const auto trained = train_padded(parts.train.z, parts.train.labels, w, detector_layers(m + w), p.training_for("train-padded"));
  detail::write_file(c.out, padded_to_json(trained.model).dump());
  const auto ev = evaluate_padded(trained.model, parts.test.z, parts.test.labels, p.stream("padded-eval"));
  log("trained padded model P = " + std::to_string(m + w) + " in " + std::to_string(trained.log.seconds) + " s");
  const auto text = evaluation_text(c, parts.train.case_name, "padded", ev, parts.train.size(),
                                    {{"pad_width", w}, {"offset_histogram", trained.offset_histogram}});
  if (report.empty()) std::cout << text;
  else detail::write_file(report, text);
}

void cmd_distill(const Common& c, const std::string& data, std::optional<double> temperature, const std::string& report) {
  const Profile p = profile_of(c);
  if (c.out.empty()) throw UsageError("distill needs --out <model.json>");
  const double t = temperature.value_or(p.temperatures.empty() ? 1.0 : p.temperatures.front());
  const auto parts = training_split(p, data);
  const auto d = distill(parts.train.z, parts.train.labels, detector_layers(static_cast<int>(parts.train.m())),
                         p.training_for("distill-" + format_double(t)), {t});
  detail::write_file(c.out, save_model(d.student));
  const auto ev = evaluate(d.student, parts.test.z, parts.test.labels);
  const double sens = input_sensitivity(d.student, parts.test.z, parts.test.labels, 1.0);
  const auto text = evaluation_text(c, parts.train.case_name, "distilled", ev, parts.train.size(),
                                    {{"temperature", t}, {"input_sensitivity", sens}});
  if (report.empty()) std::cout << text;
  else detail::write_file(report, text);
}

void cmd_adv_train(const Common& c, const std::string& data, std::optional<int> max_iters, const std::string& report) {
  const Profile p = profile_of(c);
  if (c.out.empty()) throw UsageError("adv-train needs --out <model.json>");
  const auto parts = training_split(p, data);
  const auto space = space_for(p);
  const auto systems = build_systems(space, parts.train);
  const auto per_row = row_systems(parts.train, systems);
  AttackConfig ac;
  ac.max_iters = max_iters.value_or(p.adversarial_max_iters);
  const auto adv = adversarial_training(parts.train.z, parts.train.labels, per_row, parts.train.a,
                                        detector_layers(static_cast<int>(parts.train.m())), p.training_for("train"), ac);
  detail::write_file(c.out, save_model(adv.model));
  log("adversarial training: " + std::to_string(adv.stats.generated) + " samples appended in " + std::to_string(adv.log.seconds) + " s");
  const auto ev = evaluate(adv.model, parts.test.z, parts.test.labels);
  const auto text = evaluation_text(c, parts.train.case_name, "adversarial", ev, parts.train.size(),
                                    {{"generated", adv.stats.generated}, {"skipped", adv.stats.skipped}, {"rejected", adv.stats.rejected}});
  if (report.empty()) std::cout << text;
  else detail::write_file(report, text);
}

void cmd_attack(const Common& c, const std::string& model_path, const std::string& tests_path, std::vector<double> sizes,
                std::optional<int> max_iters, const std::string& vectors) {
  const Profile p = profile_of(c);
  if (model_path.empty()) throw UsageError("--model is required");
  const auto sets = load_tests(tests_path);
  const auto space = space_for(p);
  auto cfg = experiment_config(p);
  if (!sizes.empty()) cfg.sizes = sizes;
  if (max_iters) cfg.max_iters = *max_iters;
  const auto doc = read_json(model_path);
  MetricsReport report;
  if (doc.value("format", std::string{}) == "fdia-padded") {
    report = run_attack_experiment(padded_from_json(doc), space, sets, cfg);
  } else {
    report = run_attack_experiment(model_from_json(doc), space, sets, cfg);
  }
  for (const auto& row : report.rows)
    log("k=" + std::to_string(row.k) + " size=" + format_double(row.size) + " recall=" + format_double(row.recall) +
        " median attack time " + std::to_string(row.median_seconds) + " s");
  if (!vectors.empty()) {
    std::vector<std::pair<std::string, int>> tags;
    Eigen::Index cols = 0;
    for (const auto& set : sets) cols += set.a.cols();
    Matrix all(sets.front().a.rows(), cols);
    Eigen::Index at = 0;
    for (const auto& set : sets) {
      all.middleCols(at, set.a.cols()) = set.a;
      at += set.a.cols();
      for (std::size_t i = 0; i < set.size(); ++i) tags.emplace_back("false", set.scenarios.front().k());
    }
    detail::write_file(vectors, vectors_to_csv(tags, all));
  }
  emit(c, render_report(report, format_of(c)));
}

void cmd_vanilla(const Common& c, const std::string& model_path, const std::string& tests_path, std::vector<double> alphas) {
  const Profile p = profile_of(c);
  if (model_path.empty()) throw UsageError("--model is required");
  if (alphas.empty()) alphas = p.alphas;
  const auto sets = load_tests(tests_path);
  const auto model = model_from_json(read_json(model_path));
  auto report = run_vanilla_sweep(model, sets, alphas);
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::vector<double> rec;
    for (std::size_t a = 0; a < alphas.size(); ++a) rec.push_back(report.rows[s * alphas.size() + a].recall);
    const double rho = alphas.size() >= 2 ? spearman(alphas, rec) : 0.0;
    report.config["spearman_k" + std::to_string(sets[s].scenarios.front().k())] = rho;
    log("k=" + std::to_string(sets[s].scenarios.front().k()) + " spearman(alpha, recall) = " + std::to_string(rho));
  }
  emit(c, render_report(report, format_of(c)));
}

void cmd_detect_adv(const Common& c, const std::string& model_path, const std::string& data, const std::string& vectors) {
  const Profile p = profile_of(c);
  if (model_path.empty()) throw UsageError("--model is required");
  if (data.empty()) throw UsageError("--data is required");
  const auto model = model_from_json(read_json(model_path));
  const auto ds = load_dataset(data);
  AttackConfig ac;
  ac.size = p.attack_sizes.empty() ? ac.size : p.attack_sizes.front();
  ac.max_iters = p.max_iters;
  const auto exp = run_detection_experiment(model, space_for(p), ds, ac, detector_layers(static_cast<int>(ds.m())),
                                            p.training_for("adv-detect"), p.detection_holdout);
  if (!vectors.empty()) {
    std::vector<std::pair<std::string, int>> tags;
    Matrix all(exp.false_vectors.rows(), exp.false_vectors.cols() + exp.adversarial_vectors.cols());
    all << exp.false_vectors, exp.adversarial_vectors;
    for (int k : exp.false_k) tags.emplace_back("false", k);
    for (int k : exp.adversarial_k) tags.emplace_back("adversarial", k);
    detail::write_file(vectors, vectors_to_csv(tags, all));
  }
  const auto& d = exp.detector;
  std::string text;
  if (c.format == "json") {
    text = nlohmann::json{{"case", ds.case_name},
                          {"n_false", exp.false_vectors.cols()},
                          {"n_adversarial", exp.adversarial_vectors.cols()},
                          {"attacked", exp.attacked},
                          {"holdout", d.holdout_size},
                          {"accuracy", d.holdout.accuracy},
                          {"auc", d.auc},
                          {"mimic_auc", exp.mimic_auc}}
               .dump(2) + "\n";
  } else {
    text = "case,n_false,n_adversarial,holdout,accuracy,auc\n" + ds.case_name + ',' + std::to_string(exp.false_vectors.cols()) +
           ',' + std::to_string(exp.adversarial_vectors.cols()) + ',' + std::to_string(d.holdout_size) + ',' +
           format_double(d.holdout.accuracy) + ',' + format_double(d.auc) + '\n';
  }
  emit(c, text);
}

void cmd_report(const Common& c, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw UsageError("report needs at least one --input");
  MetricsReport merged;
  merged.config = nlohmann::json::array();
  for (const auto& in : inputs) {
    auto r = load_report(in);
    merged.kind = r.kind;
    merged.config.push_back({{"source", fs::path(in).filename().string()}, {"config", r.config}});
    for (auto& row : r.rows) merged.rows.push_back(std::move(row));
  }
  emit(c, render_report(merged, format_of(c)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False data injection simulator, neural detectors, attacks and defenses"};
  app.require_subcommand(1);

  Common common;
  std::string data, model, tests, report, vectors;
  std::optional<int> pad_width, max_iters;
  std::optional<double> temperature;
  std::vector<double> sizes, alphas;
  std::vector<std::string> inputs;
  bool binary = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the training set and the per-k test sets");
  add_common(gen, common);
  gen->add_flag("--binary", binary, "Also write train.bin");

  auto* train = app.add_subcommand("train", "Train the plain detector");
  auto* padded = app.add_subcommand("train-padded", "Train a detector with random input padding");
  auto* dist = app.add_subcommand("distill", "Defensive distillation");
  auto* adv = app.add_subcommand("adv-train", "Adversarial training");
  for (auto* sc : {train, padded, dist, adv}) {
    add_common(sc, common);
    sc->add_option("--data", data, "Training dataset (.csv or .bin)")->required();
    sc->add_option("--report", report, "Write the held-out evaluation here instead of stdout");
  }
  padded->add_option("--pad-width", pad_width, "P - m");
  dist->add_option("--temperature", temperature, "Distillation temperature");
  adv->add_option("--max-iters", max_iters, "Attack iteration cap per batch");

  auto* attack = app.add_subcommand("attack", "Constrained white-box attack on a trained detector");
  add_common(attack, common);
  attack->add_option("--model", model, "Model file (plain or padded)")->required();
  attack->add_option("--tests", tests, "Directory of test_k*.csv files or one test set")->required();
  attack->add_option("--size", sizes, "Step sizes");
  attack->add_option("--max-iters", max_iters, "Iteration cap");
  attack->add_option("--vectors", vectors, "Export the injected vectors of the test sets");

  auto* vanilla = app.add_subcommand("vanilla", "Scale the injected data by alpha");
  add_common(vanilla, common);
  vanilla->add_option("--model", model, "Plain model file")->required();
  vanilla->add_option("--tests", tests, "Directory of test_k*.csv files or one test set")->required();
  vanilla->add_option("--alphas", alphas, "Scale factors");

  auto* detect = app.add_subcommand("detect-adv", "Train a false-vs-adversarial classifier");
  add_common(detect, common);
  detect->add_option("--model", model, "Plain model attacked to produce adversarial samples")->required();
  detect->add_option("--data", data, "Dataset whose False rows are used")->required();
  detect->add_option("--vectors", vectors, "Export false and adversarial injected vectors");

  auto* rep = app.add_subcommand("report", "Merge and convert attack reports");
  add_common(rep, common);
  rep->add_option("--input", inputs, "Report files (csv or json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) cmd_gen_data(common, binary);
    else if (train->parsed()) cmd_train(common, data, report);
    else if (padded->parsed()) cmd_train_padded(common, data, pad_width, report);
    else if (dist->parsed()) cmd_distill(common, data, temperature, report);
    else if (adv->parsed()) cmd_adv_train(common, data, max_iters, report);
    else if (attack->parsed()) cmd_attack(common, model, tests, sizes, max_iters, vectors);
    else if (vanilla->parsed()) cmd_vanilla(common, model, tests, alphas);
    else if (detect->parsed()) cmd_detect_adv(common, model, data, vectors);
    else if (rep->parsed()) cmd_report(common, inputs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
