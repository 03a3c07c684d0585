#include "cdrlink/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdrlink/bayesbound.hpp"
#include "cdrlink/civil_time.hpp"
#include "cdrlink/csv.hpp"
#include "cdrlink/decompose.hpp"
#include "cdrlink/evaluate.hpp"
#include "cdrlink/experiment.hpp"
#include "cdrlink/featurize.hpp"
#include "cdrlink/hashing.hpp"
#include "cdrlink/ingest.hpp"
#include "cdrlink/learn.hpp"
#include "cdrlink/pairgraph.hpp"
#include "cdrlink/synthgen.hpp"
#include "model_io.hpp"

namespace cdrlink::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

/// Missing or unwritable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string events;
  std::string subscribers;
  std::string window_start;
  std::string window_end;
  std::int64_t utc_offset = 0;
  std::size_t min_months = 5;
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  std::string task = "ogp";
  std::string model = "lsvm";
  std::string penalty = "l2";
  std::string feature_select = "none";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t n_comp = 5;
  double cutoff = 0.4;
  std::size_t jobs = 1;
  std::string out = ".";
  std::string preset = "table3-like";
  std::size_t n_pairs = 1000;
  std::string config;
  std::string pairs;
  std::string features;
  std::string model_json;
  std::string bracket = "L";
  std::vector<std::string> reports;
  std::string predictions;
  bool loo = false;
  std::string common_graph = "raw";
  bool no_calibration = false;
};

std::ifstream open_input(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("missing required input path");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return in;
}

std::string read_text(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Tracks the files a stage reads and writes, then emits `<subcommand>.manifest.json`.
class RunManifest {
 public:
  RunManifest(std::string subcommand, std::string out_dir) : subcommand_(std::move(subcommand)), out_(std::move(out_dir)) {
    fs::create_directories(out_);
  }

  void input(const std::string& path) { inputs_[path] = sha256_file(path); }
  void config(const std::string& key, Json value) { config_[key] = std::move(value); }
  void seeds(std::vector<std::uint64_t> seeds) { seeds_ = std::move(seeds); }

  std::string path(const std::string& name) const { return (fs::path(out_) / name).string(); }

  /// Writes `text` to `<out>/<name>` and records its hash.
  std::string write(const std::string& name, const std::string& text) {
    const std::string p = path(name);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot write '{}'", p));
    f << text;
    f.close();
    if (!f) throw IoError(fmt::format("failed writing '{}'", p));
    outputs_[p] = sha256_hex(text);
    return p;
  }

  template <typename Fn>
  std::string write_with(const std::string& name, Fn fn) {
    std::ostringstream buffer;
    fn(buffer);
    return write(name, buffer.str());
  }

  void finish() {
    Json j;
    j["subcommand"] = subcommand_;
    j["version"] = CDRLINK_VERSION;
    j["manifest_hash"] = manifest_hash();
    j["config"] = config_;
    j["seeds"] = seeds_;
    j["inputs"] = Json::object();
    for (const auto& [p, h] : inputs_) j["inputs"][p] = h;
    j["outputs"] = Json::object();
    for (const auto& [p, h] : outputs_) j["outputs"][p] = h;
    std::string name = subcommand_;
    std::replace(name.begin(), name.end(), ' ', '-');
    const std::string p = path(name + ".manifest.json");
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot write '{}'", p));
    f << j.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  std::string out_;
  Json config_ = Json::object();
  std::vector<std::uint64_t> seeds_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

ObservationWindow window_of(const Options& o) {
  if (o.window_start.empty() && o.window_end.empty()) return ObservationWindow::default_window();
  const auto def = ObservationWindow::default_window();
  const std::int64_t start = o.window_start.empty() ? def.start() : parse_time_point(o.window_start);
  const std::int64_t end = o.window_end.empty() ? def.end() : parse_time_point(o.window_end);
  return ObservationWindow(start, end);
}

void record_window(RunManifest& m, const ObservationWindow& w) {
  m.config("window_start", format_utc(w.start()));
  m.config("window_end", format_utc(w.end()));
}

std::vector<CdrEvent> load_events(const std::string& path, const ObservationWindow& window, std::ostream& err) {
  auto in = open_input(path);
  auto parsed = parse_events(in, window);
  if (!parsed.diagnostics.empty()) {
    err << fmt::format("warning: {} malformed event lines skipped in {}\n", parsed.diagnostics.size(), path);
  }
  return std::move(parsed.events);
}

SubscriberTable load_subscribers(const std::string& path, std::ostream& err) {
  auto in = open_input(path);
  auto parsed = parse_subscribers(in);
  if (!parsed.diagnostics.empty()) {
    err << fmt::format("warning: {} malformed subscriber lines skipped in {}\n", parsed.diagnostics.size(), path);
  }
  return std::move(parsed.subscribers);
}

FeatureTable load_features(const std::string& path) {
  auto in = open_input(path);
  return read_features(in);
}

std::vector<PairRow> load_pairs(const std::string& path) {
  auto in = open_input(path);
  return read_pairs(in);
}

PipelineConfig pipeline_of(const Options& o) {
  PipelineConfig c;
  c.model = parse_model_kind(o.model);
  if (o.penalty == "l1") {
    c.penalty = Penalty::l1;
  } else if (o.penalty == "l2") {
    c.penalty = Penalty::l2;
  } else {
    throw std::invalid_argument(fmt::format("unknown penalty '{}'", o.penalty));
  }
  c.selection = parse_feature_selection(o.feature_select);
  c.n_train = o.n_train;
  c.seeds = o.seeds;
  c.jobs = o.jobs;
  c.calibrate = !o.no_calibration;
  return c;
}

void record_pipeline(RunManifest& m, const Options& o) {
  m.config("task", o.task);
  m.config("model", o.model);
  m.config("penalty", o.penalty);
  m.config("feature_select", o.feature_select);
  m.config("n_train", o.n_train);
  m.config("n_test", o.n_test);
  m.config("seed", o.seed);
  m.config("calibrate", !o.no_calibration);
  m.seeds(o.seeds);
}

std::string predictions_csv(std::span<const std::string> row_ids, std::span<const int> labels,
                            const std::optional<std::vector<double>>& probabilities) {
  std::ostringstream out;
  out << "row_id,prediction,probability\n";
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    out << row_ids[i] << ',' << labels[i] << ',';
    if (probabilities) out << csv::format_double((*probabilities)[i]);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const Options& o, std::ostream& out, std::ostream& err) {
  RunManifest m("generate", o.out);
  m.config("preset", o.preset);
  m.seeds({o.seed});
  if (o.preset == "planted-factors") {
    PlantedFactorConfig pc;
    pc.n_rows = o.n_pairs;
    pc.seed = o.seed;
    m.config("n_rows", pc.n_rows);
    const PlantedFactorData data = generate_planted_factors(pc);
    m.write_with("features.csv", [&](std::ostream& s) { write_features(s, data.table); });
    m.write_with("factors_truth.csv", [&](std::ostream& s) { write_membership(s, data.membership); });
    m.finish();
    out << fmt::format("generated {} planted-factor rows\n", pc.n_rows);
    return kExitOk;
  }

  GeneratorConfig config;
  if (!o.config.empty()) {
    m.input(o.config);
    config = parse_generator_config_text(read_text(o.config));
  } else {
    config = preset_config(o.preset);
  }
  config.n_pairs = o.n_pairs;
  config.seed = o.seed;
  config.utc_offset = o.utc_offset;
  if (!o.window_start.empty() || !o.window_end.empty()) config.window = window_of(o);
  config.validate();
  m.config("n_pairs", config.n_pairs);
  m.config("utc_offset", config.utc_offset);
  record_window(m, config.window);
  m.write("generator.conf", generator_config_text(config));

  const SyntheticDataset data = generate(config);
  m.write_with("subscribers.csv", [&](std::ostream& s) { write_subscribers(s, data.subscribers); });
  m.write_with("events.csv", [&](std::ostream& s) { write_events(s, data.events); });
  m.write_with("truth.csv", [&](std::ostream& s) { write_truth(s, data.truth); });

  const PlantedRecovery recovery = verify_planted(data.events, data.truth, config.window, o.min_months);
  Json v;
  v["n_planted"] = recovery.n_planted;
  v["n_recovered"] = recovery.n_recovered;
  v["fraction"] = recovery.fraction;
  v["passed"] = recovery.passed;
  m.write("planted.json", v.dump(2) + "\n");
  m.finish();
  out << fmt::format("generated {} pairs, {} events; planted recovery {:.4f}\n", data.truth.size(),
                     data.events.size(), recovery.fraction);
  if (!recovery.passed) {
    err << fmt::format("error: only {:.2f}% of planted pairs are mutual top-rank (99% required)\n",
                       100.0 * recovery.fraction);
    return kExitValidation;
  }
  return kExitOk;
}

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  RunManifest m("ingest", o.out);
  const ObservationWindow window = window_of(o);
  record_window(m, window);
  m.input(o.events);
  m.input(o.subscribers);

  auto events_in = open_input(o.events);
  EventParseResult events = parse_events(events_in, window);
  auto subs_in = open_input(o.subscribers);
  SubscriberParseResult subs = parse_subscribers(subs_in);

  std::ostringstream rejected;
  for (const auto& d : events.diagnostics) rejected << "{\"file\":\"events\"," << d.to_json_line().substr(1) << '\n';
  for (const auto& d : subs.diagnostics) rejected << "{\"file\":\"subscribers\"," << d.to_json_line().substr(1) << '\n';

  const ValidationReport report = validate_dataset(events.events, subs.subscribers, window);
  Json j;
  j["n_events"] = report.n_events;
  j["n_calls"] = report.n_calls;
  j["n_texts"] = report.n_texts;
  j["n_users"] = report.n_users;
  j["n_subscribers"] = report.n_subscribers;
  j["n_nonsubscribers"] = report.n_nonsubscribers;
  j["n_unknown_duration"] = report.n_unknown_duration;
  j["events_per_month"] = report.events_per_month;
  j["rejected_events"] = events.diagnostics.size();
  j["rejected_subscribers"] = subs.diagnostics.size();
  j["warnings"] = report.warnings;

  m.write_with("events.valid.csv", [&](std::ostream& s) { write_events(s, events.events); });
  m.write_with("subscribers.valid.csv", [&](std::ostream& s) { write_subscribers(s, subs.subscribers); });
  m.write("rejected.jsonl", rejected.str());
  m.write("validation.json", j.dump(2) + "\n");
  m.finish();
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  out << fmt::format("{} events, {} subscribers accepted; {} lines rejected\n", report.n_events,
                     report.n_subscribers, events.diagnostics.size() + subs.diagnostics.size());
  return kExitOk;
}

int cmd_pairs(const Options& o, std::ostream& out, std::ostream& err) {
  RunManifest m("pairs", o.out);
  const ObservationWindow window = window_of(o);
  record_window(m, window);
  m.config("min_months", o.min_months);
  m.input(o.events);
  const auto events = load_events(o.events, window, err);
  SubscriberTable subscribers;
  if (!o.subscribers.empty()) {
    m.input(o.subscribers);
    subscribers = load_subscribers(o.subscribers, err);
  }
  const LinkGraph graph = build_links(events, window);
  const LinkGraph filtered = apply_regularity_filter(graph, window, o.min_months);
  const auto keys = mutual_top_rank_pairs(filtered);
  const auto rows = make_pair_rows(filtered, keys, subscribers);
  m.write_with("pairs.csv", [&](std::ostream& s) { write_pairs(s, rows); });
  m.finish();
  const auto labelled = std::count_if(rows.begin(), rows.end(), [](const PairRow& r) { return r.label_code.has_value(); });
  out << fmt::format("{} links, {} regular, {} mutual top-rank pairs ({} labelled)\n", graph.size(), filtered.size(),
                     rows.size(), labelled);
  return kExitOk;
}

int cmd_features(const Options& o, std::ostream& out, std::ostream& err) {
  RunManifest m("features", o.out);
  const ObservationWindow window = window_of(o);
  record_window(m, window);
  m.config("utc_offset", o.utc_offset);
  m.config("min_months", o.min_months);
  m.config("common_contacts_graph", o.common_graph);
  m.input(o.events);
  m.input(o.pairs);
  const auto events = load_events(o.events, window, err);
  const auto pair_rows = load_pairs(o.pairs);
  std::vector<PairKey> keys;
  keys.reserve(pair_rows.size());
  for (const auto& r : pair_rows) keys.push_back(r.key);

  LinkGraph graph = build_links(events, window);
  if (o.common_graph == "filtered") {
    graph = apply_regularity_filter(graph, window, o.min_months);
  } else if (o.common_graph != "raw") {
    throw std::invalid_argument(fmt::format("unknown common-contacts graph '{}'", o.common_graph));
  }
  const FeatureTable table = compute_features(events, keys, graph, window, FeatureConfig{o.utc_offset}, o.jobs);
  m.write_with("features.csv", [&](std::ostream& s) { write_features(s, table); });
  m.finish();
  out << fmt::format("{} pairs x {} features\n", table.keys.size(), table.values.cols());
  return kExitOk;
}

int cmd_pca(const Options& o, std::ostream& out, std::ostream&) {
  RunManifest m("pca", o.out);
  m.config("n_comp", o.n_comp);
  m.config("cutoff", o.cutoff);
  m.input(o.features);
  const FeatureTable table = load_features(o.features);
  const auto names = feature_names();
  const ScalerParams scaler = fit_scaler(table.values, names);
  const PcaResult result = pca(apply_scaler(table.values, scaler));
  const auto scree = scree_data(result);
  const LoadingMatrix raw = loadings(result, o.n_comp);
  const VarimaxResult rotated = varimax(raw);
  const FactorAssignment factors = assign_factors(rotated.rotated, names, o.cutoff);
  m.write_with("scree.csv", [&](std::ostream& s) { write_scree_csv(s, scree); });
  m.write_with("loadings.csv", [&](std::ostream& s) { write_loadings_csv(s, rotated.rotated, names); });
  m.write("factors.json", factors_to_json(factors, o.cutoff) + "\n");
  m.finish();
  out << fmt::format("{} components kept ({:.1f}% of variance); varimax {} after {} iterations\n", o.n_comp,
                     100.0 * scree.at(o.n_comp - 1).cumulative, rotated.converged ? "converged" : "stopped",
                     rotated.iterations);
  return kExitOk;
}

struct TaskData {
  LabeledDataset raw;
  TestSplit split;
  PreparedSplit prepared;
};

TaskData load_task(const Options& o, RunManifest& m) {
  m.input(o.features);
  m.input(o.pairs);
  TaskData d;
  const FeatureTable table = load_features(o.features);
  const auto pairs = load_pairs(o.pairs);
  d.raw = build_dataset(table, pairs, parse_task(o.task));
  if (d.raw.size() == 0) throw std::invalid_argument("no labelled pairs in the input");
  d.split = split_test(d.raw.size(), o.n_test, o.seed);
  d.prepared = prepare_split(d.raw, d.split);
  return d;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream&) {
  RunManifest m("train", o.out);
  record_pipeline(m, o);
  const TaskData d = load_task(o, m);
  const PipelineConfig config = pipeline_of(o);
  const EnsembleResult result = seed_ensemble(d.prepared.pool, d.prepared.test.x, config);

  ModelFile file;
  file.task = parse_task(o.task);
  file.config = config;
  file.n_test = o.n_test;
  file.split_seed = o.seed;
  file.scaler = d.prepared.scaler;
  file.test_row_ids = d.prepared.test.row_ids;
  file.members = result.members;
  m.write("model.json", model_file_to_json(file) + "\n");
  m.write("predictions.csv",
          predictions_csv(d.prepared.test.row_ids, result.prediction.labels, result.prediction.probabilities));
  m.finish();
  const Confusion c = confusion_of(result.prediction.labels, d.prepared.test.y);
  out << fmt::format("trained {} x {} ({}); held-out accuracy {:.4f}\n", config.seeds.size(), o.model, o.task,
                     c.accuracy());
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream&) {
  RunManifest m("evaluate", o.out);
  m.input(o.model_json);
  ModelFile file = model_file_from_json(read_text(o.model_json));
  m.config("task", to_string(file.task));
  m.seeds(file.config.seeds);
  m.input(o.features);
  m.input(o.pairs);
  const FeatureTable table = load_features(o.features);
  const auto pairs = load_pairs(o.pairs);
  LabeledDataset data = build_dataset(table, pairs, file.task);
  data.x = apply_scaler(data.x, file.scaler);

  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < data.row_ids.size(); ++i) index.emplace(data.row_ids[i], i);
  std::vector<std::size_t> rows;
  for (const auto& id : file.test_row_ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw std::invalid_argument(fmt::format("test row '{}' missing from features", id));
    rows.push_back(it->second);
  }
  const LabeledDataset test = data.subset(rows);

  std::vector<int> labels;
  std::optional<std::vector<double>> probabilities;
  if (!o.predictions.empty()) {
    m.input(o.predictions);
    m.config("predictions", "external");
    std::map<std::string, std::pair<int, std::optional<double>>> external;
    auto in = open_input(o.predictions);
    std::string line;
    if (!std::getline(in, line) || csv::clean_line(line) != "row_id,prediction,probability") {
      throw IngestError("predictions: bad header");
    }
    while (std::getline(in, line)) {
      const std::string cleaned(csv::clean_line(line));
      if (cleaned.empty()) continue;
      const auto f = csv::split(cleaned, ',');
      const auto pred = f.size() == 3 ? csv::parse_int(f[1]) : std::nullopt;
      if (!pred || (*pred != 0 && *pred != 1)) throw IngestError(fmt::format("predictions: bad row '{}'", cleaned));
      external[std::string(f[0])] = {static_cast<int>(*pred), f[2].empty() ? std::nullopt : csv::parse_double(f[2])};
    }
    bool all_probabilities = true;
    std::vector<double> p;
    for (const auto& id : test.row_ids) {
      const auto it = external.find(id);
      if (it == external.end()) throw std::invalid_argument(fmt::format("no prediction for test row '{}'", id));
      labels.push_back(it->second.first);
      if (it->second.second) p.push_back(*it->second.second);
      else all_probabilities = false;
    }
    if (all_probabilities) probabilities = std::move(p);
  } else {
    attach_knn_training(file, data);
    const EnsemblePrediction prediction = predict_ensemble(file.members, test.x);
    labels = prediction.labels;
    probabilities = prediction.probabilities;
  }

  const EvalReport report = evaluate(labels, probabilities ? std::span<const double>(*probabilities)
                                                           : std::span<const double>{},
                                     test.y, test.groups);
  Json j;
  j["task"] = to_string(file.task);
  j["model"] = o.predictions.empty() ? to_string(file.config.model) : "external";
  j["n_members"] = file.members.size();
  const Json body = Json::parse(report_to_json(report));
  for (const auto& [k, v] : body.items()) j[k] = v;
  m.write("report.json", j.dump(2) + "\n");
  m.finish();
  out << fmt::format("accuracy {:.4f}  precision {:.4f}  TPR {:.4f}  TNR {:.4f}  (n = {})\n", report.accuracy,
                     report.precision, report.tpr, report.tnr, report.confusion.total());
  return kExitOk;
}

int cmd_bayes_bounds(const Options& o, std::ostream& out, std::ostream& err) {
  RunManifest m("bayes-bounds", o.out);
  m.config("task", o.task);
  m.config("n_train", o.n_train);
  m.config("n_test", o.n_test);
  m.config("seed", o.seed);
  m.config("loo", o.loo);
  m.seeds({o.seed});
  const TaskData d = load_task(o, m);
  LabeledDataset train = d.prepared.pool;
  if (o.n_train > 0 && o.n_train < train.size()) {
    const TestSplit sample = split_test(train.size(), o.n_train, o.seed + 1);
    train = train.subset(sample.test);
  }
  const double e_nn = o.loo ? one_nn_error_loo(train, o.jobs) : one_nn_error(train, d.prepared.test, o.jobs);
  const BayesBounds bounds = bayes_bounds(e_nn);
  if (bounds.clamped) err << "warning: 1-NN error above 0.5 clamped to 0.5\n";
  m.write("bounds.json", bounds_to_json(bounds, train.size(), o.loo ? 0 : d.prepared.test.size(), o.seed) + "\n");
  m.finish();
  out << fmt::format("E_NN {:.4f}; Bayes error in [{:.4f}, {:.4f}]; max accuracy in [{:.4f}, {:.4f}]\n", bounds.e_nn,
                     bounds.bayes_lower, bounds.bayes_upper, bounds.max_accuracy_lower, bounds.max_accuracy_upper);
  return kExitOk;
}

int cmd_age_restricted(const Options& o, std::ostream& out, std::ostream&) {
  RunManifest m("experiment age-restricted", o.out);
  record_pipeline(m, o);
  m.config("bracket", o.bracket);
  if (o.task != "ogp") throw std::invalid_argument("the age-restricted experiment uses the ogp task");
  if (o.bracket.size() != 1 || !bracket_from_letter(o.bracket[0])) {
    throw std::invalid_argument(fmt::format("unknown bracket '{}'", o.bracket));
  }
  const TaskData d = load_task(o, m);
  const AgeRestrictedResult result =
      age_restricted_experiment(d.prepared.pool, d.prepared.test, *bracket_from_letter(o.bracket[0]), pipeline_of(o));
  m.write("age_restricted.json", age_restricted_to_json(result) + "\n");
  m.finish();
  out << fmt::format("bracket {}: full OGP {:.3f} SGP {:.3f} all {:.3f}; restricted OGP {:.3f} SGP {:.3f} all {:.3f}\n",
                     o.bracket, result.full.ogp, result.full.sgp, result.full.all, result.restricted.ogp,
                     result.restricted.sgp, result.restricted.all);
  return kExitOk;
}

/// Codes in the row order of the relationship tables.
int code_order(const std::string& code) {
  const auto parsed = parse_relationship_code(code);
  if (!parsed) return 1000;
  const int bracket = static_cast<int>(parsed->younger_bracket);
  const int gap = static_cast<int>(parsed->age_gap);
  const int gender = parsed->gender_composition == GenderComposition::same ? 1 : 0;
  return gap * 100 + bracket * 2 + gender;
}

std::string slug(std::string code) {
  for (char& c : code) {
    if (c == ' ') c = '_';
    else if (c == '-') c = 'm';
    else if (c == '+') c = 'p';
  }
  return code;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  if (o.reports.empty()) throw std::invalid_argument("report needs at least one --reports file");
  RunManifest m("report", o.out);
  std::ostringstream md;
  md << "# cdrlink report\n";
  for (const auto& path : o.reports) {
    m.input(path);
    const auto j = nlohmann::json::parse(read_text(path));
    const std::string stem = fs::path(path).stem().string() + "_" + sha256_hex(path).substr(0, 6);
    md << "\n## " << path << "\n\n";
    if (j.contains("restricted")) {
      md << "Peer age group " << j.at("bracket").get<std::string>() << " (accuracy, %)\n\n";
      md << "| | OGP | SGP | OGP+SGP |\n|---|---|---|---|\n";
      for (const char* which : {"full", "restricted"}) {
        const auto& s = j.at(which);
        md << fmt::format("| {} | {:.1f} | {:.1f} | {:.1f} |\n", std::string(which) == "full" ? "Full" : "Age-restricted",
                          100 * s.at("ogp").get<double>(), 100 * s.at("sgp").get<double>(),
                          100 * s.at("all").get<double>());
      }
      continue;
    }
    const EvalReport r = report_from_json(j.dump());
    md << fmt::format("Task {} / model {}: accuracy {:.3f}, precision {:.3f}, TPR {:.3f}, TNR {:.3f} (n = {})\n\n",
                      j.value("task", "?"), j.value("model", "?"), r.accuracy, r.precision, r.tpr, r.tnr,
                      r.confusion.total());
    std::vector<GroupStats> groups = r.groups;
    std::stable_sort(groups.begin(), groups.end(),
                     [](const GroupStats& a, const GroupStats& b) { return code_order(a.code) < code_order(b.code); });
    md << "| Relationship | % of test set | Accuracy (%) |\n|---|---|---|\n";
    double covered = 0.0;
    for (const auto& g : groups) {
      if (g.share < 0.01) continue;
      covered += g.share;
      md << fmt::format("| {} | {:.1f} | {:.1f} |\n", g.code, 100 * g.share, 100 * g.accuracy);
    }
    md << fmt::format("\nGroups with at least 1% of the test set cover {:.1f}% of it.\n", 100 * covered);
    for (const auto& [code, hist] : r.histograms) {
      m.write_with(fmt::format("hist_{}_{}.csv", stem, slug(code)), [&](std::ostream& s) {
        s << "bin_low,bin_high,relative_frequency\n";
        for (std::size_t b = 0; b < hist.size(); ++b) {
          s << csv::format_double(static_cast<double>(b) / static_cast<double>(hist.size())) << ','
            << csv::format_double(static_cast<double>(b + 1) / static_cast<double>(hist.size())) << ','
            << csv::format_double(hist[b]) << '\n';
        }
      });
    }
  }
  m.write("summary.md", md.str());
  m.finish();
  out << md.str();
  return kExitOk;
}

int cmd_manifest(const Options& o, std::ostream& out) {
  const std::string text = manifest_markdown();
  if (o.out.empty() || o.out == "-") {
    out << text;
    return kExitOk;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write '{}'", o.out));
  f << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"cdrlink: link-centric relationship inference from call detail records", "cdrlink"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CDRLINK_VERSION);

  auto add_window = [&](CLI::App* s) {
    s->add_option("--window-start", o.window_start, "window start (YYYY-MM-DD[THH:MM:SS] or epoch seconds)");
    s->add_option("--window-end", o.window_end, "window end, exclusive");
  };
  auto add_pipeline = [&](CLI::App* s) {
    s->add_option("--features", o.features, "features.csv")->required();
    s->add_option("--pairs", o.pairs, "pairs.csv")->required();
    s->add_option("--task", o.task, "ogp | age35")->check(CLI::IsMember({"ogp", "age35"}));
    s->add_option("--model", o.model, "logreg | lsvm | knn")->check(CLI::IsMember({"logreg", "lsvm", "knn"}));
    s->add_option("--penalty", o.penalty, "l1 | l2 for linear models")->check(CLI::IsMember({"l1", "l2"}));
    s->add_option("--feature-select", o.feature_select, "none | lr-l1 | lsvm-l1")
        ->check(CLI::IsMember({"none", "lr-l1", "lsvm-l1"}));
    s->add_option("--n-train", o.n_train, "balanced training sample size");
    s->add_option("--n-test", o.n_test, "held-out test size");
    s->add_option("--seed", o.seed, "test split seed");
    s->add_option("--seeds", o.seeds, "ensemble seeds (odd count)")->delimiter(',');
    s->add_flag("--no-calibration", o.no_calibration, "skip Platt calibration");
    s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--out", o.out, "output directory");
  };

  auto* gen = app.add_subcommand("generate", "synthetic dataset with planted relationship archetypes");
  gen->add_option("--preset", o.preset, "table3-like | planted-factors")
      ->check(CLI::IsMember({"table3-like", "planted-factors"}));
  gen->add_option("--config", o.config, "key = value generator config");
  gen->add_option("--n-pairs", o.n_pairs, "pairs (rows for planted-factors)")->check(CLI::PositiveNumber);
  gen->add_option("--seed", o.seed, "generator seed");
  gen->add_option("--utc-offset", o.utc_offset, "seconds east of UTC");
  gen->add_option("--min-months", o.min_months, "regularity filter used by the recovery check");
  add_window(gen);
  gen->add_option("--out", o.out, "output directory");

  auto* ing = app.add_subcommand("ingest", "validate events and subscribers");
  ing->add_option("--events", o.events, "events.csv")->required();
  ing->add_option("--subscribers", o.subscribers, "subscribers.csv")->required();
  add_window(ing);
  ing->add_option("--out", o.out, "output directory");

  auto* prs = app.add_subcommand("pairs", "regular mutual top-rank pairs");
  prs->add_option("--events", o.events, "events.csv")->required();
  prs->add_option("--subscribers", o.subscribers, "subscribers.csv (labels pairs)");
  prs->add_option("--min-months", o.min_months, "months with calls required");
  add_window(prs);
  prs->add_option("--out", o.out, "output directory");

  auto* fea = app.add_subcommand("features", "175 features per pair");
  fea->add_option("--events", o.events, "events.csv")->required();
  fea->add_option("--pairs", o.pairs, "pairs.csv")->required();
  fea->add_option("--utc-offset", o.utc_offset, "seconds east of UTC");
  fea->add_option("--min-months", o.min_months, "regularity filter for --common-contacts-graph filtered");
  fea->add_option("--common-contacts-graph", o.common_graph, "raw | filtered")
      ->check(CLI::IsMember({"raw", "filtered"}));
  fea->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  add_window(fea);
  fea->add_option("--out", o.out, "output directory");

  auto* pc = app.add_subcommand("pca", "principal components and varimax factors");
  pc->add_option("--features", o.features, "features.csv")->required();
  pc->add_option("--n-comp", o.n_comp, "components to rotate")->check(CLI::PositiveNumber);
  pc->add_option("--cutoff", o.cutoff, "absolute loading cutoff");
  pc->add_option("--out", o.out, "output directory");

  auto* trn = app.add_subcommand("train", "seed-ensembled classifier");
  add_pipeline(trn);

  auto* evl = app.add_subcommand("evaluate", "score a trained model on its held-out rows");
  evl->add_option("--model-json", o.model_json, "model.json")->required();
  evl->add_option("--features", o.features, "features.csv")->required();
  evl->add_option("--pairs", o.pairs, "pairs.csv")->required();
  evl->add_option("--predictions", o.predictions, "external row_id,prediction,probability file");
  evl->add_option("--out", o.out, "output directory");

  auto* bb = app.add_subcommand("bayes-bounds", "Bayes error bounds from the 1-NN error");
  bb->add_option("--features", o.features, "features.csv")->required();
  bb->add_option("--pairs", o.pairs, "pairs.csv")->required();
  bb->add_option("--task", o.task, "ogp | age35")->check(CLI::IsMember({"ogp", "age35"}));
  bb->add_option("--n-train", o.n_train, "1-NN reference sample (0 = whole pool)");
  bb->add_option("--n-test", o.n_test, "held-out test size");
  bb->add_option("--seed", o.seed, "split seed");
  bb->add_flag("--loo", o.loo, "leave-one-out on the reference sample");
  bb->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  bb->add_option("--out", o.out, "output directory");

  auto* exp = app.add_subcommand("experiment", "experiments");
  exp->require_subcommand(1);
  auto* ar = exp->add_subcommand("age-restricted", "train and test on one peer age bracket");
  add_pipeline(ar);
  ar->add_option("--bracket", o.bracket, "Y | M | L | O");

  auto* rep = app.add_subcommand("report", "merge report.json files");
  rep->add_option("--reports", o.reports, "report.json / age_restricted.json files")->required();
  rep->add_option("--out", o.out, "output directory");

  auto* man = app.add_subcommand("manifest", "print the feature manifest as markdown");
  man->add_option("--out", o.out, "output file ('-' for stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out, err);
    if (ing->parsed()) return cmd_ingest(o, out, err);
    if (prs->parsed()) return cmd_pairs(o, out, err);
    if (fea->parsed()) return cmd_features(o, out, err);
    if (pc->parsed()) return cmd_pca(o, out, err);
    if (trn->parsed()) return cmd_train(o, out, err);
    if (evl->parsed()) return cmd_evaluate(o, out, err);
    if (bb->parsed()) return cmd_bayes_bounds(o, out, err);
    if (ar->parsed()) return cmd_age_restricted(o, out, err);
    if (rep->parsed()) return cmd_report(o, out, err);
    if (man->parsed()) {
      if (o.out == ".") o.out = "-";
      return cmd_manifest(o, out);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFatal;
  } catch (const IngestError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "fatal: " << e.what() << '\n';
    return kExitFatal;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace cdrlink::cli
