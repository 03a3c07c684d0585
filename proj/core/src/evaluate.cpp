#include "cdrlink/evaluate.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cdrlink {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double Confusion::accuracy() const { return ratio(tp + tn, total()); }
double Confusion::precision() const { return ratio(tp, tp + fp); }
double Confusion::tpr() const { return ratio(tp, tp + fn); }
double Confusion::tnr() const { return ratio(tn, tn + fp); }

Confusion confusion_of(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::vector<double> probability_histogram(std::span<const double> probabilities, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<double> out(bins, 0.0);
  if (probabilities.empty()) return out;
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(p * static_cast<double>(bins)));
    out[bin] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(probabilities.size());
  return out;
}

EvalReport evaluate(std::span<const int> predictions, std::span<const double> probabilities,
                    std::span<const int> labels, std::span<const std::string> groups) {
  const std::size_t n = labels.size();
  if (predictions.size() != n || (!probabilities.empty() && probabilities.size() != n) ||
      (!groups.empty() && groups.size() != n)) {
    throw std::invalid_argument("evaluate: input lengths differ");
  }
  EvalReport report;
  report.confusion = confusion_of(predictions, labels);
  report.accuracy = report.confusion.accuracy();
  report.precision = report.confusion.precision();
  report.tpr = report.confusion.tpr();
  report.tnr = report.confusion.tnr();
  report.has_probabilities = !probabilities.empty();

  std::map<std::string, std::vector<std::size_t>> rows_by_group;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (!groups[i].empty()) rows_by_group[groups[i]].push_back(i);
  }
  for (const auto& [code, rows] : rows_by_group) {
    GroupStats g;
    g.code = code;
    g.n = rows.size();
    for (std::size_t r : rows) g.correct += static_cast<std::size_t>(predictions[r] == labels[r]);
    g.accuracy = ratio(g.correct, g.n);
    g.share = ratio(g.n, n);
    report.groups.push_back(g);
    if (report.has_probabilities) {
      std::vector<double> p;
      p.reserve(rows.size());
      for (std::size_t r : rows) p.push_back(probabilities[r]);
      report.histograms[code] = probability_histogram(p);
    }
  }
  if (report.has_probabilities) report.histograms["all"] = probability_histogram(probabilities);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.confusion.total();
  j["accuracy"] = report.accuracy;
  j["precision"] = report.precision;
  j["tpr"] = report.tpr;
  j["tnr"] = report.tnr;
  j["confusion"] = {{"tp", report.confusion.tp}, {"fp", report.confusion.fp},
                    {"tn", report.confusion.tn}, {"fn", report.confusion.fn}};
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : report.groups) {
    j["groups"].push_back(
        {{"code", g.code}, {"n", g.n}, {"correct", g.correct}, {"accuracy", g.accuracy}, {"share", g.share}});
  }
  j["histogram_bins"] = kHistogramBins;
  j["histograms"] = nlohmann::ordered_json::object();
  for (const auto& [code, h] : report.histograms) j["histograms"][code] = h;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                 c.at("fn").get<std::size_t>()};
  r.accuracy = j.at("accuracy").get<double>();
  r.precision = j.at("precision").get<double>();
  r.tpr = j.at("tpr").get<double>();
  r.tnr = j.at("tnr").get<double>();
  for (const auto& g : j.at("groups")) {
    r.groups.push_back({g.at("code").get<std::string>(), g.at("n").get<std::size_t>(),
                        g.at("correct").get<std::size_t>(), g.at("accuracy").get<double>(),
                        g.at("share").get<double>()});
  }
  for (const auto& [code, h] : j.at("histograms").items()) r.histograms[code] = h.get<std::vector<double>>();
  r.has_probabilities = !r.histograms.empty();
  return r;
}

}  // namespace cdrlink
