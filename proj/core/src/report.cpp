#include "frozencil/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "frozencil/dataio.hpp"
#include "frozencil/error.hpp"

namespace frozencil {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view word) {
  if (word == "json") return ReportFormat::kJson;
  if (word == "csv") return ReportFormat::kCsv;
  if (word == "md" || word == "markdown") return ReportFormat::kMarkdown;
  throw Error(ErrorCode::kArgument, "unknown report format '" + std::string(word) + "'");
}

namespace {

constexpr std::string_view kBundleFormat = "frozencil-results";

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json stat_json(const SummaryStat& s) { return {{"mean", s.mean}, {"std", opt(s.std)}}; }

json task_json(const TaskRecord& r) {
  json j;
  j["task"] = r.task;
  j["classes"] = r.classes;
  j["train_samples"] = r.train_samples;
  j["past_hash_before"] = r.past_hash_before;
  j["past_hash_after"] = r.past_hash_after;
  if (r.mlp_history) {
    const auto& h = *r.mlp_history;
    j["mlp_history"] = {{"train_loss", h.train_loss},
                        {"val_accuracy", h.val_accuracy},
                        {"best_val_accuracy", h.best_val_accuracy},
                        {"epochs_run", h.epochs_run},
                        {"best_epoch", h.best_epoch},
                        {"early_stopped", h.early_stopped},
                        {"warnings", h.warnings}};
  } else {
    j["mlp_history"] = nullptr;
  }
  if (r.hyp_history) {
    j["hyp_history"] = {{"train_loss", r.hyp_history->train_loss}, {"val_loss", r.hyp_history->val_loss}};
  } else {
    j["hyp_history"] = nullptr;
  }
  return j;
}

json run_json(const SeedResult& r) {
  json matrix = json::array();
  for (const auto& row : r.accuracy_matrix.rows()) {
    json jr = json::array();
    for (const auto& v : row) jr.push_back(opt(v));
    matrix.push_back(std::move(jr));
  }
  json tasks = json::array();
  for (const auto& t : r.tasks) tasks.push_back(task_json(t));
  return {{"seed", r.seed},
          {"baac", r.baac},
          {"forgetting", opt(r.forgetting)},
          {"accuracy_matrix", std::move(matrix)},
          {"frozen_past_ok", r.frozen_past_ok},
          {"tasks", std::move(tasks)}};
}

json bundle_json(const ResultsBundle& b) {
  json runs = json::array();
  for (const auto& r : b.runs) runs.push_back(run_json(r));
  json j;
  j["format"] = kBundleFormat;
  j["provenance"] = {{"config_hash", b.config_hash},
                     {"embd_version", kEmbdVersion},
                     {"report_version", kReportVersion}};
  j["method"] = b.method;
  j["dataset"] = b.dataset;
  j["config"] = json::parse(config_to_json(b.config));
  j["runs"] = std::move(runs);
  j["aggregate"] = {{"baac", stat_json(b.baac)},
                    {"forgetting", b.forgetting ? stat_json(*b.forgetting) : json(nullptr)}};
  return j;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::kFormat, "results bundle: " + what); }

std::optional<double> get_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

SummaryStat stat_from(const json& j) {
  SummaryStat s;
  s.mean = j.at("mean").get<double>();
  s.std = get_opt(j.at("std"));
  return s;
}

TaskRecord task_from(const json& j) {
  TaskRecord r;
  r.task = j.at("task").get<std::size_t>();
  r.classes = j.at("classes").get<std::vector<ClassId>>();
  r.train_samples = j.at("train_samples").get<std::size_t>();
  r.past_hash_before = j.at("past_hash_before").get<std::uint64_t>();
  r.past_hash_after = j.at("past_hash_after").get<std::uint64_t>();
  if (const auto& h = j.at("mlp_history"); !h.is_null()) {
    TrainHistory th;
    th.train_loss = h.at("train_loss").get<std::vector<double>>();
    th.val_accuracy = h.at("val_accuracy").get<std::vector<double>>();
    th.best_val_accuracy = h.at("best_val_accuracy").get<std::vector<double>>();
    th.epochs_run = h.at("epochs_run").get<std::size_t>();
    th.best_epoch = h.at("best_epoch").get<std::size_t>();
    th.early_stopped = h.at("early_stopped").get<bool>();
    th.warnings = h.at("warnings").get<std::vector<std::string>>();
    r.mlp_history = std::move(th);
  }
  if (const auto& h = j.at("hyp_history"); !h.is_null()) {
    HypTrainHistory hh;
    hh.train_loss = h.at("train_loss").get<std::vector<double>>();
    hh.val_loss = h.at("val_loss").get<std::vector<double>>();
    r.hyp_history = std::move(hh);
  }
  return r;
}

SeedResult run_from(const json& j) {
  SeedResult r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.baac = j.at("baac").get<double>();
  r.forgetting = get_opt(j.at("forgetting"));
  r.frozen_past_ok = j.at("frozen_past_ok").get<bool>();
  const auto& m = j.at("accuracy_matrix");
  r.accuracy_matrix = AccuracyMatrix(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k].size() != m.size()) bad("accuracy matrix is not square");
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[k][i].is_null()) r.accuracy_matrix.set(k + 1, i + 1, m[k][i].get<double>());
    }
  }
  for (const auto& t : j.at("tasks")) r.tasks.push_back(task_from(t));
  return r;
}

std::string percent(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
  return buf;
}

std::string render_csv(std::span<const ResultsBundle> bundles) {
  std::ostringstream out;
  out << "method,dataset,seed,baac,forgetting\n";
  char buf[64];
  for (const auto& b : bundles) {
    for (const auto& r : b.runs) {
      out << b.method << ',' << b.dataset << ',' << r.seed << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.baac);
      out << buf << ',';
      if (r.forgetting) {
        std::snprintf(buf, sizeof(buf), "%.17g", *r.forgetting);
        out << buf;
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string render_markdown(std::span<const ResultsBundle> bundles) {
  std::vector<std::string> methods, datasets;
  std::map<std::pair<std::string, std::string>, const ResultsBundle*> cell;
  for (const auto& b : bundles) {
    if (std::find(methods.begin(), methods.end(), b.method) == methods.end()) methods.push_back(b.method);
    if (std::find(datasets.begin(), datasets.end(), b.dataset) == datasets.end()) datasets.push_back(b.dataset);
    cell[{b.method, b.dataset}] = &b;
  }
  std::ostringstream out;
  out << "| Method |";
  for (const auto& d : datasets) out << ' ' << d << " BAAC | " << d << " F |";
  out << "\n|---|";
  for (std::size_t i = 0; i < datasets.size(); ++i) out << "---:|---:|";
  out << '\n';
  for (const auto& m : methods) {
    out << "| " << m << " |";
    for (const auto& d : datasets) {
      const auto it = cell.find({m, d});
      if (it == cell.end()) {
        out << " - | - |";
        continue;
      }
      const ResultsBundle& b = *it->second;
      out << ' ' << percent(b.baac.mean) << " | "
          << percent(b.forgetting ? std::optional<double>(b.forgetting->mean) : std::nullopt) << " |";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string bundle_to_json(const ResultsBundle& bundle) { return bundle_json(bundle).dump(2) + "\n"; }

ResultsBundle bundle_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kBundleFormat) bad("unexpected format tag");
    const auto& prov = j.at("provenance");
    if (prov.at("report_version").get<int>() != kReportVersion) bad("unsupported report version");
    ResultsBundle b;
    b.method = j.at("method").get<std::string>();
    b.dataset = j.at("dataset").get<std::string>();
    b.config_hash = prov.at("config_hash").get<std::string>();
    b.config = parse_experiment_config(j.at("config").dump());
    for (const auto& r : j.at("runs")) b.runs.push_back(run_from(r));
    const auto& agg = j.at("aggregate");
    b.baac = stat_from(agg.at("baac"));
    if (!agg.at("forgetting").is_null()) b.forgetting = stat_from(agg.at("forgetting"));
    return b;
  } catch (const json::exception& e) {
    bad(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormat) throw;
    bad(e.what());
  }
}

std::string render_report(std::span<const ResultsBundle> bundles, ReportFormat format) {
  switch (format) {
    case ReportFormat::kCsv: return render_csv(bundles);
    case ReportFormat::kMarkdown: return render_markdown(bundles);
    case ReportFormat::kJson: break;
  }
  json arr = json::array();
  for (const auto& b : bundles) arr.push_back(bundle_json(b));
  return arr.dump(2) + "\n";
}

}  // namespace frozencil
